use serde::{Deserialize, Serialize};

/// One token and its half-open character-offset span in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizeMode {
    /// Split on whitespace and punctuation; tokens are maximal alphanumeric
    /// runs.
    #[default]
    Whitespace,
    /// One token per non-space character, for unsegmented scripts.
    Char,
}

impl std::str::FromStr for TokenizeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizeMode::Whitespace),
            "char" => Ok(TokenizeMode::Char),
            other => Err(format!("unknown tokenize mode \"{other}\" (whitespace|char)")),
        }
    }
}

/// Deterministic segmentation into non-overlapping, sorted spans. Offsets
/// count characters, not bytes.
pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    match mode {
        TokenizeMode::Whitespace => {
            let mut current = String::new();
            let mut start = 0;
            for (i, ch) in text.chars().enumerate() {
                if ch.is_alphanumeric() {
                    if current.is_empty() {
                        start = i;
                    }
                    current.push(ch);
                } else if !current.is_empty() {
                    out.push(TokenSpan { text: std::mem::take(&mut current), start, end: i });
                }
            }
            if !current.is_empty() {
                let end = text.chars().count();
                out.push(TokenSpan { text: current, start, end });
            }
        }
        TokenizeMode::Char => {
            for (i, ch) in text.chars().enumerate() {
                if !ch.is_whitespace() {
                    out.push(TokenSpan { text: ch.to_string(), start: i, end: i + 1 });
                }
            }
        }
    }
    out
}
