//! Forward-maximum-matching entity linking against the KG alias index.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, TokenizeMode, TokenSpan};
use crate::kg::{EntityId, KnowledgeGraph};

/// An entity occurrence in a text. `entity` is the synonym-closure
/// representative of the matched alias's owner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity: EntityId,
    pub token_start: usize,
    pub token_end: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
}

impl EntityMention {
    pub fn token_len(&self) -> usize {
        self.token_end - self.token_start
    }

    /// Same span in the same text?
    pub fn same_span(&self, other: &EntityMention) -> bool {
        self.token_start == other.token_start && self.token_end == other.token_end
    }
}

/// Tokenized alias dictionary: maps a case-folded, space-joined token
/// sequence to its entity. Built once per (graph, mode) and reused across
/// texts.
#[derive(Debug, Clone)]
pub struct FmmDict {
    entries: HashMap<String, EntityId>,
    max_tokens: usize,
}

impl FmmDict {
    pub fn build(kg: &KnowledgeGraph, mode: TokenizeMode) -> Self {
        let mut entries: HashMap<String, EntityId> = HashMap::new();
        let mut max_tokens = 1;
        // entity iteration is id-ordered, so on key collisions the smallest
        // id wins deterministically
        for entity in kg.entities() {
            for alias in &entity.aliases {
                let tokens = tokenize(alias, mode);
                if tokens.is_empty() {
                    continue;
                }
                let key = join_key(&tokens.iter().collect::<Vec<_>>());
                max_tokens = max_tokens.max(tokens.len());
                entries.entry(key).or_insert(entity.id);
            }
        }
        FmmDict { entries, max_tokens }
    }

    pub fn lookup(&self, key: &str) -> Option<EntityId> {
        self.entries.get(key).copied()
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }
}

fn join_key(tokens: &[&TokenSpan]) -> String {
    let mut key = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            key.push(' ');
        }
        key.push_str(&t.text.to_lowercase());
    }
    key
}

fn covered_surface(tokens: &[TokenSpan]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && tokens[i - 1].end < t.start {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

/// Greedy left-to-right longest-match scan: at each position take the
/// longest token run whose joined surface is a KG alias, consume it, and
/// continue after it. Mentions come out normalized and position-sorted.
pub fn extract_entities_fmm(tokens: &[TokenSpan], kg: &KnowledgeGraph) -> Vec<EntityMention> {
    let dict = FmmDict::build(kg, TokenizeMode::Whitespace);
    extract_with_dict(tokens, &dict, kg)
}

/// Same scan with a prebuilt dictionary (the hot path).
pub fn extract_with_dict(
    tokens: &[TokenSpan],
    dict: &FmmDict,
    kg: &KnowledgeGraph,
) -> Vec<EntityMention> {
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let upper = (i + dict.max_tokens()).min(tokens.len());
        let mut matched = None;
        for j in (i + 1..=upper).rev() {
            let key = join_key(&tokens[i..j].iter().collect::<Vec<_>>());
            if let Some(raw) = dict.lookup(&key) {
                matched = Some((j, raw));
                break;
            }
        }
        match matched {
            Some((j, raw)) => {
                let entity = kg.normalize_entity(raw).unwrap_or(raw);
                mentions.push(EntityMention {
                    entity,
                    token_start: i,
                    token_end: j,
                    char_start: tokens[i].start,
                    char_end: tokens[j - 1].end,
                    surface: covered_surface(&tokens[i..j]),
                });
                i = j;
            }
            None => i += 1,
        }
    }
    mentions
}
