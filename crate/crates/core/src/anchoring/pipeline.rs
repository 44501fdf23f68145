//! The end-to-end anchoring pipeline: tokenize -> FMM -> candidates ->
//! knowledge-reasoning gate -> rule-based and neural scores -> threshold.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::candidates::{filter_knowledge_reasoning, generate_triple_candidates, TripleCandidate};
use super::fmm::{extract_with_dict, EntityMention, FmmDict};
use super::ntd::{ntd_features, score_neural, NtdModel};
use super::rb::{score_rule_based, RbWeights};
use super::tokenize::{tokenize, TokenizeMode};
use crate::error::DataError;
use crate::kg::{KnowledgeGraph, RelationKind};

/// Everything configurable about anchoring. The rule/neural mix is fixed at
/// 0.3/0.7 by default; the threshold at the logistic midpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub mode: TokenizeMode,
    pub rb_weights: RbWeights,
    pub rb_weight: f64,
    pub ntd_weight: f64,
    pub threshold: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            mode: TokenizeMode::Whitespace,
            rb_weights: RbWeights::default(),
            rb_weight: 0.3,
            ntd_weight: 0.7,
            threshold: 0.5,
        }
    }
}

/// Knowledge anchors for one text: every entity mention in position order,
/// and the triple candidates that survived scoring, ordered by
/// (head span start, tail span start).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnchorSet {
    pub entities: Vec<EntityMention>,
    pub triples: Vec<TripleCandidate>,
}

/// Combine the ensemble scores: the knowledge-reasoning gate zeroes failed
/// candidates, otherwise rule-based and neural scores mix linearly.
pub fn combine_scores(rb: f64, ntd: f64, kr_pass: bool, cfg: &AnchorConfig) -> f64 {
    if kr_pass {
        cfg.rb_weight * rb + cfg.ntd_weight * ntd
    } else {
        0.0
    }
}

/// Reusable anchoring context; builds the FMM dictionary once.
pub struct Anchorer<'a> {
    kg: &'a KnowledgeGraph,
    ntd: Option<&'a NtdModel>,
    cfg: AnchorConfig,
    dict: FmmDict,
}

impl<'a> Anchorer<'a> {
    pub fn new(kg: &'a KnowledgeGraph, ntd: Option<&'a NtdModel>, cfg: AnchorConfig) -> Self {
        let dict = FmmDict::build(kg, cfg.mode);
        Anchorer { kg, ntd, cfg, dict }
    }

    pub fn config(&self) -> &AnchorConfig {
        &self.cfg
    }

    pub fn has_ntd(&self) -> bool {
        self.ntd.is_some()
    }

    /// Anchor one text, returning the accepted set only.
    pub fn anchor(&self, text: &str) -> AnchorSet {
        self.anchor_explained(text).0
    }

    /// Anchor one text and also return every candidate with its scores, for
    /// `--explain` output and the disambiguation evaluators.
    pub fn anchor_explained(&self, text: &str) -> (AnchorSet, Vec<TripleCandidate>) {
        let tokens = tokenize(text, self.cfg.mode);
        let mentions = extract_with_dict(&tokens, &self.dict, self.kg);
        let raw = generate_triple_candidates(&mentions, self.kg);
        let mut cands = filter_knowledge_reasoning(raw, self.kg);
        for cand in cands.iter_mut() {
            cand.rb_score = score_rule_based(cand, &tokens, &self.cfg.rb_weights);
        }
        // ntd needs the full candidate list; score in a second pass
        let ntd_scores: Vec<f64> = cands
            .iter()
            .map(|cand| match self.ntd {
                Some(model) => {
                    let bag = ntd_features(cand, &tokens, &cands);
                    score_neural(&bag, model)
                }
                None => 0.0,
            })
            .collect();
        for (cand, ntd) in cands.iter_mut().zip(ntd_scores) {
            cand.ntd_score = ntd;
            cand.final_score = match self.ntd {
                Some(_) => combine_scores(cand.rb_score, cand.ntd_score, cand.kr_pass, &self.cfg),
                // no neural model: fall back to the rule score behind the
                // same knowledge-reasoning gate
                None => {
                    if cand.kr_pass {
                        cand.rb_score
                    } else {
                        0.0
                    }
                }
            };
        }

        let mut accepted: Vec<TripleCandidate> = cands
            .iter()
            .filter(|c| c.final_score >= self.cfg.threshold)
            .cloned()
            .collect();
        accepted.sort_by_key(|c| (c.head.token_start, c.tail.token_start, c.relation));

        (AnchorSet { entities: mentions, triples: accepted }, cands)
    }
}

/// One-shot convenience wrapper over [`Anchorer`].
pub fn anchor(
    text: &str,
    kg: &KnowledgeGraph,
    ntd: Option<&NtdModel>,
    cfg: &AnchorConfig,
) -> AnchorSet {
    Anchorer::new(kg, ntd, cfg.clone()).anchor(text)
}

// ---- interchange format ----------------------------------------------------

/// The anchor JSON schema consumed by the CLI and the matcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AnchorJson {
    pub entities: Vec<AnchorEntityJson>,
    pub triples: Vec<AnchorTripleJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorEntityJson {
    pub id: u32,
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorTripleJson {
    pub head: u32,
    pub relation: RelationKind,
    pub tail: u32,
    pub score: f64,
}

impl From<&AnchorSet> for AnchorJson {
    fn from(set: &AnchorSet) -> Self {
        AnchorJson {
            entities: set
                .entities
                .iter()
                .map(|m| AnchorEntityJson {
                    id: m.entity.0,
                    surface: m.surface.clone(),
                    start: m.char_start,
                    end: m.char_end,
                })
                .collect(),
            triples: set
                .triples
                .iter()
                .map(|c| AnchorTripleJson {
                    head: c.head.entity.0,
                    relation: c.relation,
                    tail: c.tail.entity.0,
                    score: c.final_score,
                })
                .collect(),
        }
    }
}

/// Precomputed anchors keyed by exact text, with a JSONL sidecar format so
/// training runs don't re-anchor every epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnchorCache {
    map: BTreeMap<String, AnchorJson>,
}

#[derive(Serialize, Deserialize)]
struct CacheRow {
    text: String,
    #[serde(flatten)]
    anchors: AnchorJson,
}

impl AnchorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, text: &str) -> Option<&AnchorJson> {
        self.map.get(text)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn insert(&mut self, text: String, anchors: AnchorJson) {
        self.map.insert(text, anchors);
    }

    /// Anchor every text not already cached.
    pub fn ensure_texts<'t>(
        &mut self,
        texts: impl IntoIterator<Item = &'t str>,
        anchorer: &Anchorer,
    ) {
        for text in texts {
            if !self.map.contains_key(text) {
                let set = anchorer.anchor(text);
                self.map.insert(text.to_string(), AnchorJson::from(&set));
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let file = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            file: file.clone(),
            source,
        })?;
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: CacheRow = serde_json::from_str(line).map_err(|e| DataError::Malformed {
                file: file.clone(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            map.insert(row.text, row.anchors);
        }
        Ok(AnchorCache { map })
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let wrap = |source| DataError::Io {
            file: path.display().to_string(),
            source,
        };
        let mut out = fs::File::create(path).map_err(wrap)?;
        for (text, anchors) in &self.map {
            let row = CacheRow { text: text.clone(), anchors: anchors.clone() };
            writeln!(out, "{}", serde_json::to_string(&row).expect("cache row serializes"))
                .map_err(wrap)?;
        }
        Ok(())
    }
}
