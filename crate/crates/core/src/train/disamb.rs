//! Disambiguation evaluation over labelled candidates, for each ensemble
//! stage: rules alone, rules behind the knowledge-reasoning gate, and the
//! full blend with the neural scorer.

use std::collections::HashMap;

use super::metrics::auc;
use super::DisambExample;
use crate::anchoring::{AnchorConfig, Anchorer, NtdModel, TripleCandidate};
use crate::error::{Error, TrainError};
use crate::kg::KnowledgeGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisambScorer {
    /// Rule-based score only.
    Rb,
    /// Rule-based score, zeroed when the knowledge-reasoning gate fails.
    RbKr,
    /// The deployed ensemble: gate, then 0.3 rule + 0.7 neural.
    RbKrNtd,
}

impl DisambScorer {
    pub fn name(&self) -> &'static str {
        match self {
            DisambScorer::Rb => "rb",
            DisambScorer::RbKr => "rb+kr",
            DisambScorer::RbKrNtd => "rb+kr+ntd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisambEval {
    pub accuracy: f64,
    pub auc: f64,
    pub scored: usize,
    /// Examples whose candidate the pipeline did not produce; they score 0.
    pub skipped: usize,
}

/// Accuracy at threshold 0.5 plus AUC for one scorer configuration.
pub fn evaluate_disambiguation(
    scorer: DisambScorer,
    examples: &[DisambExample],
    kg: &KnowledgeGraph,
    anchor_cfg: &AnchorConfig,
    ntd: Option<&NtdModel>,
) -> Result<DisambEval, Error> {
    if examples.is_empty() {
        return Err(Error::Train(TrainError::EmptyEvalSet));
    }
    if scorer == DisambScorer::RbKrNtd && ntd.is_none() {
        return Err(Error::Train(TrainError::InvalidConfig(
            "rb+kr+ntd evaluation needs a trained ntd model".to_string(),
        )));
    }
    let anchorer = Anchorer::new(
        kg,
        if scorer == DisambScorer::RbKrNtd { ntd } else { None },
        anchor_cfg.clone(),
    );

    let mut per_query: HashMap<&str, Vec<TripleCandidate>> = HashMap::new();
    let mut scored = Vec::with_capacity(examples.len());
    let mut skipped = 0;
    for ex in examples {
        let cands = per_query
            .entry(ex.query.as_str())
            .or_insert_with(|| anchorer.anchor_explained(&ex.query).1);
        let target = cands.iter().find(|c| {
            c.relation == ex.relation
                && c.head.surface.eq_ignore_ascii_case(&ex.head_surface)
                && c.tail.surface.eq_ignore_ascii_case(&ex.tail_surface)
        });
        let score = match target {
            Some(c) => match scorer {
                DisambScorer::Rb => c.rb_score,
                DisambScorer::RbKr => {
                    if c.kr_pass {
                        c.rb_score
                    } else {
                        0.0
                    }
                }
                DisambScorer::RbKrNtd => c.final_score,
            },
            None => {
                skipped += 1;
                0.0
            }
        };
        scored.push((score, ex.label));
    }
    let correct = scored
        .iter()
        .filter(|(s, y)| (*s >= 0.5) == *y)
        .count();
    Ok(DisambEval {
        accuracy: correct as f64 / scored.len() as f64,
        auc: auc(&scored).map_err(Error::Train)?,
        scored: scored.len(),
        skipped,
    })
}
