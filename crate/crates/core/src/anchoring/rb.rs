//! Rule-based candidate scoring: a logistic over a small fixed feature set
//! with weights shipped as data so they can be retuned without a rebuild.

use serde::{Deserialize, Serialize};

use super::candidates::TripleCandidate;
use super::tokenize::TokenSpan;
use crate::kg::RelationKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbWeights {
    pub bias: f64,
    /// Token gap between the two mention spans, bucketed `<=2`, `<=5`, `>5`.
    pub dist_le2: f64,
    pub dist_le5: f64,
    pub dist_gt5: f64,
    pub rel_has_operation: f64,
    pub rel_component_of: f64,
    pub rel_synonym: f64,
    pub rel_hypernym_hyponym: f64,
    pub head_precedes_tail: f64,
    pub negation_adjacent_tail: f64,
    /// Applied once per token across both mentions.
    pub mention_len_sum: f64,
    pub negation_tokens: Vec<String>,
}

impl Default for RbWeights {
    fn default() -> Self {
        RbWeights {
            bias: -0.25,
            dist_le2: 0.9,
            dist_le5: 0.15,
            dist_gt5: -0.9,
            rel_has_operation: 0.25,
            rel_component_of: 0.25,
            rel_synonym: 0.0,
            rel_hypernym_hyponym: 0.0,
            head_precedes_tail: -0.1,
            negation_adjacent_tail: -0.3,
            mention_len_sum: 0.05,
            negation_tokens: [
                "not", "no", "cannot", "can't", "never", "don't", "doesn't", "didn't", "won't",
                "without",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl RbWeights {
    pub fn zeros() -> Self {
        RbWeights {
            bias: 0.0,
            dist_le2: 0.0,
            dist_le5: 0.0,
            dist_gt5: 0.0,
            rel_has_operation: 0.0,
            rel_component_of: 0.0,
            rel_synonym: 0.0,
            rel_hypernym_hyponym: 0.0,
            head_precedes_tail: 0.0,
            negation_adjacent_tail: 0.0,
            mention_len_sum: 0.0,
            negation_tokens: Vec::new(),
        }
    }
}

/// Token gap between the nearer edges of the two spans (0 when adjacent).
fn span_gap(cand: &TripleCandidate) -> usize {
    let (first, second) = if cand.head.token_start <= cand.tail.token_start {
        (&cand.head, &cand.tail)
    } else {
        (&cand.tail, &cand.head)
    };
    second.token_start.saturating_sub(first.token_end)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Score in [0,1]; deterministic in (candidate, tokens, weights).
pub fn score_rule_based(
    cand: &TripleCandidate,
    tokens: &[TokenSpan],
    weights: &RbWeights,
) -> f64 {
    let mut z = weights.bias;

    let gap = span_gap(cand);
    z += if gap <= 2 {
        weights.dist_le2
    } else if gap <= 5 {
        weights.dist_le5
    } else {
        weights.dist_gt5
    };

    z += match cand.relation {
        RelationKind::HasOperation => weights.rel_has_operation,
        RelationKind::ComponentOf => weights.rel_component_of,
        RelationKind::Synonym => weights.rel_synonym,
        RelationKind::HypernymHyponym => weights.rel_hypernym_hyponym,
    };

    if cand.head.token_start < cand.tail.token_start {
        z += weights.head_precedes_tail;
    }

    let before = cand.tail.token_start.checked_sub(1).map(|i| &tokens[i]);
    let after = tokens.get(cand.tail.token_end);
    let negated = [before, after].into_iter().flatten().any(|t| {
        let lower = t.text.to_lowercase();
        weights.negation_tokens.iter().any(|n| *n == lower)
    });
    if negated {
        z += weights.negation_adjacent_tail;
    }

    z += weights.mention_len_sum * (cand.head.token_len() + cand.tail.token_len()) as f64;

    logistic(z)
}
