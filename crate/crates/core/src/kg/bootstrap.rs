//! Pattern-based triple bootstrapping over a raw corpus with count features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{KnowledgeGraph, RelationKind, Triple};
use crate::anchoring::{extract_with_dict, tokenize, FmmDict, TokenizeMode};

/// A two-slot template: `<slot> infix <slot>` over entity mentions. The
/// literal infix must match the tokens between the two mentions exactly
/// (case-folded); `"*"` matches any gap, including an empty one. `head_first`
/// says whether the first slot in text order becomes the triple's head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pattern {
    pub relation: RelationKind,
    pub infix: String,
    pub head_first: bool,
}

impl Pattern {
    fn infix_matches(&self, gap: &[String]) -> bool {
        if self.infix == "*" {
            return true;
        }
        let want: Vec<&str> = self.infix.split_whitespace().collect();
        if want.len() != gap.len() {
            return false;
        }
        want.iter()
            .zip(gap)
            .all(|(w, g)| w.eq_ignore_ascii_case(g) || w.to_lowercase() == g.to_lowercase())
    }
}

/// Instantiate every pattern against every corpus line and count matches.
/// Both slots must resolve to KG entities (via FMM over the line); emitted
/// triples use normalized entity ids. Results are sorted by descending
/// count, ties by (head id, tail id).
pub fn bootstrap_triples(
    corpus: &[String],
    patterns: &[Pattern],
    kg: &KnowledgeGraph,
) -> Vec<(Triple, usize)> {
    let mut counts: BTreeMap<(super::EntityId, RelationKind, super::EntityId), usize> =
        BTreeMap::new();
    if patterns.is_empty() {
        return Vec::new();
    }
    let dict = FmmDict::build(kg, TokenizeMode::Whitespace);
    for line in corpus {
        let tokens = tokenize(line, TokenizeMode::Whitespace);
        let mentions = extract_with_dict(&tokens, &dict, kg);
        for i in 0..mentions.len() {
            for j in i + 1..mentions.len() {
                let gap: Vec<String> = tokens[mentions[i].token_end..mentions[j].token_start]
                    .iter()
                    .map(|t| t.text.to_lowercase())
                    .collect();
                for pattern in patterns {
                    if !pattern.infix_matches(&gap) {
                        continue;
                    }
                    let (head, tail) = if pattern.head_first {
                        (mentions[i].entity, mentions[j].entity)
                    } else {
                        (mentions[j].entity, mentions[i].entity)
                    };
                    *counts.entry((head, pattern.relation, tail)).or_default() += 1;
                }
            }
        }
    }
    let mut ranked: Vec<(Triple, usize)> = counts
        .into_iter()
        .map(|((head, relation, tail), count)| {
            (Triple { head, relation, tail, confidence: 1.0 }, count)
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(a.0.head.cmp(&b.0.head))
            .then(a.0.tail.cmp(&b.0.tail))
            .then(a.0.relation.cmp(&b.0.relation))
    });
    ranked
}
