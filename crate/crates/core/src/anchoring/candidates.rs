//! Triple candidate generation and the knowledge-reasoning filter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fmm::EntityMention;
use crate::kg::{EntityId, KnowledgeGraph, RelationKind};

/// Relations considered during candidate generation. Synonym and
/// hypernym/hyponym edges exist for normalization and generalization, not as
/// assertions a text can express, so they never become candidates.
pub const CANDIDATE_RELATIONS: [RelationKind; 2] =
    [RelationKind::HasOperation, RelationKind::ComponentOf];

/// A head/tail mention pair whose normalized triple exists in the KG, plus
/// the ensemble's scores. `final_score` is 0 unless the knowledge-reasoning
/// gate passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleCandidate {
    pub head: EntityMention,
    pub tail: EntityMention,
    pub relation: RelationKind,
    pub rb_score: f64,
    pub ntd_score: f64,
    pub kr_pass: bool,
    pub final_score: f64,
}

impl TripleCandidate {
    /// Candidate identity within one text: the two spans plus the relation.
    pub fn same_candidate(&self, other: &TripleCandidate) -> bool {
        self.relation == other.relation
            && self.head.same_span(&other.head)
            && self.tail.same_span(&other.tail)
    }

    pub fn triple_key(&self) -> (EntityId, RelationKind, EntityId) {
        (self.head.entity, self.relation, self.tail.entity)
    }

    pub fn shares_entity_with(&self, other: &TripleCandidate) -> bool {
        let mine = [self.head.entity, self.tail.entity];
        mine.contains(&other.head.entity) || mine.contains(&other.tail.entity)
    }
}

/// Emit a candidate for every ordered mention pair and candidate relation
/// whose normalized triple exists in the KG. Scores start at zero with the
/// KR gate open.
pub fn generate_triple_candidates(
    mentions: &[EntityMention],
    kg: &KnowledgeGraph,
) -> Vec<TripleCandidate> {
    let mut out = Vec::new();
    for head in mentions {
        for tail in mentions {
            if head.same_span(tail) {
                continue;
            }
            for relation in CANDIDATE_RELATIONS {
                if kg.has_triple_normalized(head.entity, relation, tail.entity) {
                    out.push(TripleCandidate {
                        head: head.clone(),
                        tail: tail.clone(),
                        relation,
                        rb_score: 0.0,
                        ntd_score: 0.0,
                        kr_pass: true,
                        final_score: 0.0,
                    });
                }
            }
        }
    }
    out.sort_by_key(|c| (c.head.token_start, c.tail.token_start, c.relation));
    out
}

/// Part-whole gate: when two candidates assert the same relation on the same
/// tail mention with different heads, and head Y is a component ancestor of
/// head X, the Y-headed candidate is marked `kr_pass = false` — the more
/// specific component wins. Nothing is removed, only flags change.
pub fn filter_knowledge_reasoning(
    mut cands: Vec<TripleCandidate>,
    kg: &KnowledgeGraph,
) -> Vec<TripleCandidate> {
    let mut ancestors: BTreeMap<EntityId, std::collections::BTreeSet<EntityId>> = BTreeMap::new();
    for cand in &cands {
        ancestors
            .entry(cand.head.entity)
            .or_insert_with(|| kg.component_ancestors(cand.head.entity).unwrap_or_default());
    }
    let mut demote = vec![false; cands.len()];
    for (i, a) in cands.iter().enumerate() {
        for (j, b) in cands.iter().enumerate() {
            if i == j
                || a.relation != b.relation
                || !a.tail.same_span(&b.tail)
                || a.head.same_span(&b.head)
            {
                continue;
            }
            // b's head is an ancestor of a's head -> demote b
            if ancestors[&a.head.entity].contains(&b.head.entity) {
                demote[j] = true;
            }
        }
    }
    for (cand, flag) in cands.iter_mut().zip(demote) {
        if flag {
            cand.kr_pass = false;
        }
    }
    cands
}
