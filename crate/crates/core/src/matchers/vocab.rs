//! Embedding-table row assignment. Token rows come from the training split
//! only; entity rows enumerate the whole KG (it is fixed data, not learned
//! from the split) followed by one row per relation so triple components can
//! share the entity table.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{NULL_ID, UNK_ID};
use crate::anchoring::{tokenize, TokenizeMode};
use crate::kg::{EntityId, KnowledgeGraph, RelationKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    token_ids: BTreeMap<String, u32>,
    entity_ids: BTreeMap<u32, u32>,
    relation_rows: [u32; 4],
    token_rows: usize,
    entity_rows: usize,
}

impl Vocab {
    /// `train_texts` must come from the training split only; tokens are
    /// case-folded before assignment, in sorted order for determinism.
    pub fn build<'a>(
        kg: &KnowledgeGraph,
        train_texts: impl IntoIterator<Item = &'a str>,
        mode: TokenizeMode,
    ) -> Self {
        let mut uniq: BTreeSet<String> = BTreeSet::new();
        for text in train_texts {
            for span in tokenize(text, mode) {
                uniq.insert(span.text.to_lowercase());
            }
        }
        let mut token_ids = BTreeMap::new();
        let mut next = UNK_ID + 1;
        for tok in uniq {
            token_ids.insert(tok, next);
            next += 1;
        }
        let token_rows = next as usize;

        let mut entity_ids = BTreeMap::new();
        let mut row = NULL_ID + 1;
        for entity in kg.entities() {
            entity_ids.insert(entity.id.0, row);
            row += 1;
        }
        let mut relation_rows = [0u32; 4];
        for (i, _) in RelationKind::ALL.iter().enumerate() {
            relation_rows[i] = row;
            row += 1;
        }
        Vocab {
            token_ids,
            entity_ids,
            relation_rows,
            token_rows,
            entity_rows: row as usize,
        }
    }

    pub fn token_id(&self, token: &str) -> u32 {
        self.token_ids
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(UNK_ID)
    }

    pub fn entity_row(&self, id: EntityId) -> u32 {
        self.entity_ids.get(&id.0).copied().unwrap_or(NULL_ID)
    }

    pub fn relation_row(&self, rel: RelationKind) -> u32 {
        let idx = RelationKind::ALL
            .iter()
            .position(|r| *r == rel)
            .expect("relation in closed set");
        self.relation_rows[idx]
    }

    /// Rows in the token embedding table (pad + null + unk + tokens).
    pub fn token_rows(&self) -> usize {
        self.token_rows
    }

    /// Rows in the entity embedding table (pad + null + entities + relations).
    pub fn entity_rows(&self) -> usize {
        self.entity_rows
    }
}
