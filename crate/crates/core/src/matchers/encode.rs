//! Turning (text, anchors) into padded id sequences for the three channels.

use serde::{Deserialize, Serialize};

use super::vocab::Vocab;
use super::{MaxLens, NULL_ID, PAD_ID};
use crate::anchoring::{tokenize, AnchorJson, AnchorSet, TokenizeMode};
use crate::kg::{EntityId, RelationKind};

/// The order-preserving slice of an anchor set the matcher consumes:
/// normalized entity ids and the has_operation triples.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnchorView {
    pub entity_ids: Vec<EntityId>,
    pub op_triples: Vec<(EntityId, RelationKind, EntityId)>,
}

impl From<&AnchorSet> for AnchorView {
    fn from(set: &AnchorSet) -> Self {
        AnchorView {
            entity_ids: set.entities.iter().map(|m| m.entity).collect(),
            op_triples: set
                .triples
                .iter()
                .filter(|c| c.relation == RelationKind::HasOperation)
                .map(|c| (c.head.entity, c.relation, c.tail.entity))
                .collect(),
        }
    }
}

impl From<&AnchorJson> for AnchorView {
    fn from(json: &AnchorJson) -> Self {
        AnchorView {
            entity_ids: json.entities.iter().map(|e| EntityId(e.id)).collect(),
            op_triples: json
                .triples
                .iter()
                .filter(|t| t.relation == RelationKind::HasOperation)
                .map(|t| (EntityId(t.head), t.relation, EntityId(t.tail)))
                .collect(),
        }
    }
}

/// One side's channel ids, zero-padded to the configured maxima with the
/// real lengths alongside. The models only ever read `ids[..len]` (or the
/// null placeholder when a channel is empty), which is what makes padding
/// inert.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelizedInput {
    pub tokens: Vec<u32>,
    pub entities: Vec<u32>,
    pub triples: Vec<[u32; 3]>,
    pub token_len: usize,
    pub entity_len: usize,
    pub triple_len: usize,
    pub truncated: bool,
}

impl ChannelizedInput {
    pub fn effective_tokens(&self) -> Vec<usize> {
        if self.token_len == 0 {
            vec![NULL_ID as usize]
        } else {
            self.tokens[..self.token_len].iter().map(|&i| i as usize).collect()
        }
    }

    pub fn effective_entities(&self) -> Vec<usize> {
        if self.entity_len == 0 {
            vec![NULL_ID as usize]
        } else {
            self.entities[..self.entity_len].iter().map(|&i| i as usize).collect()
        }
    }

    /// Head, relation, and tail row sequences; the empty channel degrades to
    /// a single all-null triple.
    pub fn effective_triples(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        if self.triple_len == 0 {
            let null = vec![NULL_ID as usize];
            return (null.clone(), null.clone(), null);
        }
        let live = &self.triples[..self.triple_len];
        (
            live.iter().map(|t| t[0] as usize).collect(),
            live.iter().map(|t| t[1] as usize).collect(),
            live.iter().map(|t| t[2] as usize).collect(),
        )
    }
}

fn encode_side(
    text: &str,
    anchors: &AnchorView,
    vocab: &Vocab,
    max_lens: &MaxLens,
    mode: TokenizeMode,
) -> ChannelizedInput {
    let mut truncated = false;

    let spans = tokenize(text, mode);
    let mut token_ids: Vec<u32> = spans.iter().map(|s| vocab.token_id(&s.text)).collect();
    if token_ids.len() > max_lens.tokens {
        token_ids.truncate(max_lens.tokens);
        truncated = true;
    }
    let token_len = token_ids.len();
    token_ids.resize(max_lens.tokens, PAD_ID);

    let mut entity_ids: Vec<u32> = anchors.entity_ids.iter().map(|&e| vocab.entity_row(e)).collect();
    if entity_ids.len() > max_lens.entities {
        entity_ids.truncate(max_lens.entities);
        truncated = true;
    }
    let entity_len = entity_ids.len();
    entity_ids.resize(max_lens.entities, PAD_ID);

    let mut triple_ids: Vec<[u32; 3]> = anchors
        .op_triples
        .iter()
        .map(|&(h, r, t)| [vocab.entity_row(h), vocab.relation_row(r), vocab.entity_row(t)])
        .collect();
    if triple_ids.len() > max_lens.triples {
        triple_ids.truncate(max_lens.triples);
        truncated = true;
    }
    let triple_len = triple_ids.len();
    triple_ids.resize(max_lens.triples, [PAD_ID; 3]);

    ChannelizedInput {
        tokens: token_ids,
        entities: entity_ids,
        triples: triple_ids,
        token_len,
        entity_len,
        triple_len,
        truncated,
    }
}

/// Encode both sides of a pair.
pub fn encode_channels(
    query: &str,
    title: &str,
    anchors_q: &AnchorView,
    anchors_d: &AnchorView,
    vocab: &Vocab,
    max_lens: &MaxLens,
    mode: TokenizeMode,
) -> (ChannelizedInput, ChannelizedInput) {
    (
        encode_side(query, anchors_q, vocab, max_lens, mode),
        encode_side(title, anchors_d, vocab, max_lens, mode),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Entity, KnowledgeGraph};

    fn vocab() -> Vocab {
        let kg = KnowledgeGraph::from_parts(
            vec![
                Entity::new(1, "wechat", &[], "app"),
                Entity::new(2, "friend", &[], "component"),
                Entity::new(3, "delete", &[], "operation"),
            ],
            vec![],
        )
        .unwrap();
        Vocab::build(&kg, ["how to delete friend"], TokenizeMode::Whitespace)
    }

    #[test]
    fn empty_triple_channel_uses_null_placeholder() {
        let v = vocab();
        let lens = MaxLens::default();
        let anchors = AnchorView::default();
        let (q, _) = encode_channels(
            "how to delete",
            "x",
            &anchors,
            &anchors,
            &v,
            &lens,
            TokenizeMode::Whitespace,
        );
        assert_eq!(q.triple_len, 0);
        let (h, r, t) = q.effective_triples();
        assert_eq!((h, r, t), (vec![1], vec![1], vec![1]));
        assert_eq!(q.entity_len, 0);
        assert_eq!(q.effective_entities(), vec![NULL_ID as usize]);
    }

    #[test]
    fn unseen_token_maps_to_unk() {
        let v = vocab();
        let lens = MaxLens::default();
        let anchors = AnchorView::default();
        let (q, _) = encode_channels(
            "how to zap",
            "x",
            &anchors,
            &anchors,
            &v,
            &lens,
            TokenizeMode::Whitespace,
        );
        assert_eq!(q.tokens[2], super::super::UNK_ID);
        assert_ne!(q.tokens[0], super::super::UNK_ID);
    }

    #[test]
    fn truncation_from_the_right_flags() {
        let v = vocab();
        let lens = MaxLens { tokens: 3, entities: 16, triples: 8 };
        let anchors = AnchorView::default();
        let (q, _) = encode_channels(
            "one two three four five",
            "x",
            &anchors,
            &anchors,
            &v,
            &lens,
            TokenizeMode::Whitespace,
        );
        assert!(q.truncated);
        assert_eq!(q.token_len, 3);
        assert_eq!(q.tokens.len(), 3);
    }

    #[test]
    fn entities_in_position_order_with_padding() {
        let v = vocab();
        let lens = MaxLens::default();
        let anchors = AnchorView {
            entity_ids: vec![EntityId(3), EntityId(1), EntityId(2)],
            op_triples: vec![(EntityId(2), RelationKind::HasOperation, EntityId(3))],
        };
        let (q, _) = encode_channels(
            "delete wechat friend",
            "x",
            &anchors,
            &AnchorView::default(),
            &v,
            &lens,
            TokenizeMode::Whitespace,
        );
        assert_eq!(q.entity_len, 3);
        assert_eq!(
            &q.entities[..3],
            &[v.entity_row(EntityId(3)), v.entity_row(EntityId(1)), v.entity_row(EntityId(2))]
        );
        assert!(q.entities[3..].iter().all(|&x| x == PAD_ID));
        assert_eq!(q.triple_len, 1);
        assert_eq!(
            q.triples[0],
            [
                v.entity_row(EntityId(2)),
                v.relation_row(RelationKind::HasOperation),
                v.entity_row(EntityId(3))
            ]
        );
    }
}
