//! Query anchoring: locate KG entities in a text by forward maximum
//! matching, propose triple candidates between them, and keep the ones a
//! three-part ensemble (rules, knowledge reasoning, neural disambiguation)
//! scores above threshold.

pub mod candidates;
mod fmm;
mod ntd;
mod pipeline;
mod rb;
mod tokenize;

pub use candidates::{
    filter_knowledge_reasoning, generate_triple_candidates, TripleCandidate, CANDIDATE_RELATIONS,
};
pub use fmm::{extract_entities_fmm, extract_with_dict, EntityMention, FmmDict};
pub use ntd::{ntd_features, score_neural, NtdFeatureBag, NtdModel, NTD_MODEL_KIND};
pub use pipeline::{
    anchor, combine_scores, AnchorCache, AnchorConfig, AnchorEntityJson, AnchorJson, AnchorSet,
    AnchorTripleJson, Anchorer,
};
pub use rb::{score_rule_based, RbWeights};
pub use tokenize::{tokenize, TokenSpan, TokenizeMode};
