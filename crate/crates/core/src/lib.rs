//! Knowledge-anchored FAQ matching.
//!
//! A FAQ retrieval engine that pins the core semantics of user queries and
//! document titles to a domain knowledge graph before matching them:
//!
//! - [`kg`] loads and indexes the graph (entities, four relation types,
//!   triples) with alias lookup, synonym normalization, and part-of
//!   reachability.
//! - [`anchoring`] extracts knowledge anchors from a text: entity mentions
//!   via forward maximum matching, then triple candidates kept or dropped by
//!   a rule-based scorer, a knowledge-reasoning gate, and a neural
//!   disambiguator blended 0.3/0.7.
//! - [`matchers`] scores query-title pairs over three parallel channels
//!   (tokens, entities, triples) with a choice of siamese-CNN,
//!   interaction-matrix, or alignment-decomposition feature extractors fused
//!   by a small MLP into three labels: unrelated, related, similar.
//! - [`train`] holds dataset handling, the training loops, metrics, and the
//!   channel-ablation harness.
//! - [`synth`] generates the committed desk-scale corpus: a software-support
//!   toy KG plus disambiguation and matching datasets with known structure.

pub mod anchoring;
mod error;
pub mod kg;
pub mod matchers;
pub mod synth;
pub mod train;

pub use error::{DataError, Error, KgError, Result, TrainError};
