//! Neural triple disambiguation: a bag of sparse features per candidate,
//! embedded through a hashed table, averaged, and squashed by a linear layer
//! with a logistic output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kanchor_tensor::{checkpoint, fnv1a64, Graph64, ParameterSet64, Rng};

use super::candidates::TripleCandidate;
use super::fmm::EntityMention;
use super::tokenize::TokenSpan;
use crate::error::{Error, KgError};
use crate::kg::EntityId;

/// Sparse features describing one candidate in its query context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtdFeatureBag {
    /// Case-folded token surfaces.
    pub tokens: Vec<String>,
    /// Identity of the target triple.
    pub target: String,
    /// Exactly two bucketed signed distances per token: to the head span and
    /// to the tail span.
    pub positions: Vec<(String, String)>,
    /// (other head, target head) for every other candidate sharing the
    /// target's tail entity under the same relation.
    pub conflict_entities: Vec<(EntityId, EntityId)>,
    /// Triple keys of every other candidate sharing at least one entity with
    /// the target.
    pub conflict_triples: Vec<String>,
}

impl NtdFeatureBag {
    /// Flatten into hashable feature strings, each namespaced by kind.
    pub fn feature_strings(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(3 * self.tokens.len() + 4);
        for t in &self.tokens {
            out.push(format!("w:{t}"));
        }
        out.push(format!("t:{}", self.target));
        for (h, t) in &self.positions {
            out.push(format!("ph:{h}"));
            out.push(format!("pt:{t}"));
        }
        for (a, c) in &self.conflict_entities {
            out.push(format!("ce:{a}|{c}"));
        }
        for key in &self.conflict_triples {
            out.push(format!("ct:{key}"));
        }
        out
    }
}

fn triple_key_string(cand: &TripleCandidate) -> String {
    format!("{}|{}|{}", cand.head.entity, cand.relation, cand.tail.entity)
}

/// Signed token distance from token `k` to a mention: negative before the
/// span, 0 inside it, positive after.
fn signed_distance(k: usize, mention: &EntityMention) -> i64 {
    if k < mention.token_start {
        k as i64 - mention.token_start as i64
    } else if k >= mention.token_end {
        k as i64 - (mention.token_end as i64 - 1)
    } else {
        0
    }
}

/// Buckets 0, 1, 2, 3-5, 6+, signed.
fn distance_bucket(d: i64) -> String {
    if d == 0 {
        return "0".to_string();
    }
    let sign = if d < 0 { '-' } else { '+' };
    let a = d.unsigned_abs();
    let mag = match a {
        1 => "1",
        2 => "2",
        3..=5 => "3-5",
        _ => "6+",
    };
    format!("{sign}{mag}")
}

/// Build the feature bag for `cand` against the full candidate set of its
/// query. `cand` must be one of `all_cands`.
pub fn ntd_features(
    cand: &TripleCandidate,
    tokens: &[TokenSpan],
    all_cands: &[TripleCandidate],
) -> NtdFeatureBag {
    let tokens_lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let positions = (0..tokens.len())
        .map(|k| {
            (
                distance_bucket(signed_distance(k, &cand.head)),
                distance_bucket(signed_distance(k, &cand.tail)),
            )
        })
        .collect();

    let mut conflict_entities = Vec::new();
    let mut conflict_triples = Vec::new();
    for other in all_cands {
        if other.same_candidate(cand) {
            continue;
        }
        if other.relation == cand.relation
            && other.tail.entity == cand.tail.entity
            && other.head.entity != cand.head.entity
        {
            conflict_entities.push((other.head.entity, cand.head.entity));
        }
        if other.shares_entity_with(cand) {
            conflict_triples.push(triple_key_string(other));
        }
    }

    NtdFeatureBag {
        tokens: tokens_lower,
        target: triple_key_string(cand),
        positions,
        conflict_entities,
        conflict_triples,
    }
}

/// Hashed-vocabulary averaged-embedding classifier. Collisions are allowed
/// by construction; determinism comes from FNV hashing and seeded init.
#[derive(Debug, Clone)]
pub struct NtdModel {
    pub params: ParameterSet64,
    pub buckets: usize,
    pub dim: usize,
}

pub const NTD_MODEL_KIND: &str = "ntd";

impl NtdModel {
    /// All-zero parameters: scores 0.5 for any bag.
    pub fn zeros(buckets: usize, dim: usize) -> Self {
        let mut params = ParameterSet64::new();
        params.add_zeros("emb", vec![buckets, dim]).expect("fresh set");
        params.add_zeros("w", vec![dim, 1]).expect("fresh set");
        params.add_zeros("b", vec![1, 1]).expect("fresh set");
        NtdModel { params, buckets, dim }
    }

    /// Random embeddings, zero linear layer (so an untrained model still
    /// scores 0.5 everywhere).
    pub fn init(buckets: usize, dim: usize, rng: &mut Rng) -> Self {
        let mut model = Self::zeros(buckets, dim);
        let mut params = ParameterSet64::new();
        params
            .add_uniform("emb", vec![buckets, dim], dim, rng)
            .expect("fresh set");
        params.add_zeros("w", vec![dim, 1]).expect("fresh set");
        params.add_zeros("b", vec![1, 1]).expect("fresh set");
        model.params = params;
        model
    }

    pub fn bucket_ids(&self, bag: &NtdFeatureBag) -> Vec<usize> {
        bag.feature_strings()
            .iter()
            .map(|f| (fnv1a64(f.as_bytes()) % self.buckets as u64) as usize)
            .collect()
    }

    /// Build the forward pass on an existing tape and return the probability
    /// node; shared by scoring and training.
    pub(crate) fn forward(
        &self,
        graph: &mut Graph64,
        params: &ParameterSet64,
        bag: &NtdFeatureBag,
    ) -> kanchor_tensor::Result<kanchor_tensor::NodeId> {
        let ids = self.bucket_ids(bag);
        let table = graph.param(params, "emb")?;
        let w = graph.param(params, "w")?;
        let b = graph.param(params, "b")?;
        let looked = graph.embedding_lookup(table, &ids)?;
        let avg = graph.mean_rows(looked)?;
        let lin = graph.matmul(avg, w)?;
        let z = graph.add_bias(lin, b)?;
        Ok(graph.logistic(z))
    }

    pub fn score(&self, bag: &NtdFeatureBag) -> f64 {
        let mut graph = Graph64::new();
        let p = self
            .forward(&mut graph, &self.params, bag)
            .expect("ntd forward on own parameters");
        graph.scalar_value(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let hash = fnv1a64(format!("ntd:{}:{}", self.buckets, self.dim).as_bytes());
        checkpoint::save(path, NTD_MODEL_KIND, hash, &self.params).map_err(Error::Tensor)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let (header, params) = checkpoint::load::<f64>(path).map_err(Error::Tensor)?;
        if header.model_kind != NTD_MODEL_KIND {
            return Err(Error::Kg(KgError::Parse {
                file: path.display().to_string(),
                line: 0,
                msg: format!("checkpoint holds a \"{}\" model, expected \"ntd\"", header.model_kind),
            }));
        }
        let emb_shape = params.get("emb").map_err(Error::Tensor)?.shape().to_vec();
        Ok(NtdModel { params, buckets: emb_shape[0], dim: emb_shape[1] })
    }
}

/// Score a feature bag with a trained model.
pub fn score_neural(bag: &NtdFeatureBag, model: &NtdModel) -> f64 {
    model.score(bag)
}
