//! Multi-channel query-title matching. Each input side carries three
//! parallel sequences — tokens, anchored entities, anchored has_operation
//! triples — matched channel-by-channel with one of three feature
//! extractors, then fused by a two-layer MLP into a three-way label.

mod arc1;
mod encode;
mod fuse;
mod iwan;
mod matchpyramid;
mod model;
mod vocab;

pub use arc1::{arc1_features, arc1_feature_dim, ARC1_WINDOW};
pub use encode::{encode_channels, AnchorView, ChannelizedInput};
pub use fuse::{cross_entropy_loss, fuse_and_classify, fusion_hidden};
pub use iwan::{iwan_features, iwan_feature_dim, orthogonal_decompose};
pub use matchpyramid::{matchpyramid_features, matchpyramid_feature_dim, MP_POOL_GRID};
pub use model::{MatcherMeta, MatcherModel, MATCHER_FORMAT};
pub use vocab::Vocab;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Reserved padding row in every embedding table.
pub const PAD_ID: u32 = 0;
/// Learned placeholder for an empty channel.
pub const NULL_ID: u32 = 1;
/// Out-of-vocabulary tokens at inference time.
pub const UNK_ID: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Arc1,
    MatchPyramid,
    Iwan,
}

impl ArchKind {
    pub const ALL: [ArchKind; 3] = [ArchKind::Arc1, ArchKind::MatchPyramid, ArchKind::Iwan];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArchKind::Arc1 => "arc1",
            ArchKind::MatchPyramid => "matchpyramid",
            ArchKind::Iwan => "iwan",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ArchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arc1" => Ok(ArchKind::Arc1),
            "matchpyramid" => Ok(ArchKind::MatchPyramid),
            "iwan" => Ok(ArchKind::Iwan),
            other => Err(format!("unknown architecture \"{other}\" (arc1|matchpyramid|iwan)")),
        }
    }
}

/// Which channels feed the fusion layer. Disabled channels contribute zero
/// vectors of unchanged width, so checkpoints stay layout-compatible across
/// ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelSet {
    pub token: bool,
    pub entity: bool,
    pub triple: bool,
}

impl ChannelSet {
    pub fn all() -> Self {
        ChannelSet { token: true, entity: true, triple: true }
    }

    pub fn token_only() -> Self {
        ChannelSet { token: true, entity: false, triple: false }
    }

    pub fn any(&self) -> bool {
        self.token || self.entity || self.triple
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.token {
            out.push("token");
        }
        if self.entity {
            out.push("entity");
        }
        if self.triple {
            out.push("triple");
        }
        out
    }

    pub fn label(&self) -> String {
        if self.names().is_empty() {
            "none".to_string()
        } else {
            self.names().join("+")
        }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, String> {
        let mut set = ChannelSet { token: false, entity: false, triple: false };
        for name in names {
            match name.as_ref() {
                "token" => set.token = true,
                "entity" => set.entity = true,
                "triple" => set.triple = true,
                other => return Err(format!("unknown channel \"{other}\" (token|entity|triple)")),
            }
        }
        Ok(set)
    }
}

impl Serialize for ChannelSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.names().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ChannelSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        ChannelSet::from_names(&names).map_err(serde::de::Error::custom)
    }
}

/// Model widths. `embed` is the input embedding size, `filters` the CNN
/// filter count, `hidden` both the recurrent state size and the fusion MLP
/// hidden size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub embed: usize,
    pub filters: usize,
    pub hidden: usize,
}

impl Dims {
    /// Production defaults: 128-wide embeddings for the CNN models, 256 for
    /// the recurrent one, 256 filters, 128 hidden units.
    pub fn default_for(arch: ArchKind) -> Self {
        Dims {
            embed: match arch {
                ArchKind::Iwan => 256,
                _ => 128,
            },
            filters: 256,
            hidden: 128,
        }
    }
}

/// Per-channel sequence caps; longer inputs truncate from the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxLens {
    pub tokens: usize,
    pub entities: usize,
    pub triples: usize,
}

impl Default for MaxLens {
    fn default() -> Self {
        MaxLens { tokens: 32, entities: 16, triples: 8 }
    }
}

/// Per-channel and fused similarity features of one pair, extracted for
/// inspection and structural tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityFeatures {
    pub f_w: Vec<f64>,
    pub f_e: Vec<f64>,
    pub f_t: Vec<f64>,
}

impl SimilarityFeatures {
    pub fn fused(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.f_w.len() + self.f_e.len() + self.f_t.len());
        out.extend_from_slice(&self.f_w);
        out.extend_from_slice(&self.f_e);
        out.extend_from_slice(&self.f_t);
        out
    }
}

/// Softmax output over the three labels plus its argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPrediction {
    pub probs: [f64; 3],
    pub label: usize,
}

impl MatchPrediction {
    pub fn from_probs(probs: [f64; 3]) -> Self {
        let label = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probs"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        MatchPrediction { probs, label }
    }
}
