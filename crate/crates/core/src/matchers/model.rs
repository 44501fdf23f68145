//! The assembled matcher: embedding tables, per-channel feature extractors
//! (architecture-shared, parameter-separate), and the fusion classifier,
//! with checkpoint + sidecar persistence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kanchor_tensor::{checkpoint, fnv1a64, Graph64, NodeId, ParameterSet64, Rng};

use super::arc1::{arc1_feature_dim, arc1_features, arc1_init_params};
use super::encode::{encode_channels, AnchorView, ChannelizedInput};
use super::fuse::{fuse_and_classify, fuse_init_params};
use super::iwan::{iwan_feature_dim, iwan_features, iwan_init_params};
use super::matchpyramid::{
    matchpyramid_feature_dim, matchpyramid_features, matchpyramid_init_params,
};
use super::vocab::Vocab;
use super::{ArchKind, ChannelSet, Dims, MatchPrediction, MaxLens, SimilarityFeatures};
use crate::anchoring::TokenizeMode;
use crate::error::{DataError, Error};

pub const MATCHER_FORMAT: u32 = 1;


/// Everything needed to rebuild a matcher around its checkpoint: written as
/// a JSON sidecar next to the tensor file, hashed into the checkpoint
/// header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherMeta {
    pub format: u32,
    pub arch: ArchKind,
    pub channels: ChannelSet,
    pub dims: Dims,
    pub max_lens: MaxLens,
    pub tokenize_mode: TokenizeMode,
    pub vocab: Vocab,
}

#[derive(Debug, Clone)]
pub struct MatcherModel {
    pub arch: ArchKind,
    pub channels: ChannelSet,
    pub dims: Dims,
    pub max_lens: MaxLens,
    pub tokenize_mode: TokenizeMode,
    pub vocab: Vocab,
    pub params: ParameterSet64,
}

impl MatcherModel {
    /// Fresh parameters from a seed. Creation order is fixed, so a given
    /// (config, vocab, seed) always produces identical bytes.
    pub fn init(
        arch: ArchKind,
        channels: ChannelSet,
        dims: Dims,
        max_lens: MaxLens,
        tokenize_mode: TokenizeMode,
        vocab: Vocab,
        seed: u64,
    ) -> Result<Self, Error> {
        let mut rng = Rng::new(seed ^ fnv1a64(b"matcher-init"));
        let mut params = ParameterSet64::new();
        if channels.token {
            params
                .add_uniform("tok.emb", vec![vocab.token_rows(), dims.embed], dims.embed, &mut rng)
                .map_err(Error::Tensor)?;
        }
        if channels.entity || channels.triple {
            params
                .add_uniform(
                    "ent.emb",
                    vec![vocab.entity_rows(), dims.embed],
                    dims.embed,
                    &mut rng,
                )
                .map_err(Error::Tensor)?;
        }
        for (enabled, prefix) in [
            (channels.token, "tok"),
            (channels.entity, "ent"),
            (channels.triple, "tri"),
        ] {
            if !enabled {
                continue;
            }
            match arch {
                ArchKind::Arc1 => arc1_init_params(&mut params, prefix, &dims, &mut rng),
                ArchKind::MatchPyramid => {
                    matchpyramid_init_params(&mut params, prefix, &dims, &mut rng)
                }
                ArchKind::Iwan => iwan_init_params(&mut params, prefix, &dims, &mut rng),
            }
            .map_err(Error::Tensor)?;
        }
        let input_dim = 3 * channel_feature_dim(arch, &dims);
        fuse_init_params(&mut params, input_dim, &dims, &mut rng).map_err(Error::Tensor)?;
        Ok(MatcherModel { arch, channels, dims, max_lens, tokenize_mode, vocab, params })
    }

    pub fn channel_feature_dim(&self) -> usize {
        channel_feature_dim(self.arch, &self.dims)
    }

    pub fn meta(&self) -> MatcherMeta {
        MatcherMeta {
            format: MATCHER_FORMAT,
            arch: self.arch,
            channels: self.channels,
            dims: self.dims,
            max_lens: self.max_lens,
            tokenize_mode: self.tokenize_mode,
            vocab: self.vocab.clone(),
        }
    }

    pub fn config_hash(&self) -> u64 {
        let json = serde_json::to_string(&self.meta()).expect("meta serializes");
        fnv1a64(json.as_bytes())
    }

    /// Encode a pair against this model's vocab and length limits.
    pub fn encode(
        &self,
        query: &str,
        title: &str,
        anchors_q: &AnchorView,
        anchors_d: &AnchorView,
    ) -> (ChannelizedInput, ChannelizedInput) {
        encode_channels(
            query,
            title,
            anchors_q,
            anchors_d,
            &self.vocab,
            &self.max_lens,
            self.tokenize_mode,
        )
    }

    fn embed_channel(
        &self,
        graph: &mut Graph64,
        params: &ParameterSet64,
        input: &ChannelizedInput,
        prefix: &str,
    ) -> kanchor_tensor::Result<NodeId> {
        match prefix {
            "tok" => {
                let table = graph.param(params, "tok.emb")?;
                graph.embedding_lookup(table, &input.effective_tokens())
            }
            "ent" => {
                let table = graph.param(params, "ent.emb")?;
                graph.embedding_lookup(table, &input.effective_entities())
            }
            // triple embedding: mean of head, relation, and tail rows of the
            // entity table
            _ => {
                let table = graph.param(params, "ent.emb")?;
                let (heads, rels, tails) = input.effective_triples();
                let h = graph.embedding_lookup(table, &heads)?;
                let r = graph.embedding_lookup(table, &rels)?;
                let t = graph.embedding_lookup(table, &tails)?;
                let hr = graph.add(h, r)?;
                let hrt = graph.add(hr, t)?;
                Ok(graph.scale(hrt, 1.0 / 3.0))
            }
        }
    }

    fn channel_features(
        &self,
        graph: &mut Graph64,
        params: &ParameterSet64,
        q: &ChannelizedInput,
        d: &ChannelizedInput,
        prefix: &str,
        enabled: bool,
    ) -> kanchor_tensor::Result<NodeId> {
        if !enabled {
            return Ok(graph.zeros(vec![1, self.channel_feature_dim()]));
        }
        let q_emb = self.embed_channel(graph, params, q, prefix)?;
        let d_emb = self.embed_channel(graph, params, d, prefix)?;
        match self.arch {
            ArchKind::Arc1 => arc1_features(graph, params, prefix, q_emb, d_emb),
            ArchKind::MatchPyramid => matchpyramid_features(graph, params, prefix, q_emb, d_emb),
            ArchKind::Iwan => iwan_features(graph, params, prefix, q_emb, d_emb, &self.dims),
        }
    }

    /// Full forward pass for one pair -> probability row (1,3).
    pub fn forward_pair(
        &self,
        graph: &mut Graph64,
        params: &ParameterSet64,
        q: &ChannelizedInput,
        d: &ChannelizedInput,
    ) -> kanchor_tensor::Result<NodeId> {
        let f_w = self.channel_features(graph, params, q, d, "tok", self.channels.token)?;
        let f_e = self.channel_features(graph, params, q, d, "ent", self.channels.entity)?;
        let f_t = self.channel_features(graph, params, q, d, "tri", self.channels.triple)?;
        fuse_and_classify(graph, params, f_w, f_e, f_t)
    }

    /// Stack per-pair probability rows and take mean cross-entropy.
    pub fn batch_loss(
        &self,
        graph: &mut Graph64,
        params: &ParameterSet64,
        batch: &[(&ChannelizedInput, &ChannelizedInput, usize)],
    ) -> kanchor_tensor::Result<NodeId> {
        let mut rows = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        for (q, d, label) in batch {
            rows.push(self.forward_pair(graph, params, q, d)?);
            labels.push(*label);
        }
        let stacked = graph.concat(0, &rows)?;
        graph.cross_entropy(stacked, &labels)
    }

    pub fn predict(
        &self,
        q: &ChannelizedInput,
        d: &ChannelizedInput,
    ) -> Result<MatchPrediction, Error> {
        let mut graph = Graph64::new();
        let probs = self
            .forward_pair(&mut graph, &self.params, q, d)
            .map_err(Error::Tensor)?;
        let v = graph.value(probs);
        Ok(MatchPrediction::from_probs([v[0], v[1], v[2]]))
    }

    /// Per-channel feature vectors for inspection; disabled channels are
    /// zero vectors of the same width.
    pub fn features(
        &self,
        q: &ChannelizedInput,
        d: &ChannelizedInput,
    ) -> Result<SimilarityFeatures, Error> {
        let mut graph = Graph64::new();
        let f_w = self
            .channel_features(&mut graph, &self.params, q, d, "tok", self.channels.token)
            .map_err(Error::Tensor)?;
        let f_e = self
            .channel_features(&mut graph, &self.params, q, d, "ent", self.channels.entity)
            .map_err(Error::Tensor)?;
        let f_t = self
            .channel_features(&mut graph, &self.params, q, d, "tri", self.channels.triple)
            .map_err(Error::Tensor)?;
        Ok(SimilarityFeatures {
            f_w: graph.value(f_w).to_vec(),
            f_e: graph.value(f_e).to_vec(),
            f_t: graph.value(f_t).to_vec(),
        })
    }

    fn meta_path(path: &Path) -> std::path::PathBuf {
        let mut s = path.as_os_str().to_os_string();
        s.push(".meta.json");
        std::path::PathBuf::from(s)
    }

    /// Write the checkpoint plus its JSON sidecar. Both are deterministic
    /// byte-for-byte for a fixed model.
    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let meta_json = serde_json::to_string_pretty(&self.meta()).expect("meta serializes");
        checkpoint::save(path, self.arch.as_str(), self.config_hash(), &self.params)
            .map_err(Error::Tensor)?;
        fs::write(Self::meta_path(path), meta_json + "\n").map_err(|source| {
            Error::Data(DataError::Io {
                file: Self::meta_path(path).display().to_string(),
                source,
            })
        })?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let meta_path = Self::meta_path(path);
        let meta_text = fs::read_to_string(&meta_path).map_err(|source| {
            Error::Data(DataError::Io { file: meta_path.display().to_string(), source })
        })?;
        let meta: MatcherMeta =
            serde_json::from_str(&meta_text).map_err(|e| {
                Error::Data(DataError::Malformed {
                    file: meta_path.display().to_string(),
                    line: 0,
                    msg: e.to_string(),
                })
            })?;
        let (header, mut params) = checkpoint::load::<f64>(path).map_err(Error::Tensor)?;
        if header.model_kind != meta.arch.as_str() {
            return Err(Error::Data(DataError::Malformed {
                file: path.display().to_string(),
                line: 0,
                msg: format!(
                    "checkpoint holds \"{}\" but sidecar says \"{}\"",
                    header.model_kind, meta.arch
                ),
            }));
        }
        params.reset_optimizer();
        let model = MatcherModel {
            arch: meta.arch,
            channels: meta.channels,
            dims: meta.dims,
            max_lens: meta.max_lens,
            tokenize_mode: meta.tokenize_mode,
            vocab: meta.vocab,
            params,
        };
        if model.config_hash() != header.config_hash {
            return Err(Error::Data(DataError::Malformed {
                file: path.display().to_string(),
                line: 0,
                msg: "checkpoint config hash does not match its sidecar".to_string(),
            }));
        }
        Ok(model)
    }
}

pub(crate) fn channel_feature_dim(arch: ArchKind, dims: &Dims) -> usize {
    match arch {
        ArchKind::Arc1 => arc1_feature_dim(dims),
        ArchKind::MatchPyramid => matchpyramid_feature_dim(dims),
        ArchKind::Iwan => iwan_feature_dim(dims),
    }
}
