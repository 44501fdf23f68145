//! Matcher training: anchor everything once, build the vocab from the
//! training split, run minibatch Adam on the cross-entropy objective, and
//! keep the epoch with the best validation accuracy.

use serde::{Deserialize, Serialize};

use kanchor_tensor::{fnv1a64, Adam, Graph64, Rng};

use super::dataset::split_dataset;
use super::MatchExample;
use crate::anchoring::{AnchorCache, AnchorConfig, Anchorer, NtdModel, TokenizeMode};
use crate::error::{Error, TrainError};
use crate::kg::KnowledgeGraph;
use crate::matchers::{
    encode_channels, AnchorView, ArchKind, ChannelSet, ChannelizedInput, Dims, MatcherModel,
    MaxLens, Vocab,
};

fn default_seed() -> u64 {
    1
}
fn default_verbose() -> bool {
    false
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: ArchKind,
    pub channels: ChannelSet,
    pub dims: Dims,
    #[serde(default)]
    pub max_lens: MaxLens,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_verbose")]
    pub verbose: bool,
}

impl TrainConfig {
    /// Production defaults per architecture; tests shrink the dims.
    pub fn default_for(arch: ArchKind) -> Self {
        TrainConfig {
            arch,
            channels: ChannelSet::all(),
            dims: Dims::default_for(arch),
            max_lens: MaxLens::default(),
            batch_size: 512,
            lr: 0.001,
            epochs: 10,
            seed: 1,
            verbose: false,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if !self.channels.any() {
            problems.push("at least one channel must be enabled".to_string());
        }
        if self.epochs == 0 {
            problems.push("epochs must be at least 1".to_string());
        }
        if self.dims.embed == 0 || self.dims.filters == 0 || self.dims.hidden == 0 {
            problems.push("dims must all be nonzero".to_string());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            problems.push(format!("lr must be positive and finite, got {}", self.lr));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_accuracy: f64,
}

#[derive(Debug)]
pub struct TrainedMatcher {
    pub model: MatcherModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_valid_accuracy: f64,
    pub test_accuracy: f64,
}

type Encoded = (ChannelizedInput, ChannelizedInput, usize);

fn encode_split(
    examples: &[MatchExample],
    cache: &AnchorCache,
    vocab: &Vocab,
    max_lens: &MaxLens,
    mode: TokenizeMode,
) -> Vec<Encoded> {
    examples
        .iter()
        .map(|ex| {
            let qa = cache
                .get(&ex.query)
                .map(AnchorView::from)
                .unwrap_or_default();
            let da = cache
                .get(&ex.title)
                .map(AnchorView::from)
                .unwrap_or_default();
            let (q, d) = encode_channels(&ex.query, &ex.title, &qa, &da, vocab, max_lens, mode);
            (q, d, ex.label.index())
        })
        .collect()
}

fn accuracy_encoded(model: &MatcherModel, encoded: &[Encoded]) -> Result<f64, Error> {
    if encoded.is_empty() {
        return Err(Error::Train(TrainError::EmptyEvalSet));
    }
    let mut correct = 0;
    for (q, d, label) in encoded {
        if model.predict(q, d)?.label == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / encoded.len() as f64)
}

/// Train on an 8:1:1 split of `examples`, selecting the best-validation
/// epoch. Anchors are computed once up front (through `cache` when given, so
/// repeated runs can share a JSONL sidecar).
pub fn train_matcher(
    config: &TrainConfig,
    examples: &[MatchExample],
    kg: &KnowledgeGraph,
    ntd: Option<&NtdModel>,
    anchor_cfg: &AnchorConfig,
    cache: Option<&mut AnchorCache>,
) -> Result<TrainedMatcher, Error> {
    config.validate().map_err(Error::Train)?;
    let (train, valid, test) = split_dataset(examples, config.seed)?;

    // anchor every unique text once
    let mut local_cache = AnchorCache::new();
    let cache: &mut AnchorCache = match cache {
        Some(c) => c,
        None => &mut local_cache,
    };
    {
        let anchorer = Anchorer::new(kg, ntd, anchor_cfg.clone());
        let texts = examples
            .iter()
            .flat_map(|ex| [ex.query.as_str(), ex.title.as_str()]);
        cache.ensure_texts(texts, &anchorer);
    }

    let vocab = Vocab::build(
        kg,
        train
            .iter()
            .flat_map(|ex| [ex.query.as_str(), ex.title.as_str()]),
        anchor_cfg.mode,
    );

    let enc_train = encode_split(&train, cache, &vocab, &config.max_lens, anchor_cfg.mode);
    let enc_valid = encode_split(&valid, cache, &vocab, &config.max_lens, anchor_cfg.mode);
    let enc_test = encode_split(&test, cache, &vocab, &config.max_lens, anchor_cfg.mode);
    let truncated = enc_train
        .iter()
        .chain(&enc_valid)
        .chain(&enc_test)
        .filter(|(q, d, _)| q.truncated || d.truncated)
        .count();
    if truncated > 0 && config.verbose {
        eprintln!("warning: {truncated} inputs truncated to the channel length limits");
    }

    let mut model = MatcherModel::init(
        config.arch,
        config.channels,
        config.dims,
        config.max_lens,
        anchor_cfg.mode,
        vocab,
        config.seed,
    )?;
    let adam = Adam::with_lr(config.lr);
    let mut rng = Rng::new(config.seed ^ fnv1a64(b"matcher-train"));

    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (f64::NEG_INFINITY, 0usize, model.params.clone());
    let mut order: Vec<usize> = (0..enc_train.len()).collect();
    for epoch in 1..=config.epochs {
        let mut epoch_rng = rng.fork(epoch as u64);
        epoch_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&ChannelizedInput, &ChannelizedInput, usize)> = chunk
                .iter()
                .map(|&i| (&enc_train[i].0, &enc_train[i].1, enc_train[i].2))
                .collect();
            let mut graph = Graph64::new();
            let loss = model
                .batch_loss(&mut graph, &model.params, &batch)
                .map_err(Error::Tensor)?;
            let loss_value = graph.scalar_value(loss);
            if !loss_value.is_finite() {
                return Err(Error::Train(TrainError::Diverged { epoch, batch: batch_idx }));
            }
            loss_sum += loss_value * chunk.len() as f64;
            model.params.clear_grads();
            graph
                .backward_params(loss, &mut model.params)
                .map_err(Error::Tensor)?;
            adam.step(&mut model.params).map_err(Error::Tensor)?;
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / enc_train.len() as f64,
            train_accuracy: accuracy_encoded(&model, &enc_train)?,
            valid_accuracy: accuracy_encoded(&model, &enc_valid)?,
        };
        if config.verbose {
            eprintln!(
                "epoch {}: train loss {:.4}, train acc {:.4}, valid acc {:.4}",
                stats.epoch, stats.train_loss, stats.train_accuracy, stats.valid_accuracy
            );
        }
        if stats.valid_accuracy >= best.0 {
            best = (stats.valid_accuracy, epoch, model.params.clone());
        }
        history.push(stats);
    }
    model.params = best.2;
    model.params.reset_optimizer();
    let test_accuracy = accuracy_encoded(&model, &enc_test)?;
    Ok(TrainedMatcher {
        model,
        history,
        best_epoch: best.1,
        best_valid_accuracy: best.0,
        test_accuracy,
    })
}

/// Fraction of argmax-correct predictions of a trained model on raw
/// examples; anchors are computed on the fly with the same configuration.
pub fn evaluate_accuracy(
    model: &MatcherModel,
    examples: &[MatchExample],
    kg: &KnowledgeGraph,
    ntd: Option<&NtdModel>,
    anchor_cfg: &AnchorConfig,
) -> Result<f64, Error> {
    if examples.is_empty() {
        return Err(Error::Train(TrainError::EmptyEvalSet));
    }
    let anchorer = Anchorer::new(kg, ntd, anchor_cfg.clone());
    let mut cache = AnchorCache::new();
    cache.ensure_texts(
        examples
            .iter()
            .flat_map(|ex| [ex.query.as_str(), ex.title.as_str()]),
        &anchorer,
    );
    let encoded = encode_split(examples, &cache, &model.vocab, &model.max_lens, model.tokenize_mode);
    accuracy_encoded(model, &encoded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::MatchLabel;

    fn tiny_kg() -> KnowledgeGraph {
        use crate::kg::{Entity, RelationKind, Triple};
        KnowledgeGraph::from_parts(
            vec![
                Entity::new(1, "widget", &[], "component"),
                Entity::new(2, "open", &["opened"], "operation"),
                Entity::new(3, "close", &["closed"], "operation"),
            ],
            vec![
                Triple::new(1, RelationKind::HasOperation, 2),
                Triple::new(1, RelationKind::HasOperation, 3),
            ],
        )
        .unwrap()
    }

    fn tiny_dataset(n: usize) -> Vec<MatchExample> {
        let mut out = Vec::new();
        for i in 0..n {
            let (a, b) = if i % 2 == 0 { ("open", "close") } else { ("close", "open") };
            let filler = ["now", "please", "today"][i % 3];
            out.push(MatchExample {
                query: format!("how to {a} my widget {filler}"),
                title: format!("can i {a} the widget"),
                label: MatchLabel::Similar,
            });
            out.push(MatchExample {
                query: format!("how to {a} my widget {filler}"),
                title: format!("can i {b} the widget"),
                label: MatchLabel::Related,
            });
            out.push(MatchExample {
                query: format!("how to {a} my widget {filler}"),
                title: format!("nothing about widgets at all {filler}"),
                label: MatchLabel::Unrelated,
            });
        }
        out
    }

    fn tiny_config(arch: ArchKind) -> TrainConfig {
        TrainConfig {
            arch,
            channels: ChannelSet::all(),
            dims: Dims { embed: 12, filters: 8, hidden: 8 },
            max_lens: MaxLens::default(),
            batch_size: 16,
            lr: 0.01,
            epochs: 8,
            seed: 5,
            verbose: false,
        }
    }

    #[test]
    fn trains_and_reports_history() {
        let kg = tiny_kg();
        let data = tiny_dataset(20);
        let trained = train_matcher(
            &tiny_config(ArchKind::Arc1),
            &data,
            &kg,
            None,
            &AnchorConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(trained.history.len(), 8);
        assert!(trained.best_epoch >= 1);
        let last = trained.history.last().unwrap();
        assert!(last.train_accuracy > 0.5, "{last:?}");
    }

    #[test]
    fn token_only_ablation_trains() {
        let kg = tiny_kg();
        let data = tiny_dataset(12);
        let mut config = tiny_config(ArchKind::Arc1);
        config.channels = ChannelSet::token_only();
        let trained =
            train_matcher(&config, &data, &kg, None, &AnchorConfig::default(), None).unwrap();
        assert!(trained.history.last().unwrap().train_accuracy > 0.4);
    }

    #[test]
    fn fixed_seed_reproduces_parameters() {
        let kg = tiny_kg();
        let data = tiny_dataset(10);
        let config = tiny_config(ArchKind::Arc1);
        let cfg = AnchorConfig::default();
        let a = train_matcher(&config, &data, &kg, None, &cfg, None).unwrap();
        let b = train_matcher(&config, &data, &kg, None, &cfg, None).unwrap();
        for (name, t) in a.model.params.iter() {
            assert_eq!(t.values(), b.model.params.get(name).unwrap().values(), "{name}");
        }
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn invalid_configs_are_rejected_with_reasons() {
        let mut config = tiny_config(ArchKind::Arc1);
        config.batch_size = 0;
        config.channels = ChannelSet { token: false, entity: false, triple: false };
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("batch_size"), "{err}");
        assert!(err.contains("channel"), "{err}");
    }
}
