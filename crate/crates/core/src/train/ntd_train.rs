//! Training loop for the neural triple disambiguator.

use std::collections::HashMap;

use kanchor_tensor::{fnv1a64, Adam, Graph64, Rng};
use serde::{Deserialize, Serialize};

use super::dataset::split_dataset;
use super::DisambExample;
use crate::anchoring::{
    filter_knowledge_reasoning, generate_triple_candidates, ntd_features, tokenize, AnchorConfig,
    extract_with_dict, FmmDict, NtdFeatureBag, NtdModel, TripleCandidate,
};
use crate::error::{Error, TrainError};
use crate::kg::KnowledgeGraph;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NtdTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub dim: usize,
    pub buckets: usize,
    /// Hold out a validation slice for checkpoint selection; disable to
    /// deliberately overfit a small set.
    pub holdout: bool,
    pub verbose: bool,
}

impl Default for NtdTrainConfig {
    fn default() -> Self {
        NtdTrainConfig {
            epochs: 30,
            lr: 0.05,
            batch_size: 32,
            seed: 1,
            dim: 32,
            buckets: 4096,
            holdout: true,
            verbose: false,
        }
    }
}

#[derive(Debug)]
pub struct NtdTrainReport {
    pub model: NtdModel,
    pub train_accuracy: f64,
    pub valid_accuracy: f64,
    pub best_epoch: usize,
    /// Examples whose candidate could not be located in their query.
    pub skipped: usize,
}

/// Resolve each labelled example to its candidate's feature bag by running
/// the anchoring front half (tokenize, FMM, candidates, KR) per unique
/// query. Examples whose (head, relation, tail) surfaces match no candidate
/// are skipped and counted.
pub fn prepare_disamb_bags(
    examples: &[DisambExample],
    kg: &KnowledgeGraph,
    anchor_cfg: &AnchorConfig,
) -> (Vec<(NtdFeatureBag, bool)>, usize) {
    let dict = FmmDict::build(kg, anchor_cfg.mode);
    let mut per_query: HashMap<&str, (Vec<crate::anchoring::TokenSpan>, Vec<TripleCandidate>)> =
        HashMap::new();
    let mut bags = Vec::with_capacity(examples.len());
    let mut skipped = 0;
    for ex in examples {
        let (tokens, cands) = per_query.entry(ex.query.as_str()).or_insert_with(|| {
            let tokens = tokenize(&ex.query, anchor_cfg.mode);
            let mentions = extract_with_dict(&tokens, &dict, kg);
            let cands = filter_knowledge_reasoning(generate_triple_candidates(&mentions, kg), kg);
            (tokens, cands)
        });
        let target = cands.iter().find(|c| {
            c.relation == ex.relation
                && c.head.surface.eq_ignore_ascii_case(&ex.head_surface)
                && c.tail.surface.eq_ignore_ascii_case(&ex.tail_surface)
        });
        match target {
            Some(cand) => bags.push((ntd_features(cand, tokens, cands), ex.label)),
            None => skipped += 1,
        }
    }
    (bags, skipped)
}

fn accuracy_on(model: &NtdModel, bags: &[(NtdFeatureBag, bool)]) -> f64 {
    if bags.is_empty() {
        return 0.0;
    }
    let correct = bags
        .iter()
        .filter(|(bag, label)| (model.score(bag) >= 0.5) == *label)
        .count();
    correct as f64 / bags.len() as f64
}

/// Train the averaged-embedding logistic disambiguator with minibatch Adam
/// and best-validation selection.
pub fn train_ntd(
    examples: &[DisambExample],
    kg: &KnowledgeGraph,
    anchor_cfg: &AnchorConfig,
    config: &NtdTrainConfig,
) -> Result<NtdTrainReport, Error> {
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Train(TrainError::InvalidConfig(
            "batch_size and epochs must be at least 1".to_string(),
        )));
    }
    let (bags, skipped) = prepare_disamb_bags(examples, kg, anchor_cfg);
    let positives = bags.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == bags.len() {
        return Err(Error::Train(TrainError::SingleClass));
    }

    let (train, valid) = if config.holdout {
        let (train, valid, _held_out_test) = split_dataset(&bags, config.seed)?;
        (train, valid)
    } else {
        (bags.clone(), bags.clone())
    };
    let train_pos = train.iter().filter(|(_, y)| *y).count();
    if train_pos == 0 || train_pos == train.len() {
        return Err(Error::Train(TrainError::SingleClass));
    }

    let mut rng = Rng::new(config.seed ^ fnv1a64(b"ntd-train"));
    let mut model = NtdModel::init(config.buckets, config.dim, &mut rng);
    let adam = Adam::with_lr(config.lr);

    let mut best = (f64::NEG_INFINITY, 0usize, model.params.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        let mut epoch_rng = rng.fork(epoch as u64);
        epoch_rng.shuffle(&mut order);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut graph = Graph64::new();
            let mut total = None;
            for &i in chunk {
                let (bag, label) = &train[i];
                let p = model
                    .forward(&mut graph, &model.params, bag)
                    .map_err(Error::Tensor)?;
                let l = graph
                    .bce(p, if *label { 1.0 } else { 0.0 })
                    .map_err(Error::Tensor)?;
                total = Some(match total {
                    None => l,
                    Some(acc) => graph.add(acc, l).map_err(Error::Tensor)?,
                });
            }
            let sum = total.expect("non-empty chunk");
            let loss = graph.scale(sum, 1.0 / chunk.len() as f64);
            if !graph.scalar_value(loss).is_finite() {
                return Err(Error::Train(TrainError::Diverged { epoch, batch: batch_idx }));
            }
            model.params.clear_grads();
            graph
                .backward_params(loss, &mut model.params)
                .map_err(Error::Tensor)?;
            adam.step(&mut model.params).map_err(Error::Tensor)?;
        }
        let valid_acc = accuracy_on(&model, &valid);
        if config.verbose {
            eprintln!("ntd epoch {epoch}: valid accuracy {valid_acc:.4}");
        }
        if valid_acc >= best.0 {
            best = (valid_acc, epoch, model.params.clone());
        }
    }
    model.params = best.2;
    Ok(NtdTrainReport {
        train_accuracy: accuracy_on(&model, &train),
        valid_accuracy: best.0,
        best_epoch: best.1,
        skipped,
        model,
    })
}
