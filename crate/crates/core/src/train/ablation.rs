//! Channel ablation grid: retrain with channel subsets over a shared seed
//! set and report test accuracy per subset.

use super::trainer::{train_matcher, TrainConfig};
use super::MatchExample;
use crate::anchoring::{AnchorCache, AnchorConfig, Anchorer, NtdModel};
use crate::error::Error;
use crate::kg::KnowledgeGraph;
use crate::matchers::ChannelSet;

/// The standard grid: token only, token+entity, token+triple, all channels.
pub fn ablation_grid() -> [(String, ChannelSet); 4] {
    let mk = |token, entity, triple| ChannelSet { token, entity, triple };
    [
        ("token".to_string(), mk(true, false, false)),
        ("token+entity".to_string(), mk(true, true, false)),
        ("token+triple".to_string(), mk(true, false, true)),
        ("token+entity+triple".to_string(), mk(true, true, true)),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub channels: ChannelSet,
    /// (seed, test accuracy) per run.
    pub per_seed: Vec<(u64, f64)>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// `config name \t accuracy`, one row per subset.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!("{}\t{:.4}\n", row.name, row.mean_accuracy));
        }
        out
    }
}

/// Run the grid. Anchors are computed once and shared across every run;
/// each (subset, seed) pair trains from scratch with that seed's split.
pub fn run_ablation(
    base: &TrainConfig,
    examples: &[MatchExample],
    kg: &KnowledgeGraph,
    ntd: Option<&NtdModel>,
    anchor_cfg: &AnchorConfig,
    seeds: &[u64],
) -> Result<AblationReport, Error> {
    let mut cache = AnchorCache::new();
    {
        let anchorer = Anchorer::new(kg, ntd, anchor_cfg.clone());
        cache.ensure_texts(
            examples
                .iter()
                .flat_map(|ex| [ex.query.as_str(), ex.title.as_str()]),
            &anchorer,
        );
    }
    let mut rows = Vec::with_capacity(4);
    for (name, channels) in ablation_grid() {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let config = TrainConfig { channels, seed, ..base.clone() };
            let trained =
                train_matcher(&config, examples, kg, ntd, anchor_cfg, Some(&mut cache))?;
            per_seed.push((seed, trained.test_accuracy));
        }
        let mean_accuracy =
            per_seed.iter().map(|(_, a)| a).sum::<f64>() / per_seed.len().max(1) as f64;
        rows.push(AblationRow { name, channels, per_seed, mean_accuracy });
    }
    Ok(AblationReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_the_four_standard_subsets() {
        let grid = ablation_grid();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[0].1, ChannelSet::token_only());
        assert!(grid[3].1.token && grid[3].1.entity && grid[3].1.triple);
    }

    #[test]
    fn tsv_has_one_row_per_subset() {
        let report = AblationReport {
            rows: ablation_grid()
                .into_iter()
                .map(|(name, channels)| AblationRow {
                    name,
                    channels,
                    per_seed: vec![(1, 0.5)],
                    mean_accuracy: 0.5,
                })
                .collect(),
        };
        let tsv = report.to_tsv();
        assert_eq!(tsv.lines().count(), 4);
        assert!(tsv.starts_with("token\t0.5000\n"));
    }
}
