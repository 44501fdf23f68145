//! Dataset handling, training loops, metrics, and evaluation protocols.

mod ablation;
mod dataset;
mod disamb;
mod metrics;
mod ntd_train;
mod trainer;

pub use ablation::{ablation_grid, run_ablation, AblationReport, AblationRow};
pub use dataset::{
    load_disamb_tsv, load_match_tsv, save_disamb_tsv, save_match_tsv, split_dataset,
};
pub use disamb::{evaluate_disambiguation, DisambEval, DisambScorer};
pub use metrics::auc;
pub use ntd_train::{prepare_disamb_bags, train_ntd, NtdTrainConfig, NtdTrainReport};
pub use trainer::{
    evaluate_accuracy, train_matcher, EpochStats, TrainConfig, TrainedMatcher,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kg::RelationKind;

/// The three annotation labels of a query-title pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchLabel {
    Unrelated,
    Related,
    Similar,
}

impl MatchLabel {
    pub const ALL: [MatchLabel; 3] =
        [MatchLabel::Unrelated, MatchLabel::Related, MatchLabel::Similar];

    pub fn index(&self) -> usize {
        match self {
            MatchLabel::Unrelated => 0,
            MatchLabel::Related => 1,
            MatchLabel::Similar => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<MatchLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn name(&self) -> &'static str {
        match self {
            MatchLabel::Unrelated => "unrelated",
            MatchLabel::Related => "related",
            MatchLabel::Similar => "similar",
        }
    }
}

impl fmt::Display for MatchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One labelled query-title pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchExample {
    pub query: String,
    pub title: String,
    pub label: MatchLabel,
}

/// One labelled triple candidate for disambiguation training/evaluation:
/// the query text, the candidate's two mention surfaces and relation, and
/// whether it expresses the query's true intent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisambExample {
    pub query: String,
    pub head_surface: String,
    pub relation: RelationKind,
    pub tail_surface: String,
    pub label: bool,
}
