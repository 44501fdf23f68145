use thiserror::Error;

/// Errors raised while loading, validating, or querying a knowledge graph.
/// Load-time variants name the file and line that caused them.
#[derive(Debug, Error)]
pub enum KgError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("{file}:{line}: duplicate entity id {id}")]
    DuplicateEntityId { file: String, line: usize, id: u32 },

    #[error("{file}:{line}: entity {id} has an empty canonical name")]
    EmptyName { file: String, line: usize, id: u32 },

    #[error("{file}:{line}: unknown entity {id}")]
    UnknownEntity { file: String, line: usize, id: u32 },

    #[error("{file}:{line}: alias \"{alias}\" already maps to entity {first}, cannot also map to {second}")]
    AliasConflict {
        file: String,
        line: usize,
        alias: String,
        first: u32,
        second: u32,
    },

    #[error("{file}:{line}: duplicate triple ({head}, {relation}, {tail})")]
    DuplicateTriple {
        file: String,
        line: usize,
        head: u32,
        relation: String,
        tail: u32,
    },

    #[error("{file}:{line}: confidence {value} outside [0, 1]")]
    BadConfidence { file: String, line: usize, value: f64 },

    #[error("{file}:{line}: component_of cycle through ({head}, component_of, {tail})")]
    ComponentCycle {
        file: String,
        line: usize,
        head: u32,
        tail: u32,
    },

    #[error("unknown entity id {0}")]
    UnknownId(u32),
}

/// Errors in dataset and config files consumed by the training harness.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Malformed { file: String, line: usize, msg: String },
}

/// Errors raised by training and evaluation.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("training set contains a single class; need both labels")]
    SingleClass,

    #[error("need at least {need} examples, got {got}")]
    TooFewExamples { need: usize, got: usize },

    #[error("evaluation set is empty")]
    EmptyEvalSet,

    #[error("AUC undefined: {positives} positives and {negatives} negatives")]
    AucUndefined { positives: usize, negatives: usize },

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Tensor(#[from] kanchor_tensor::TensorError),
}

/// Crate-wide error wrapper.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kg(#[from] KgError),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Train(#[from] TrainError),

    #[error(transparent)]
    Tensor(#[from] kanchor_tensor::TensorError),
}

pub type Result<T> = std::result::Result<T, Error>;
