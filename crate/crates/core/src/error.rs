use thiserror::Error;

/// Errors raised by model loading, training, reduction and auditing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed model document: {0}")]
    Malformed(String),

    #[error("tree {tree}: node {node} references missing node {missing}")]
    DanglingNode { tree: usize, node: u64, missing: u64 },

    #[error("tree {tree}: {reason}")]
    NotATree { tree: usize, reason: String },

    #[error("tree {tree}, node {node}: leaf distribution sums to {sum}, expected 1")]
    LeafNotNormalized { tree: usize, node: u64, sum: f64 },

    #[error("tree {tree}, node {node}: leaf payload does not match a {task} model")]
    LeafTaskMismatch { tree: usize, node: u64, task: String },

    #[error("unsupported split relation {0:?}; only \"<=\" is accepted")]
    UnsupportedRelation(String),

    #[error("tree {tree}: stored tree_stats ({stored_min}, {stored_max}) disagree with leaves ({min}, {max})")]
    TreeStatsMismatch {
        tree: usize,
        stored_min: f64,
        stored_max: f64,
        min: f64,
        max: f64,
    },

    #[error("instance has {got} values, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("instance value for feature {feature} is not finite")]
    NonFinite { feature: usize },

    #[error("no unique majority: classes {first} and {second} both hold {votes} votes")]
    Tie {
        first: usize,
        second: usize,
        votes: usize,
    },

    #[error("operation requires a {expected} model, got {got}")]
    WrongTask { expected: String, got: String },

    #[error("method {method} is not applicable to {task} models")]
    MethodTaskMismatch { method: String, task: String },

    #[error("invalid method code {0:?}")]
    InvalidMethod(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty transaction set")]
    EmptyTransactions,

    #[error("cluster count {k} exceeds number of paths {paths}")]
    TooManyClusters { k: usize, paths: usize },

    #[error("instance violates one-hot encoding of group {group:?}")]
    OneHotViolation { group: String },

    #[error("rule consequent {rule} does not match model prediction {model}")]
    ConsequentMismatch { rule: String, model: String },

    #[error("rule does not cover any row")]
    ZeroCoverage,

    #[error("dataset schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
