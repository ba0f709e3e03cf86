use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("invalid value `{value}` for flag `{arg}` of {kernel}")]
    InvalidFlag {
        kernel: String,
        arg: String,
        value: String,
    },
    #[error("invalid call: {0}")]
    InvalidCall(String),
    #[error("leading dimension {ld} of `{arg}` is smaller than its {rows} rows")]
    LeadingDimension { arg: String, ld: usize, rows: usize },
    #[error("operand `{arg}` exceeds buffer `{buffer}` ({needed} > {len} elements)")]
    OutOfBounds {
        arg: String,
        buffer: String,
        needed: usize,
        len: usize,
    },
    #[error("unknown buffer `{0}`")]
    UnknownBuffer(String),
    #[error("singular triangular matrix: zero diagonal element at {0}")]
    Singular(usize),
    #[error("arithmetic intensity undefined for zero data movement")]
    UndefinedIntensity,
    #[error("empty sample")]
    EmptySample,
    #[error("scratch buffer of {have} bytes cannot hold a {need}-byte remote access")]
    ScratchTooSmall { have: usize, need: usize },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("rank-deficient fit: rank {rank} < {cols} basis functions")]
    RankDeficient { rank: usize, cols: usize },
    #[error("fit error: {0}")]
    Fit(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no model for {0}")]
    Unmodeled(String),
    #[error("sizes {sizes:?} outside the modeled domain of {kernel}")]
    OutOfDomain { kernel: String, sizes: Vec<usize> },
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("zero runtime")]
    ZeroRuntime,
    #[error("zero measurement")]
    ZeroMeasurement,
    #[error("missing timing for {0}")]
    MissingTiming(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid contraction: {0}")]
    Contraction(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
