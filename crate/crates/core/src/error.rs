use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid city count {0}: at least 3 cities are required")]
    TooFewCities(usize),
    #[error("invalid weight range [{lo}, {hi}]")]
    InvalidWeightRange { lo: f64, hi: f64 },
    #[error("distance matrix is not a valid symmetric zero-diagonal matrix: {0}")]
    InvalidMatrix(String),
    #[error("sequence {0:?} is not a permutation of the expected labels")]
    NotAPermutation(Vec<usize>),
    #[error("{what} = {value} exceeds the enumeration cap of {cap}")]
    CapExceeded {
        what: &'static str,
        value: usize,
        cap: usize,
    },
    #[error("{what} index {index} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("gate acts on repeated qubit index {0}")]
    QubitCollision(usize),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("penalty weights must be strictly positive (lambda = {lambda}, mu = {mu})")]
    NonPositivePenalty { lambda: f64, mu: f64 },
    #[error("instance has {inst} cities but encoding was built for {enc}")]
    EncodingMismatch { inst: usize, enc: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("mitigation requested without a calibration matrix")]
    MissingCalibration,
    #[error("confusion matrix is singular")]
    SingularMatrix,
    #[error("invalid confusion matrix: {0}")]
    InvalidConfusion(String),
    #[error("IBU denominator vanished for observed outcome {0}")]
    ZeroDenominator(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed Pauli term dump at line {line}: {msg}")]
    PauliParse { line: usize, msg: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
