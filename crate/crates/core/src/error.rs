use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatError {
    #[error("not hyperbolic: eigenvalues are not real and distinct off the unit circle")]
    NotHyperbolic,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not unimodular (det = {0})")]
    NotUnimodular(i64),
    #[error("power {k} exceeds cap |k| <= {cap}")]
    PowerCap { k: i64, cap: i64 },
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("map not locally invertible at ({psi1}, {psi2}): det = {det}")]
    NotInvertible { psi1: f64, psi2: f64, det: f64 },
    #[error("invalid force: {0}")]
    InvalidForce(String),
    #[error("frequency ({0}, {1}) exceeds the frequency cap {2}")]
    FrequencyCap(i64, i64, i64),
    #[error("ratio {0} has modulus >= 1")]
    DivergentRatio(f64),
    #[error("order {requested} exceeds cap {cap}")]
    OrderCap { requested: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing cumulant entries: {0}")]
    MissingEntries(String),
    #[error("no linear response: leading second cumulant vanishes")]
    NoLinearResponse,
    #[error("zero mean contraction: leading mean vanishes")]
    ZeroMean,
    #[error("observable parity not declared")]
    ParityUndeclared,
    #[error("parity violation: {0}")]
    ParityViolation(String),
    #[error("zero mean contraction, ε_τ undefined")]
    ZeroEpsilon,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("singular normal equations")]
    Singular,
    #[error("partition construction failed: {0}")]
    Construction(String),
    #[error("incompatible symbol window at position {0}")]
    IncompatibleWindow(usize),
    #[error("unsupported matrix for this operation: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CatError>;
