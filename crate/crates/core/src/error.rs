use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("atom {index}: negative weight {weight}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("atom {index}: weight {weight} is not finite")]
    NonFiniteWeight { index: usize, weight: f64 },
    #[error("duplicate atom tag `{0}`")]
    DuplicateTag(String),
    #[error("grid ratio {0} is outside (0, 1)")]
    BadRatio(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("atom `{tag}`: density {value} is not strictly positive")]
    NonPositiveDensity { tag: String, value: f64 },
    #[error("atom function has no value for atom `{0}`")]
    MissingAtomValue(String),
    #[error("integrand evaluated to NaN at atom `{tag}`")]
    NanValue { tag: String },
    #[error("integrand is +inf at positive-weight atom `{tag}`")]
    InfiniteValue { tag: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown catalog integrand `{0}`")]
    UnknownIntegrand(String),
    #[error("integrand `{name}`: bad parameter `{param}`: {reason}")]
    BadParameter { name: String, param: String, reason: String },
    #[error("function value at the base point is not finite; the subdifferential is empty")]
    EmptySubdifferential,
    #[error("set operation unsupported: {0}")]
    UnsupportedSet(String),
    #[error("empty set value at positive-weight atom `{0}`")]
    EmptySetValue(String),
    #[error("missing oracle: {0}")]
    MissingOracle(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("I/O error on `{path}`: {reason}")]
    Io { path: String, reason: String },
}
