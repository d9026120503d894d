use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("all outcome weights are zero")]
    AllZeroWeights,
    #[error("element {element} is outside the ground set of size {n}")]
    MaskOutOfRange { element: usize, n: usize },
    #[error("weight {weight} of entry {index} is negative or not finite")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("ground set of size {n} exceeds the enumeration cap {cap}")]
    GroundSetTooLarge { n: usize, cap: usize },
    #[error("conditioning event has zero probability")]
    InfeasibleConditioning,
    #[error("distribution is not homogeneous")]
    NotHomogeneous,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid matrix ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("theta {theta} lies outside [-{limit}, {limit}]")]
    ThetaOutOfRange { theta: f64, limit: f64 },
    #[error("c = {c} is below the required 5 * D_inf * D_am = {required}")]
    CTooSmall { c: f64, required: f64 },
    #[error("dependence parameter must be positive, got {0}")]
    NonPositiveD(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph has {count} spanning trees, above the cap {cap}")]
    TooManyTrees { count: f64, cap: usize },
    #[error("approximation does not annihilate the all-ones vector (residual {residual:e})")]
    KernelMismatch { residual: f64 },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
