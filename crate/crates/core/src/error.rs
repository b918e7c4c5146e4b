use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("point ({x}, {y}) lies on interface {interface} (|phi| = {value:e})")]
    OnInterface {
        interface: usize,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error("point ({x}, {y}) is within 1e-12 of singular center {center}")]
    AtCenter { center: usize, x: f64, y: f64 },

    #[error("point ({x}, {y}) is not on interface {interface} (|phi| = {value:e})")]
    NotOnInterface {
        interface: usize,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error("no singular exponent in (0,1): det(M) has no sign change")]
    NoRootInUnitInterval,

    #[error("kernel of the sector matrix has dimension {nullity}, expected 1")]
    KernelRankError { nullity: usize },

    #[error("field has no singular unit")]
    NoSingularUnit,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
