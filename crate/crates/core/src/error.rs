use crate::ld::LdError;

/// Errors raised by model evaluation, integration and the shooting pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ld(#[from] LdError),

    #[error("model evaluation failed: {0}")]
    Model(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("consistent initialization failed: residual {residual:e} after {iterations} iterations")]
    Init { residual: f64, iterations: usize },

    #[error("regularity violated at t = {t}: |dg/dy| pivot {pivot:e} below floor {floor:e}")]
    Regularity { t: f64, pivot: f64, floor: f64 },

    #[error("Newton corrector diverged at t = {t}: residual {residual:e}")]
    Newton { t: f64, residual: f64 },

    #[error("singular sensitivity system at t = {t}")]
    SingularSensitivity { t: f64 },

    #[error("invalid input data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluation at p = {p:?} failed: {source}")]
    AtParameters { p: Vec<f64>, source: Box<Error> },
}

impl Error {
    /// Innermost error once parameter annotations are stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtParameters { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
