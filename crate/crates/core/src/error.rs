use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The deformation gradient lost positive orientation on an element.
    #[error("non-positive determinant {det:.6e} on triangle {triangle}")]
    NonPositiveDeterminant { triangle: usize, det: f64 },

    /// The volumetric energy was evaluated at a non-positive volume ratio.
    #[error("determinant collapse: volumetric density evaluated at d = {d:.6e}")]
    DeterminantCollapse { d: f64 },

    #[error("point ({x:.8}, {y:.8}) lies outside the source mesh")]
    OutsideDomain { x: f64, y: f64 },

    #[error(
        "conjugate gradient stopped after {iterations} iterations with relative residual {residual:.3e}"
    )]
    SolveFailed { iterations: usize, residual: f64 },

    /// Backtracking reduced the pseudo-time step below its floor.
    #[error("flow stalled at step {step}: dt {dt:.3e} fell below min_dt {min_dt:.3e}")]
    FlowStalled { step: usize, dt: f64, min_dt: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
