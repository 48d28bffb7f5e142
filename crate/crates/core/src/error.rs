use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("landscape has a single patch: no interfaces")]
    NoInterfaces,

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("patch {patch} of length {length} is shorter than 4 grid spacings; use a finer resolution")]
    GridTooCoarse { patch: usize, length: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("steady solver failed; last scaled residual {residual:e}")]
    SteadyFailed { residual: f64 },

    #[error("principal eigenpair not isolated at this resolution; refine grid")]
    EigenNotIsolated,

    #[error("singular pivot in tridiagonal solve at row {row}")]
    SingularPivot { row: usize },

    #[error("state is not near-steady: time-derivative norm {norm:e}")]
    NotSteady { norm: f64 },

    #[error("solution blew up at t = {time}: value {value:e} exceeds bound {bound:e}")]
    BlowUp { time: f64, value: f64, bound: f64 },

    #[error("operation requires a two-patch landscape, got n = {n}")]
    RequiresTwoPatches { n: usize },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for configuration/validation problems, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::NoInterfaces
                | Error::DimensionMismatch { .. }
                | Error::GridTooCoarse { .. }
                | Error::GridMismatch
                | Error::RequiresTwoPatches { .. }
        )
    }
}
