use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaserError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("truncation dimension {0} is too small (need at least 2)")]
    DimensionTooSmall(usize),

    #[error("level {level} out of range for truncation dimension {dim}")]
    LevelOutOfRange { level: usize, dim: usize },

    #[error("stationary truncation did not converge: dim {dim} reached the cap with tail mass {tail_mass:e}")]
    TruncationNotConverged { dim: usize, tail_mass: f64 },

    #[error(
        "mean-rate identity violated: counted-rate sum {from_counts} vs <n> - nu = {from_mean}"
    )]
    IdentityViolation { from_counts: f64, from_mean: f64 },

    #[error("quadrature failed to converge on the segment ending at x = {x}")]
    QuadratureFailed { x: f64 },

    #[error("symmetrization undefined: off-diagonal product at index {index} is {value}")]
    SymmetrizationUndefined { index: usize, value: f64 },

    #[error("matrix exponential needs {steps} sub-steps, above the limit {limit}")]
    StepOverflow { steps: f64, limit: usize },

    #[error("trajectory reached the safety cap of {cap} photons at t = {time}")]
    LevelCapReached { cap: usize, time: f64 },

    #[error("{aborted} of {total} trajectories aborted, above the tolerated fraction")]
    TooManyAborts { aborted: usize, total: usize },

    #[error("spectral bound did not converge in truncation at s = {s} (best estimate {estimate}, dim {dim})")]
    SpectralNotConverged { s: f64, estimate: f64, dim: usize },
}

pub type Result<T, E = MaserError> = std::result::Result<T, E>;

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(MaserError::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(MaserError::DimensionTooSmall(dim))
    } else {
        Ok(())
    }
}
