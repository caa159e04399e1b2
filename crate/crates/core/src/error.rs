use thiserror::Error;

/// Errors raised by the models, solvers and probes.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// computation ran at, so the error type stays independent of it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point handed to a model lies outside its chart.
    #[error("point {coords:?} lies outside the chart domain of {model}")]
    Domain { model: String, coords: Vec<f64> },

    /// An integrated curve left the chart domain.
    #[error("solution left the chart domain after t = {last_t}")]
    DomainExit { last_t: f64 },

    /// The adaptive integrator could not make progress.
    #[error("integrator failure at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    /// Shooting did not converge.
    #[error("geodesic boundary-value solve failed after {iterations} iterations (residual {residual:e})")]
    Bvp { iterations: usize, residual: f64 },

    /// Tangent vectors spanning no plane.
    #[error("u and v are linearly dependent; no plane to measure")]
    DegeneratePlane,

    /// Input that makes the requested quantity undefined (zero distances,
    /// degenerate frames, empty schedules).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Contract violation by the caller (wrong dimension, non-orthogonal
    /// direction, tolerance out of range, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Two independent computations of the same quantity disagree.
    #[error("consistency failure: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for failures of the numerical solvers (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::DomainExit { .. } | Error::Integrator { .. } | Error::Bvp { .. }
        )
    }
}
