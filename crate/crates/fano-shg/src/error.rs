use thiserror::Error;

use crate::dynamics::SteadyState;
use crate::model::DynamicState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    /// The trajectory produced a NaN/inf or left the physical population range.
    #[error("integration blew up at t = {t}: {reason}")]
    NonFinite {
        t: f64,
        reason: String,
        last_good: Box<DynamicState>,
    },

    /// The adaptive step size shrank below the floor. Usually means the
    /// parameter point is too stiff for the explicit integrator; the
    /// fixed-point solver is the better tool there.
    #[error("step size collapsed to {dt:e} at t = {t}; try the fixed-point solver")]
    Stiffness { t: f64, dt: f64 },

    #[error("steady state has not converged (residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("denominator of the steady-state amplitude vanished (|d| = {magnitude:e})")]
    DegenerateDenominator { magnitude: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (step {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Box<SteadyState>,
    },

    #[error("y2 - target does not change sign over drive bracket [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
}
