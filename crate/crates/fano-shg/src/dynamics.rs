//! Time evolution from the all-ground initial state to steady state.
//!
//! Integration runs in the rotating frame, where the steady state is a fixed
//! point and the step size is set by the detunings and damping rates rather
//! than by the drive frequency.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Dopri5, StepError};
use crate::model::{rhs_lab, rhs_rotating, DynamicState, Inversions, SystemParams, STATE_DIM};

/// Allowed excursion of a population outside `[0, 1]` along a trajectory.
pub const POPULATION_SLACK: f64 = 1e-9;

/// Adaptive steps below this size are treated as a stiffness failure.
pub const STEP_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt_initial: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    /// How long the residual must stay below `convergence_eps`. `None` picks
    /// `20 / min(gamma_ee)` capped at `t_max / 10`.
    pub convergence_window: Option<f64>,
    pub convergence_eps: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_initial: 0.01,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_max: 5e6,
            convergence_window: None,
            convergence_eps: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn window_for(&self, params: &SystemParams) -> f64 {
        self.convergence_window.unwrap_or_else(|| {
            let slowest = params.gamma_ee1.min(params.gamma_ee2);
            (20.0 / slowest).min(self.t_max / 10.0)
        })
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::InvalidParam { field, reason: reason.to_string() });
        if !(self.dt_initial > 0.0) {
            return bad("dt_initial", "must be positive");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol", "must be positive");
        }
        if !(self.abs_tol > 0.0) {
            return bad("abs_tol", "must be positive");
        }
        if !(self.convergence_eps > 0.0) {
            return bad("convergence_eps", "must be positive");
        }
        let window = self.window_for(params);
        if !(window > 0.0) {
            return bad("convergence_window", "must be positive");
        }
        if !(self.t_max > window) {
            return bad("t_max", "must exceed the convergence window");
        }
        Ok(())
    }
}

/// Converged rotating-frame envelopes plus diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub alpha1_t: num_complex::Complex64,
    pub alpha2_t: num_complex::Complex64,
    pub rho_ge1_t: num_complex::Complex64,
    pub rho_ge2_t: num_complex::Complex64,
    pub rho_ee1: f64,
    pub rho_ee2: f64,
    pub inversions: Inversions,
    /// Max-norm of the envelope time derivative at the returned point.
    pub residual: f64,
    pub converged: bool,
    pub t_elapsed: f64,
}

impl SteadyState {
    pub fn from_envelopes(env: &DynamicState, residual: f64, converged: bool, t_elapsed: f64) -> Self {
        Self {
            alpha1_t: env.alpha1,
            alpha2_t: env.alpha2,
            rho_ge1_t: env.rho_ge1,
            rho_ge2_t: env.rho_ge2,
            rho_ee1: env.rho_ee1,
            rho_ee2: env.rho_ee2,
            inversions: env.inversions(),
            residual,
            converged,
            t_elapsed,
        }
    }

    pub fn envelopes(&self) -> DynamicState {
        DynamicState {
            alpha1: self.alpha1_t,
            alpha2: self.alpha2_t,
            rho_ge1: self.rho_ge1_t,
            rho_ge2: self.rho_ge2_t,
            rho_ee1: self.rho_ee1,
            rho_ee2: self.rho_ee2,
        }
    }
}

/// Samples a trajectory to CSV at a fixed minimum time spacing.
pub struct TrajectoryDump<W: Write> {
    writer: csv::Writer<W>,
    spacing: f64,
    next_t: f64,
    precision: usize,
}

pub const TRAJECTORY_HEADER: [&str; 11] = [
    "t",
    "alpha1_re",
    "alpha1_im",
    "alpha2_re",
    "alpha2_im",
    "rho_ge1_re",
    "rho_ge1_im",
    "rho_ge2_re",
    "rho_ge2_im",
    "rho_ee1",
    "rho_ee2",
];

impl<W: Write> TrajectoryDump<W> {
    pub fn new(inner: W, spacing: f64, precision: usize) -> std::io::Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(TRAJECTORY_HEADER)?;
        Ok(Self {
            writer,
            spacing,
            next_t: 0.0,
            precision,
        })
    }

    fn record(&mut self, t: f64, y: &[f64; STATE_DIM]) -> std::io::Result<()> {
        if t < self.next_t {
            return Ok(());
        }
        self.next_t = t + self.spacing;
        let p = self.precision;
        let row = std::iter::once(t).chain(y.iter().copied()).map(|v| format!("{v:.p$e}"));
        self.writer.write_record(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| e.into_error())
    }
}

fn step_error(e: StepError, last_good: &[f64; STATE_DIM]) -> Error {
    match e {
        StepError::StepTooSmall { t, h } => Error::Stiffness { t, dt: h },
        StepError::NonFinite { t } => Error::NonFinite {
            t,
            reason: "non-finite state".into(),
            last_good: Box::new(DynamicState::from_array(last_good)),
        },
    }
}

fn population_violation(y: &[f64; STATE_DIM]) -> Option<f64> {
    [y[8], y[9]]
        .into_iter()
        .find(|p| !(-POPULATION_SLACK..=1.0 + POPULATION_SLACK).contains(p))
}

/// Time-evolves from the ground state with empty modes until the envelopes
/// stop moving, or `t_max` is reached (then `converged` is false).
pub fn integrate(params: &SystemParams, config: &IntegratorConfig) -> Result<SteadyState> {
    integrate_inner::<std::io::Sink>(params, config, None)
}

/// [`integrate`] with the trajectory sampled into `dump`.
pub fn integrate_with_dump<W: Write>(
    params: &SystemParams,
    config: &IntegratorConfig,
    dump: &mut TrajectoryDump<W>,
) -> Result<SteadyState> {
    integrate_inner(params, config, Some(dump))
}

fn integrate_inner<W: Write>(
    params: &SystemParams,
    config: &IntegratorConfig,
    mut dump: Option<&mut TrajectoryDump<W>>,
) -> Result<SteadyState> {
    params.validate()?;
    config.validate(params)?;
    let window = config.window_for(params);

    let mut rhs = |_t: f64, y: &[f64; STATE_DIM]| rhs_rotating(&DynamicState::from_array(y), params).to_array();
    let mut stepper = Dopri5::new(config.rel_tol, config.abs_tol, config.dt_initial).with_h_min(STEP_FLOOR);
    let mut t = 0.0;
    let mut y = [0.0; STATE_DIM];
    let mut quiet_since: Option<f64> = None;
    let mut residual = f64::INFINITY;
    let mut failure: Option<Error> = None;
    let mut last_good = y;
    if let Some(d) = dump.as_deref_mut() {
        d.record(0.0, &y).map_err(io_failure)?;
    }

    let run = stepper.integrate(&mut rhs, &mut t, &mut y, config.t_max, |t, y| {
        if let Some(p) = population_violation(y) {
            failure = Some(Error::NonFinite {
                t,
                reason: format!("population {p} left [0, 1]"),
                last_good: Box::new(DynamicState::from_array(&last_good)),
            });
            return false;
        }
        last_good = *y;
        if let Some(d) = dump.as_deref_mut() {
            if let Err(e) = d.record(t, y) {
                failure = Some(io_failure(e));
                return false;
            }
        }
        residual = rhs_rotating(&DynamicState::from_array(y), params).max_norm();
        if residual < config.convergence_eps {
            let since = *quiet_since.get_or_insert(t);
            t - since < window
        } else {
            quiet_since = None;
            true
        }
    });
    run.map_err(|e| step_error(e, &last_good))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let converged = quiet_since.is_some_and(|s| t - s >= window);
    Ok(SteadyState::from_envelopes(&DynamicState::from_array(&y), residual, converged, t))
}

fn io_failure(e: std::io::Error) -> Error {
    Error::NonFinite {
        t: f64::NAN,
        reason: format!("trajectory dump failed: {e}"),
        last_good: Box::default(),
    }
}

/// Integrates the lab-frame equations from `state` at `t0` to `t1`.
pub fn evolve_lab(
    params: &SystemParams,
    state: &DynamicState,
    t0: f64,
    t1: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<DynamicState> {
    let mut rhs = |t: f64, y: &[f64; STATE_DIM]| rhs_lab(&DynamicState::from_array(y), params, t).to_array();
    let mut stepper = Dopri5::new(rel_tol, abs_tol, 1e-3).with_h_max(0.05);
    let (mut t, mut y) = (t0, state.to_array());
    let start = y;
    stepper
        .integrate(&mut rhs, &mut t, &mut y, t1, |_, _| true)
        .map_err(|e| step_error(e, &start))?;
    Ok(DynamicState::from_array(&y))
}

/// Integrates the rotating-frame equations from `state` for a duration `dt`.
pub fn evolve_rotating(
    params: &SystemParams,
    state: &DynamicState,
    dt: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<DynamicState> {
    let mut rhs = |_t: f64, y: &[f64; STATE_DIM]| rhs_rotating(&DynamicState::from_array(y), params).to_array();
    let mut stepper = Dopri5::new(rel_tol, abs_tol, 1e-3);
    let (mut t, mut y) = (0.0, state.to_array());
    let start = y;
    stepper
        .integrate(&mut rhs, &mut t, &mut y, dt, |_, _| true)
        .map_err(|e| step_error(e, &start))?;
    Ok(DynamicState::from_array(&y))
}

/// Continues a converged run in the lab frame for one drive period and
/// reports how far the demodulated amplitudes drift from constancy.
///
/// The value is the largest `|x(t) - x(0)| / |x(0)|` over the four complex
/// envelopes and two populations at `t_probe_count` evenly spaced instants.
/// Components that are identically zero contribute nothing.
pub fn verify_ansatz(params: &SystemParams, steady: &SteadyState, t_probe_count: usize) -> Result<f64> {
    if !steady.converged {
        return Err(Error::NotConverged {
            residual: steady.residual,
        });
    }
    let env0 = steady.envelopes();
    let period = 2.0 * PI / params.omega_drive;
    let floor = 1e-12 * env0.max_norm();
    let reference = component_moduli(&env0);
    let mut state = env0.to_lab(params.omega_drive, 0.0);
    let mut t = 0.0;
    let mut worst: f64 = 0.0;
    let probes = t_probe_count.max(1);
    for k in 1..=probes {
        let t_next = period * k as f64 / probes as f64;
        state = evolve_lab(params, &state, t, t_next, 1e-12, 1e-15)?;
        t = t_next;
        let env = state.from_lab(params.omega_drive, t);
        let diffs = component_diffs(&env, &env0);
        for (d, r) in diffs.iter().zip(reference) {
            if r > floor {
                worst = worst.max(d / r);
            } else if *d > floor {
                worst = worst.max(1.0);
            }
        }
    }
    Ok(worst)
}

fn component_moduli(s: &DynamicState) -> [f64; 6] {
    [
        s.alpha1.norm(),
        s.alpha2.norm(),
        s.rho_ge1.norm(),
        s.rho_ge2.norm(),
        s.rho_ee1.abs(),
        s.rho_ee2.abs(),
    ]
}

fn component_diffs(a: &DynamicState, b: &DynamicState) -> [f64; 6] {
    [
        (a.alpha1 - b.alpha1).norm(),
        (a.alpha2 - b.alpha2).norm(),
        (a.rho_ge1 - b.rho_ge1).norm(),
        (a.rho_ge2 - b.rho_ge2).norm(),
        (a.rho_ee1 - b.rho_ee1).abs(),
        (a.rho_ee2 - b.rho_ee2).abs(),
    ]
}
