//! Closed-form steady-state amplitudes, the self-consistent algebraic steady
//! state, and the SH enhancement factor.
//!
//! Notation used throughout:
//!
//! ```text
//! xi1   = i (w1   - w)  + G1
//! xi2   = i (w2   - 2w) + G2
//! beta1 = i (weg1 - 2w) + Geg1
//! beta2 = i (weg2 - 2w) + Geg2
//! ```
//!
//! Steady state of the rotating-frame equations (tilde envelopes):
//!
//! ```text
//! xi1 a1 + 2i chi a1* a2          = eps
//! xi2 a2 + i chi a1^2             = -i f1 r1 - i f2 r2
//! beta1 r1                        = i f1* a2 y1 + i g* y1 r2
//! beta2 r2                        = i f2* a2 y2 + i g* y2 r1
//! Gee_j ree_j                     = -2 Im( (f_j a2* + g r_k*) r_j )
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, IntegratorConfig, SteadyState};
use crate::error::{Error, Result};
use crate::model::{rhs_rotating, DynamicState, Inversions, SystemParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Denominators smaller than this (in drive-scaled units) are reported as
/// exact poles.
pub const DEGENERATE_TOL: f64 = 1e-30;

/// Complex detuning/damping combinations of the four resonators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shorthands {
    pub xi1: Complex64,
    pub xi2: Complex64,
    pub beta1: Complex64,
    pub beta2: Complex64,
}

impl Shorthands {
    pub fn new(p: &SystemParams) -> Self {
        let w = p.omega_drive;
        Self {
            xi1: Complex64::new(p.gamma1, p.omega1 - w),
            xi2: Complex64::new(p.gamma2, p.omega2 - 2.0 * w),
            beta1: Complex64::new(p.gamma_eg1(), p.omega_eg1 - 2.0 * w),
            beta2: Complex64::new(p.gamma_eg2(), p.omega_eg2 - 2.0 * w),
        }
    }
}

/// Single-emitter Fano term `|f_c|^2 y / beta1`. Its imaginary part can cancel
/// the detuning of the SH mode; its real part has the sign of `y`, the same
/// as the `-xi2` damping it joins in the denominator.
pub fn fano_term(params: &SystemParams, y: f64) -> Complex64 {
    params.f1.norm_sqr() * y / Shorthands::new(params).beta1
}

fn checked(num: Complex64, den: Complex64) -> Result<Complex64> {
    let magnitude = den.norm();
    if !(magnitude >= DEGENERATE_TOL) {
        return Err(Error::DegenerateDenominator { magnitude });
    }
    Ok(num / den)
}

/// Two-emitter SH amplitude at frozen inversions, in the standard closed
/// form:
///
/// ```text
///            i chi (b1 b2 + y1 y2 g*^2) a1^2
/// a2 = ------------------------------------------------------------------------
///      (y1|f1|^2 b2 + y2|f2|^2 b1) + i y1 y2 g* (f1 f2* - f2 f1*) - xi2 (b1 b2 + y1 y2 g*^2)
/// ```
///
/// Note the cross term: eliminating the coherences from the steady-state
/// equations produces `f1 f2* + f2 f1*` there instead, so the two forms agree
/// only when one emitter is uncoupled (`f1 f2* = 0`). For real couplings the
/// antisymmetric cross term vanishes identically. See
/// [`alpha2_from_steady_equations`] for the exact elimination.
pub fn alpha2_two_qe(params: &SystemParams, y: Inversions, alpha1_t: Complex64) -> Result<Complex64> {
    let (num, den) = two_qe_parts(params, y, -1.0);
    checked(num * alpha1_t * alpha1_t, den)
}

/// Exact SH amplitude implied by the steady-state equations for `a2`, `r1`,
/// `r2` at frozen inversions and fundamental amplitude.
pub fn alpha2_from_steady_equations(params: &SystemParams, y: Inversions, alpha1_t: Complex64) -> Result<Complex64> {
    let (num, den) = two_qe_parts(params, y, 1.0);
    checked(num * alpha1_t * alpha1_t, den)
}

/// Denominator of [`alpha2_two_qe`]. Its zeros are the poles of the closed
/// form.
pub fn two_qe_denominator(params: &SystemParams, y: Inversions) -> Complex64 {
    two_qe_parts(params, y, -1.0).1
}

fn two_qe_parts(p: &SystemParams, y: Inversions, cross_sign: f64) -> (Complex64, Complex64) {
    let s = Shorthands::new(p);
    let gc = p.g.conj();
    let y12 = y.y1 * y.y2;
    let shared = s.beta1 * s.beta2 + y12 * gc * gc;
    let cross = p.f1 * p.f2.conj() + cross_sign * p.f2 * p.f1.conj();
    let den = (y.y1 * p.f1.norm_sqr() * s.beta2 + y.y2 * p.f2.norm_sqr() * s.beta1) + I * y12 * gc * cross
        - s.xi2 * shared;
    (I * p.chi2 * shared, den)
}

/// Single-emitter SH amplitude with `f_c = f1` (emitter 2 and `g` ignored):
/// `a2 = i chi a1^2 / (|f_c|^2 y / beta1 - xi2)`.
pub fn alpha2_single_qe(params: &SystemParams, y: f64, alpha1_t: Complex64) -> Result<Complex64> {
    let s = Shorthands::new(params);
    let den = params.f1.norm_sqr() * y / s.beta1 - s.xi2;
    checked(I * params.chi2 * alpha1_t * alpha1_t, den)
}

/// SH amplitude of the bare converter, `-i chi a1^2 / xi2`.
pub fn alpha2_bare(params: &SystemParams, alpha1_t: Complex64) -> Complex64 {
    -I * params.chi2 * alpha1_t * alpha1_t / Shorthands::new(params).xi2
}

/// Upper bound on the single-emitter SH amplitude: the bare converter driven
/// exactly on resonance, `chi |a1|^2 / G2`.
pub fn single_qe_ceiling(params: &SystemParams, alpha1_t: Complex64) -> f64 {
    params.chi2 * alpha1_t.norm_sqr() / params.gamma2
}

/// Coherences implied by the emitter steady-state equations at given `a2`
/// and inversions.
fn coherences(p: &SystemParams, s: &Shorthands, y: Inversions, alpha2: Complex64) -> Result<(Complex64, Complex64)> {
    let gc = p.g.conj();
    let det = s.beta1 * s.beta2 + y.y1 * y.y2 * gc * gc;
    let r1 = checked(alpha2 * y.y1 * (I * p.f1.conj() * s.beta2 - gc * p.f2.conj() * y.y2), det)?;
    let r2 = checked(alpha2 * y.y2 * (I * p.f2.conj() * s.beta1 - gc * p.f1.conj() * y.y1), det)?;
    Ok((r1, r2))
}

/// Fundamental amplitude from `xi1 a1 + 2i chi a1* a2 = eps`, solved exactly
/// for `a1` given `a2` (the equation is real-linear in `a1`).
fn fundamental(p: &SystemParams, s: &Shorthands, alpha2: Complex64) -> Result<Complex64> {
    let c = 2.0 * I * p.chi2 * alpha2;
    checked(s.xi1.conj() * p.eps_p - c * p.eps_p.conj(), Complex64::new(s.xi1.norm_sqr() - c.norm_sqr(), 0.0))
}

/// Excited population of an emitter in steady state under an effective
/// field `omega`: the population balance with the coherence eliminated
/// reduces to `ree = s / (1 + 2 s)` with `s = |omega|^2 / |beta|^2`
/// (this uses `Geg = Gee / 2`).
fn saturated_population(omega: Complex64, beta: Complex64) -> f64 {
    let s = omega.norm_sqr() / beta.norm_sqr();
    if s.is_infinite() {
        0.5
    } else {
        s / (1.0 + 2.0 * s)
    }
}

/// The all-ground, empty-mode starting point with the undepleted fundamental.
pub fn initial_guess(params: &SystemParams) -> SteadyState {
    let s = Shorthands::new(params);
    let env = DynamicState {
        alpha1: params.eps_p / s.xi1,
        ..Default::default()
    };
    SteadyState::from_envelopes(&env, f64::INFINITY, false, 0.0)
}

/// Relaxation factor of the population update; halved whenever an iterate
/// moves further than the previous one.
const INITIAL_RELAXATION: f64 = 0.5;
const MIN_RELAXATION: f64 = 1.0 / 1024.0;

/// Solves the steady-state algebraic system by damped fixed-point iteration
/// on the inversions.
///
/// Each sweep (1) takes the current inversions and fundamental amplitude and
/// solves the linear emitter/SH-mode equations exactly for `a2`, `r1`, `r2`,
/// (2) re-solves the fundamental including the `2 chi a1* a2` depletion term
/// (the very first sweep uses the undepleted `eps / xi1`), and (3) updates the
/// populations from their balance equations, mixed into the previous
/// inversions with an adaptive relaxation factor. Stops when the max-norm
/// change of all six components falls below `tol`.
pub fn solve_fixed_point(params: &SystemParams, init: &SteadyState, max_iter: usize, tol: f64) -> Result<SteadyState> {
    params.validate()?;
    let s = Shorthands::new(params);
    let mut y = init.inversions;
    let mut alpha1 = init.alpha1_t;
    let mut current = init.envelopes();
    let mut relax = INITIAL_RELAXATION;
    let mut last_step = f64::INFINITY;

    for iter in 1..=max_iter {
        let alpha2 = alpha2_from_steady_equations(params, y, alpha1)?;
        let (r1, r2) = coherences(params, &s, y, alpha2)?;
        let alpha1_next = fundamental(params, &s, alpha2)?;

        let omega1 = params.f1.conj() * alpha2 + params.g.conj() * r2;
        let omega2 = params.f2.conj() * alpha2 + params.g.conj() * r1;
        let target = Inversions::new(
            2.0 * saturated_population(omega1, s.beta1) - 1.0,
            2.0 * saturated_population(omega2, s.beta2) - 1.0,
        );

        let next = DynamicState {
            alpha1: alpha1_next,
            alpha2,
            rho_ge1: r1,
            rho_ge2: r2,
            rho_ee1: 0.5 * (y.y1 + 1.0),
            rho_ee2: 0.5 * (y.y2 + 1.0),
        };
        let step = diff_norm(&next, &current);
        if !step.is_finite() {
            return Err(Error::NonFinite {
                t: iter as f64,
                reason: "fixed-point iterate became non-finite".into(),
                last_good: Box::new(current),
            });
        }
        let y_step = (target.y1 - y.y1).abs().max((target.y2 - y.y2).abs());
        current = next;
        alpha1 = alpha1_next;
        if step < tol && y_step < tol {
            let residual = rhs_rotating(&current, params).max_norm();
            return Ok(SteadyState::from_envelopes(&current, residual, true, 0.0));
        }
        if y_step > last_step && relax > MIN_RELAXATION {
            relax *= 0.5;
        }
        last_step = y_step;
        y = Inversions::new(
            y.y1 + relax * (target.y1 - y.y1),
            y.y2 + relax * (target.y2 - y.y2),
        );
    }
    let residual = rhs_rotating(&current, params).max_norm();
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last_step,
        last: Box::new(SteadyState::from_envelopes(&current, residual, false, 0.0)),
    })
}

fn diff_norm(a: &DynamicState, b: &DynamicState) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// How a steady state is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SteadyMethod {
    TimeEvolution(IntegratorConfig),
    FixedPoint { max_iter: usize, tol: f64 },
}

impl SteadyMethod {
    pub fn time_evolution() -> Self {
        Self::TimeEvolution(IntegratorConfig::default())
    }

    pub fn fixed_point() -> Self {
        Self::FixedPoint {
            max_iter: 100_000,
            tol: 1e-13,
        }
    }

    /// Steady state of `params`; non-converged runs are errors.
    pub fn solve(&self, params: &SystemParams) -> Result<SteadyState> {
        match *self {
            Self::TimeEvolution(cfg) => {
                let s = integrate(params, &cfg)?;
                if s.converged {
                    Ok(s)
                } else {
                    Err(Error::NotConverged { residual: s.residual })
                }
            }
            Self::FixedPoint { max_iter, tol } => solve_fixed_point(params, &initial_guess(params), max_iter, tol),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveContext {
    pub chi2: f64,
    pub eps_p: Complex64,
}

/// Coupled vs. decoupled steady SH intensity at identical drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhancementReport {
    pub alpha2_coupled: Complex64,
    pub alpha2_bare: Complex64,
    pub intensity_ratio: f64,
    pub drive_context: DriveContext,
    pub coupled: SteadyState,
    pub bare: SteadyState,
}

/// Ratio `|a2|^2 (couplings on) / |a2|^2 (f1 = f2 = g = 0)` of steady states
/// obtained with `method` at the same `chi2` and `eps_p`.
pub fn enhancement(params: &SystemParams, method: &SteadyMethod) -> Result<EnhancementReport> {
    let coupled = method.solve(params)?;
    let bare_params = params.decoupled();
    let bare = if bare_params == *params {
        coupled
    } else {
        method.solve(&bare_params)?
    };
    let intensity_ratio = coupled.alpha2_t.norm_sqr() / bare.alpha2_t.norm_sqr();
    Ok(EnhancementReport {
        alpha2_coupled: coupled.alpha2_t,
        alpha2_bare: bare.alpha2_t,
        intensity_ratio,
        drive_context: DriveContext {
            chi2: params.chi2,
            eps_p: params.eps_p,
        },
        coupled,
        bare,
    })
}

/// Default inversion of emitter 2 that pins the drive strength.
pub const DEFAULT_TARGET_Y2: f64 = -0.764;
/// Accepted distance of the calibrated `y2` from its target.
pub const CALIBRATION_TOL: f64 = 1e-3;
const PRESCAN_POINTS: usize = 6;
const MAX_BISECTIONS: usize = 60;

/// Finds the drive amplitude `|eps_p|` (phase kept, `chi2` fixed) at which the
/// steady-state `y2` hits `target_y2`, by bisection inside `bracket`.
///
/// Before bisecting, `y2` is evaluated on a coarse grid across the bracket;
/// the bracket must produce a sign change of `y2 - target_y2` and `y2` must
/// be monotone on the grid.
pub fn calibrate_drive(
    params: &SystemParams,
    target_y2: f64,
    bracket: (f64, f64),
    method: &SteadyMethod,
) -> Result<SystemParams> {
    let (lo, hi) = bracket;
    let bad = |reason: &str| Error::InvalidParam {
        field: "bracket",
        reason: reason.to_string(),
    };
    if !(target_y2 > -1.0 && target_y2 < 0.0) {
        return Err(Error::InvalidParam {
            field: "target_y2",
            reason: format!("must lie in (-1, 0), got {target_y2}"),
        });
    }
    if !(lo >= 0.0 && hi > lo) {
        return Err(bad("need 0 <= lo < hi"));
    }
    let phase = if params.eps_p.norm() > 0.0 {
        params.eps_p / params.eps_p.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let at = |amp: f64| params.with_drive(phase * amp);
    let miss = |amp: f64| -> Result<f64> { Ok(method.solve(&at(amp))?.inversions.y2 - target_y2) };

    let scan = prescan_y2(params, bracket, method)?;
    let (first, last) = (scan[0].1 - target_y2, scan[PRESCAN_POINTS - 1].1 - target_y2);
    if first.signum() == last.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    let rising = scan.windows(2).all(|w| w[1].1 >= w[0].1);
    let falling = scan.windows(2).all(|w| w[1].1 <= w[0].1);
    if !(rising || falling) {
        return Err(bad("y2 is not monotone in the drive over the bracket"));
    }

    let (mut a, mut b, mut fa) = (lo, hi, first);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        let fm = miss(mid)?;
        if fm.abs() < CALIBRATION_TOL {
            return Ok(at(mid));
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(at(0.5 * (a + b)))
}

/// `y2` of the steady state at evenly spaced drive amplitudes over `bracket`.
pub fn prescan_y2(params: &SystemParams, bracket: (f64, f64), method: &SteadyMethod) -> Result<Vec<(f64, f64)>> {
    let phase = if params.eps_p.norm() > 0.0 {
        params.eps_p / params.eps_p.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    (0..PRESCAN_POINTS)
        .map(|k| {
            let amp = bracket.0 + (bracket.1 - bracket.0) * k as f64 / (PRESCAN_POINTS - 1) as f64;
            Ok((amp, method.solve(&params.with_drive(phase * amp))?.inversions.y2))
        })
        .collect()
}
