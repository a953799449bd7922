//! Parameter sweeps and derivative-free maximization of the SH response.
//!
//! Two objectives are available. The crude one is the magnitude of the
//! two-emitter closed-form coefficient of `a1^2` with both inversions frozen
//! at -1; it costs a handful of complex multiplications. The full one is the
//! time-evolved enhancement ratio and costs two long integrations.

mod simplex;

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{alpha2_two_qe, two_qe_denominator, enhancement, SteadyMethod};
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::model::{Inversions, SystemParams};
use simplex::Simplex;

/// A tunable coordinate of [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    F1Re,
    F1Im,
    F2Re,
    F2Im,
    GRe,
    GIm,
    OmegaEg1,
    OmegaEg2,
}

impl Variable {
    pub const ALL: [Variable; 8] = [
        Self::F1Re,
        Self::F1Im,
        Self::F2Re,
        Self::F2Im,
        Self::GRe,
        Self::GIm,
        Self::OmegaEg1,
        Self::OmegaEg2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::F1Re => "f1_re",
            Self::F1Im => "f1_im",
            Self::F2Re => "f2_re",
            Self::F2Im => "f2_im",
            Self::GRe => "g_re",
            Self::GIm => "g_im",
            Self::OmegaEg1 => "omega_eg1",
            Self::OmegaEg2 => "omega_eg2",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn get(self, p: &SystemParams) -> f64 {
        match self {
            Self::F1Re => p.f1.re,
            Self::F1Im => p.f1.im,
            Self::F2Re => p.f2.re,
            Self::F2Im => p.f2.im,
            Self::GRe => p.g.re,
            Self::GIm => p.g.im,
            Self::OmegaEg1 => p.omega_eg1,
            Self::OmegaEg2 => p.omega_eg2,
        }
    }

    pub fn set(self, p: &mut SystemParams, v: f64) {
        match self {
            Self::F1Re => p.f1.re = v,
            Self::F1Im => p.f1.im = v,
            Self::F2Re => p.f2.re = v,
            Self::F2Im => p.f2.im = v,
            Self::GRe => p.g.re = v,
            Self::GIm => p.g.im = v,
            Self::OmegaEg1 => p.omega_eg1 = v,
            Self::OmegaEg2 => p.omega_eg2 = v,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableRange {
    pub name: Variable,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Grid,
    NelderMeadLike,
    RandomRestart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    CrudeEq9,
    FullSteadyState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub variables: Vec<VariableRange>,
    pub strategy: Strategy,
    pub objective: Objective,
    #[serde(default = "one")]
    pub restarts: usize,
    pub max_evals: usize,
    #[serde(default)]
    pub seed: u64,
    /// Nodes per axis for [`Strategy::Grid`].
    #[serde(default = "three")]
    pub grid_points: usize,
    /// Restrict to real, equal emitter couplings: `f1_re` drives both
    /// `f1` and `f2`, imaginary parts are held at zero.
    #[serde(default)]
    pub tie_real_couplings: bool,
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

/// Default search box: couplings within 0.2 of zero, emitter resonances in
/// `[1.8, 2.8]`.
pub fn default_bounds(v: Variable) -> (f64, f64) {
    match v {
        Variable::OmegaEg1 | Variable::OmegaEg2 => (1.8, 2.8),
        _ => (-0.2, 0.2),
    }
}

impl SearchSpec {
    /// The five-variable crude search: tied real `f`, complex `g`
    /// and both emitter resonances, over the default box.
    pub fn crude_five_variable(strategy: Strategy, max_evals: usize, seed: u64) -> Self {
        let vars = [Variable::F1Re, Variable::GRe, Variable::GIm, Variable::OmegaEg1, Variable::OmegaEg2];
        Self {
            variables: vars
                .into_iter()
                .map(|name| {
                    let (lower, upper) = default_bounds(name);
                    VariableRange { name, lower, upper }
                })
                .collect(),
            strategy,
            objective: Objective::CrudeEq9,
            restarts: 4,
            max_evals,
            seed,
            grid_points: 3,
            tie_real_couplings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::InvalidParam { field, reason });
        if self.variables.is_empty() {
            return bad("variables", "at least one variable is required".into());
        }
        for (i, v) in self.variables.iter().enumerate() {
            if !(v.lower < v.upper) || !v.lower.is_finite() || !v.upper.is_finite() {
                return bad("variables", format!("{}: need finite lower < upper", v.name));
            }
            if self.variables[..i].iter().any(|w| w.name == v.name) {
                return bad("variables", format!("{} listed twice", v.name));
            }
            if self.tie_real_couplings && matches!(v.name, Variable::F1Im | Variable::F2Re | Variable::F2Im) {
                return bad("variables", format!("{} is fixed when couplings are tied", v.name));
            }
        }
        if self.max_evals == 0 {
            return bad("max_evals", "must be positive".into());
        }
        if self.restarts == 0 {
            return bad("restarts", "must be positive".into());
        }
        if self.grid_points == 0 {
            return bad("grid_points", "must be positive".into());
        }
        Ok(())
    }

    /// Parameters at search coordinates `x` (ordered like `variables`).
    pub fn apply(&self, base: &SystemParams, x: &[f64]) -> SystemParams {
        let mut p = *base;
        for (v, &val) in self.variables.iter().zip(x) {
            v.name.set(&mut p, val);
        }
        if self.tie_real_couplings {
            p.f1 = Complex64::new(p.f1.re, 0.0);
            p.f2 = p.f1;
        }
        p
    }

    fn lower(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.lower).collect()
    }

    fn upper(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.upper).collect()
    }
}

/// Value of the frozen-inversion objective. Exact poles report `+inf` with
/// `pole` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrudeValue {
    pub value: f64,
    pub pole: bool,
}

/// `|a2 / a1^2|` from the two-emitter closed form with `y1 = y2 = -1`.
pub fn objective_crude(params: &SystemParams) -> CrudeValue {
    match alpha2_two_qe(params, Inversions::GROUND, Complex64::new(1.0, 0.0)) {
        Ok(a) => CrudeValue {
            value: a.norm(),
            pole: false,
        },
        Err(_) => CrudeValue {
            value: f64::INFINITY,
            pole: true,
        },
    }
}

/// Time-evolved enhancement ratio; `-inf` when either run fails or does not
/// converge.
pub fn objective_full(params: &SystemParams, config: &IntegratorConfig) -> f64 {
    match enhancement(params, &SteadyMethod::TimeEvolution(*config)) {
        Ok(r) => r.intensity_ratio,
        Err(_) => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub point: Vec<f64>,
    pub objective: f64,
    pub pole: bool,
    pub failed: bool,
}

impl TraceEntry {
    pub fn is_success(&self) -> bool {
        !self.pole && !self.failed && self.objective.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub variables: Vec<Variable>,
    pub best_params: SystemParams,
    pub best_point: Vec<f64>,
    /// Largest finite objective over the trace; `-inf` if nothing succeeded.
    pub best_objective: f64,
    pub trace: Vec<TraceEntry>,
    pub eval_count: usize,
    /// Diverged or non-converged evaluations.
    pub failures: usize,
    /// Evaluations that landed on an exact pole of the closed form.
    pub poles: usize,
}

struct Evaluator<'a> {
    base: &'a SystemParams,
    spec: &'a SearchSpec,
    integrator: &'a IntegratorConfig,
}

impl Evaluator<'_> {
    fn eval(&self, x: &[f64]) -> TraceEntry {
        let p = self.spec.apply(self.base, x);
        let (objective, pole, failed) = match self.spec.objective {
            Objective::CrudeEq9 => {
                let c = objective_crude(&p);
                (c.value, c.pole, false)
            }
            Objective::FullSteadyState => {
                let v = objective_full(&p, self.integrator);
                (v, false, !v.is_finite())
            }
        };
        TraceEntry {
            point: x.to_vec(),
            objective,
            pole,
            failed,
        }
    }

    /// Runs a budgeted simplex from `start`, recording every evaluation.
    fn polish(&self, start: &[f64], budget: usize) -> Vec<TraceEntry> {
        let (lower, upper) = (self.spec.lower(), self.spec.upper());
        let simplex = Simplex {
            lower: &lower,
            upper: &upper,
            initial_step: 0.05,
            f_tol: 1e-12,
            max_iter: usize::MAX,
        };
        let mut trace = Vec::new();
        simplex.maximize(start, |x| {
            if trace.len() >= budget {
                return None;
            }
            let e = self.eval(x);
            let score = if e.is_success() { e.objective } else { f64::NEG_INFINITY };
            trace.push(e);
            Some(score)
        });
        trace
    }
}

/// Splits `total` evaluations over `parts` runs as evenly as possible.
fn shares(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|k| total / parts + usize::from(k < total % parts)).collect()
}

/// Executes the search described by `spec` around `base`. Deterministic for
/// a given seed regardless of thread count.
pub fn run_search(base: &SystemParams, spec: &SearchSpec, integrator: &IntegratorConfig) -> Result<SearchResult> {
    spec.validate()?;
    base.validate()?;
    let ev = Evaluator { base, spec, integrator };
    let (lower, upper) = (spec.lower(), spec.upper());
    let dim = spec.variables.len();

    let trace: Vec<TraceEntry> = match spec.strategy {
        Strategy::Grid => {
            let n = spec.grid_points;
            let total = n.checked_pow(dim as u32).unwrap_or(usize::MAX).min(spec.max_evals);
            let node = |axis: usize, k: usize| {
                if n == 1 {
                    0.5 * (lower[axis] + upper[axis])
                } else {
                    lower[axis] + (upper[axis] - lower[axis]) * k as f64 / (n - 1) as f64
                }
            };
            (0..total)
                .into_par_iter()
                .map(|idx| {
                    // last variable varies fastest
                    let mut rem = idx;
                    let mut x = vec![0.0; dim];
                    for axis in (0..dim).rev() {
                        x[axis] = node(axis, rem % n);
                        rem /= n;
                    }
                    ev.eval(&x)
                })
                .collect()
        }
        Strategy::NelderMeadLike | Strategy::RandomRestart => {
            let budgets = shares(spec.max_evals, spec.restarts);
            let origin: Vec<f64> = spec.variables.iter().map(|v| v.name.get(base).clamp(v.lower, v.upper)).collect();
            let starts: Vec<Vec<f64>> = (0..spec.restarts)
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(r as u64));
                    (0..dim)
                        .map(|i| match spec.strategy {
                            Strategy::NelderMeadLike if r == 0 => origin[i],
                            Strategy::NelderMeadLike => {
                                let w = 0.1 * (upper[i] - lower[i]);
                                (origin[i] + rng.gen_range(-w..w)).clamp(lower[i], upper[i])
                            }
                            _ => rng.gen_range(lower[i]..upper[i]),
                        })
                        .collect()
                })
                .collect();
            let runs: Vec<Vec<TraceEntry>> = starts
                .par_iter()
                .zip(budgets.par_iter())
                .map(|(start, &budget)| if budget == 0 { Vec::new() } else { ev.polish(start, budget) })
                .collect();
            runs.into_iter().flatten().collect()
        }
    };

    let best = trace
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_success())
        .fold(None::<(usize, f64)>, |acc, (i, e)| match acc {
            Some((_, v)) if v >= e.objective => acc,
            _ => Some((i, e.objective)),
        });
    let (best_point, best_objective) = match best {
        Some((i, v)) => (trace[i].point.clone(), v),
        None => (spec.variables.iter().map(|v| v.name.get(base)).collect(), f64::NEG_INFINITY),
    };
    Ok(SearchResult {
        variables: spec.variables.iter().map(|v| v.name).collect(),
        best_params: spec.apply(base, &best_point),
        best_point,
        best_objective,
        eval_count: trace.len(),
        failures: trace.iter().filter(|e| e.failed).count(),
        poles: trace.iter().filter(|e| e.pole).count(),
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub crude: f64,
    pub full: Option<f64>,
    /// Set on an exact pole, and on both rows bracketing a sign change of the
    /// imaginary part of the closed-form denominator: the detuning is
    /// cancelled between them, which is the only place a pole can form.
    pub pole_flag: bool,
}

/// Evaluates the objectives along one coordinate, holding the rest of
/// `params` fixed. The full objective is computed only when `full` is given.
pub fn sweep(params: &SystemParams, variable: Variable, values: &[f64], full: Option<&IntegratorConfig>) -> Vec<SweepRow> {
    let points: Vec<SystemParams> = values
        .iter()
        .map(|&v| {
            let mut p = *params;
            variable.set(&mut p, v);
            p
        })
        .collect();
    let dens: Vec<Complex64> = points.iter().map(|p| two_qe_denominator(p, Inversions::GROUND)).collect();
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .zip(values.par_iter())
        .map(|(p, &value)| {
            let c = objective_crude(p);
            SweepRow {
                value,
                crude: c.value,
                full: full.map(|cfg| objective_full(p, cfg)),
                pole_flag: c.pole,
            }
        })
        .collect();
    for k in 1..rows.len() {
        if dens[k - 1].im * dens[k].im < 0.0 {
            rows[k - 1].pole_flag = true;
            rows[k].pole_flag = true;
        }
    }
    rows
}

/// Writes one row per evaluation: index, coordinates, objective, flags.
pub fn write_trace_csv<W: Write>(result: &SearchResult, out: W, precision: usize) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["eval".to_string()];
    header.extend(result.variables.iter().map(|v| v.name().to_string()));
    header.extend(["objective", "pole", "failed"].map(String::from));
    w.write_record(&header)?;
    for (i, e) in result.trace.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(e.point.iter().map(|v| fmt_float(*v, precision)));
        row.push(fmt_float(e.objective, precision));
        row.push(e.pole.to_string());
        row.push(e.failed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the sweep table with header `<variable>,objective_crude,objective_full,pole_flag`.
pub fn write_sweep_csv<W: Write>(variable: Variable, rows: &[SweepRow], out: W, precision: usize) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([variable.name(), "objective_crude", "objective_full", "pole_flag"])?;
    for r in rows {
        w.write_record([
            fmt_float(r.value, precision),
            fmt_float(r.crude, precision),
            r.full.map(|v| fmt_float(v, precision)).unwrap_or_default(),
            r.pole_flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scientific notation with `precision` significant digits.
pub fn fmt_float(v: f64, precision: usize) -> String {
    if v.is_finite() {
        format!("{:.*e}", precision.saturating_sub(1), v)
    } else {
        v.to_string()
    }
}
