//! `fano-shg`: run, search, sweep and validate from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 non-convergence,
//! 4 numerical blow-up, 5 oracle failure.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fano_shg::analytics::{calibrate_drive, initial_guess, solve_fixed_point, SteadyMethod};
use fano_shg::dynamics::{integrate, integrate_with_dump, verify_ansatz, SteadyState, TrajectoryDump};
use fano_shg::explore::{run_search, sweep, write_sweep_csv, write_trace_csv, SearchSpec, SweepRow};
use fano_shg::model::{Fault, SystemParams};
use fano_shg::validate::{componentwise_relative, run_oracles};
use fano_shg::Error;
use num_complex::Complex64;
use serde::Serialize;

use config::{DriveMethod, RunConfig};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_BLOW_UP: u8 = 4;
pub const EXIT_ORACLE: u8 = 5;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::config(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParam { .. } | Error::NoBracket { .. } => EXIT_CONFIG,
            Error::NotConverged { .. } | Error::NoConvergence { .. } => EXIT_NOT_CONVERGED,
            Error::NonFinite { .. } | Error::Stiffness { .. } | Error::DegenerateDenominator { .. } => EXIT_BLOW_UP,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(version, about = "Steady states and parameter search for plasmon / two-emitter second-harmonic generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled preset: paper-optimum, bare, sweep-omega-eg1, crude-search.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel evaluations (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate to steady state, check the ansatz and report the enhancement.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write the sampled trajectory to `trajectory.csv`.
        #[arg(long)]
        dump_trajectory: bool,
    },
    /// Maximize an objective over a box of parameters.
    Search {
        #[command(flatten)]
        common: Common,
        /// Overrides the search seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the objectives along one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in oracle suite.
    Validate {
        /// Output directory for `validate.json`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Corrupt the time-domain equations to confirm the oracles notice.
        #[arg(long)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { common, dump_trajectory } => {
            let cfg = setup(&common)?;
            cmd_run(&cfg, &common.out, dump_trajectory)
        }
        Command::Search { common, seed } => {
            let cfg = setup(&common)?;
            cmd_search(&cfg, &common.out, seed)
        }
        Command::Sweep { common } => {
            let cfg = setup(&common)?;
            cmd_sweep(&cfg, &common.out)
        }
        Command::Validate { out, inject_fault } => {
            create_dir(&out)?;
            cmd_validate(&out, inject_fault)
        }
    }
}

fn setup(common: &Common) -> Result<RunConfig, Failure> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("--threads: {e}")))?;
    }
    let cfg = config::load(common.config.as_deref(), common.preset.as_deref())?;
    create_dir(&common.out)?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, command: &str, body: &T) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    report::write_json(&path, command, body).map_err(|e| Failure::io(&path, e))?;
    Ok(path)
}

#[derive(Serialize)]
struct Calibration {
    target_y2: f64,
    bracket: (f64, f64),
    eps_p: Complex64,
}

#[derive(Serialize)]
struct CalibrationFailure {
    status: &'static str,
    error: String,
    params: SystemParams,
    target_y2: f64,
    bracket: (f64, f64),
}

#[derive(Serialize)]
struct Enhancement {
    alpha2_coupled: Complex64,
    alpha2_bare: Complex64,
    intensity_ratio: f64,
    chi2: f64,
    eps_p: Complex64,
    bare: SteadyState,
}

#[derive(Serialize)]
struct FixedPointCheck {
    steady: Option<SteadyState>,
    error: Option<String>,
    max_relative_difference: Option<f64>,
}

#[derive(Serialize)]
struct RunReport {
    status: &'static str,
    params: SystemParams,
    integrator: fano_shg::dynamics::IntegratorConfig,
    calibration: Option<Calibration>,
    steady: SteadyState,
    /// Undepleted linear response `eps / xi1` of the fundamental mode.
    alpha1_linear: Complex64,
    ansatz_deviation: Option<f64>,
    enhancement: Option<Enhancement>,
    fixed_point: FixedPointCheck,
}

fn cmd_run(cfg: &RunConfig, out: &Path, dump: bool) -> Result<(), Failure> {
    let mut params = cfg.params;
    let mut calibration = None;
    if cfg.drive.calibrate {
        let method = match cfg.drive.method {
            DriveMethod::TimeEvolution => SteadyMethod::TimeEvolution(cfg.integrator),
            DriveMethod::FixedPoint => SteadyMethod::fixed_point(),
        };
        params = match calibrate_drive(&params, cfg.drive.target_y2, cfg.drive.bracket, &method) {
            Ok(p) => p,
            Err(e) => {
                let report = CalibrationFailure {
                    status: "calibration_failed",
                    error: e.to_string(),
                    params,
                    target_y2: cfg.drive.target_y2,
                    bracket: cfg.drive.bracket,
                };
                write_json(out, "run_report.json", "run", &report)?;
                return Err(e.into());
            }
        };
        calibration = Some(Calibration {
            target_y2: cfg.drive.target_y2,
            bracket: cfg.drive.bracket,
            eps_p: params.eps_p,
        });
    }

    let steady = if dump {
        let path = out.join("trajectory.csv");
        let file = File::create(&path).map_err(|e| Failure::io(&path, e))?;
        let mut d = TrajectoryDump::new(BufWriter::new(file), cfg.output.trajectory_spacing, cfg.output.csv_precision)
            .map_err(|e| Failure::io(&path, e))?;
        let s = integrate_with_dump(&params, &cfg.integrator, &mut d)?;
        d.finish().map_err(|e| Failure::io(&path, e))?;
        s
    } else {
        integrate(&params, &cfg.integrator)?
    };

    let fixed_point = match solve_fixed_point(&params, &initial_guess(&params), 100_000, 1e-13) {
        Ok(fp) => FixedPointCheck {
            max_relative_difference: steady.converged.then(|| componentwise_relative(&fp, &steady, 1e-300)),
            steady: Some(fp),
            error: None,
        },
        Err(e) => FixedPointCheck {
            steady: None,
            error: Some(e.to_string()),
            max_relative_difference: None,
        },
    };
    let xi1 = Complex64::new(params.gamma1, params.omega1 - params.omega_drive);
    let mut report = RunReport {
        status: if steady.converged { "converged" } else { "not_converged" },
        params,
        integrator: cfg.integrator,
        calibration,
        steady,
        alpha1_linear: params.eps_p / xi1,
        ansatz_deviation: None,
        enhancement: None,
        fixed_point,
    };

    if steady.converged {
        report.ansatz_deviation = Some(verify_ansatz(&params, &steady, 16)?);
        let bare = integrate(&params.decoupled(), &cfg.integrator)?;
        if bare.converged {
            report.enhancement = Some(Enhancement {
                alpha2_coupled: steady.alpha2_t,
                alpha2_bare: bare.alpha2_t,
                intensity_ratio: steady.alpha2_t.norm_sqr() / bare.alpha2_t.norm_sqr(),
                chi2: params.chi2,
                eps_p: params.eps_p,
                bare,
            });
        } else {
            report.status = "baseline_not_converged";
        }
    }
    let path = write_json(out, "run_report.json", "run", &report)?;

    println!("status          {}", report.status);
    println!("y1, y2          {:.6}, {:.6}", steady.inversions.y1, steady.inversions.y2);
    println!("|rho_ge1|       {:.6e}", steady.rho_ge1_t.norm());
    println!("|rho_ge2|       {:.6e}", steady.rho_ge2_t.norm());
    println!("|alpha2|        {:.6e}", steady.alpha2_t.norm());
    println!("residual        {:.3e}", steady.residual);
    if let Some(d) = report.ansatz_deviation {
        println!("ansatz dev.     {d:.3e}");
    }
    if let Some(e) = &report.enhancement {
        println!("enhancement     {:.6e}", e.intensity_ratio);
    }
    println!("report          {}", path.display());

    match report.status {
        "converged" => Ok(()),
        _ => Err(Failure {
            code: EXIT_NOT_CONVERGED,
            message: format!("{} (residual {:.3e}); partial report written", report.status, steady.residual),
        }),
    }
}

#[derive(Serialize)]
struct SearchSummary<'a> {
    spec: &'a SearchSpec,
    best_point: BTreeMap<&'static str, f64>,
    best_objective: f64,
    best_params: SystemParams,
    eval_count: usize,
    failures: usize,
    poles: usize,
}

fn cmd_search(cfg: &RunConfig, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut spec = cfg
        .search
        .clone()
        .ok_or_else(|| Failure::config("missing [search] section"))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let result = run_search(&cfg.params, &spec, &cfg.integrator)?;
    let path = out.join("search_trace.csv");
    let file = File::create(&path).map_err(|e| Failure::io(&path, e))?;
    write_trace_csv(&result, BufWriter::new(file), cfg.output.csv_precision).map_err(|e| Failure::io(&path, e))?;

    let best_point: BTreeMap<&'static str, f64> =
        result.variables.iter().map(|v| v.name()).zip(result.best_point.iter().copied()).collect();
    let summary = SearchSummary {
        spec: &spec,
        best_point: best_point.clone(),
        best_objective: result.best_objective,
        best_params: result.best_params,
        eval_count: result.eval_count,
        failures: result.failures,
        poles: result.poles,
    };
    let json = write_json(out, "search_summary.json", "search", &summary)?;
    for (name, v) in &best_point {
        println!("{name:<12} {v:.9}");
    }
    println!("objective    {:.9e}", result.best_objective);
    println!(
        "evaluations  {} ({} failed, {} poles)",
        result.eval_count, result.failures, result.poles
    );
    println!("trace        {}", path.display());
    println!("summary      {}", json.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    variable: &'static str,
    rows: usize,
    peak_value: Option<f64>,
    peak_crude: Option<f64>,
    pole_flags: usize,
    table: &'a [SweepRow],
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| Failure::config("missing [sweep] section"))?;
    let values = spec.values()?;
    let rows = sweep(&cfg.params, spec.variable, &values, spec.full.then_some(&cfg.integrator));
    let path = out.join("sweep.csv");
    let file = File::create(&path).map_err(|e| Failure::io(&path, e))?;
    write_sweep_csv(spec.variable, &rows, BufWriter::new(file), cfg.output.csv_precision)
        .map_err(|e| Failure::io(&path, e))?;
    let peak = rows.iter().filter(|r| !r.pole_flag).max_by(|a, b| a.crude.total_cmp(&b.crude));
    let summary = SweepSummary {
        variable: spec.variable.name(),
        rows: rows.len(),
        peak_value: peak.map(|r| r.value),
        peak_crude: peak.map(|r| r.crude),
        pole_flags: rows.iter().filter(|r| r.pole_flag).count(),
        table: &rows,
    };
    let json = write_json(out, "sweep_summary.json", "sweep", &summary)?;
    if let Some(r) = peak {
        println!("peak {} = {:.9} (crude {:.9e})", spec.variable, r.value, r.crude);
    }
    println!("rows {} ({} pole-flagged)", rows.len(), summary.pole_flags);
    println!("table   {}", path.display());
    println!("summary {}", json.display());
    Ok(())
}

fn cmd_validate(out: &Path, inject_fault: bool) -> Result<(), Failure> {
    let fault = if inject_fault {
        Fault::FlipEmitterBackAction
    } else {
        Fault::None
    };
    let report = run_oracles(fault);
    print!("{report}");
    write_json(out, "validate.json", "validate", &report)?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_ORACLE,
            message: "oracle suite failed".into(),
        })
    }
}
