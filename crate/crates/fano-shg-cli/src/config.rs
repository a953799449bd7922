//! TOML run configuration and bundled presets.
//!
//! A config file may name a `preset` to start from; every section it sets
//! replaces the preset's section, except `[params]`, which overrides single
//! fields. Without a preset the parameters start from the decoupled `bare`
//! set. All frequencies and rates are in units of the drive frequency.

use std::path::Path;

use fano_shg::analytics::DEFAULT_TARGET_Y2;
use fano_shg::dynamics::IntegratorConfig;
use fano_shg::explore::{SearchSpec, Variable};
use fano_shg::model::SystemParams;
use num_complex::Complex64;
use serde::Deserialize;

use crate::Failure;

pub const PRESETS: [(&str, &str); 4] = [
    ("paper-optimum", include_str!("../presets/paper-optimum.toml")),
    ("bare", include_str!("../presets/bare.toml")),
    ("sweep-omega-eg1", include_str!("../presets/sweep-omega-eg1.toml")),
    ("crude-search", include_str!("../presets/crude-search.toml")),
];

/// Config file as written; every section optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub params: Option<ParamsOverride>,
    pub drive: Option<DriveSpec>,
    pub integrator: Option<IntegratorConfig>,
    pub search: Option<SearchSpec>,
    pub sweep: Option<SweepSpec>,
    pub output: Option<OutputSpec>,
}

/// Field-wise overrides of [`SystemParams`]. Complex values are `[re, im]`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsOverride {
    pub omega_drive: Option<f64>,
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub omega_eg1: Option<f64>,
    pub omega_eg2: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub gamma_ee1: Option<f64>,
    pub gamma_ee2: Option<f64>,
    pub f1: Option<Complex64>,
    pub f2: Option<Complex64>,
    pub g: Option<Complex64>,
    pub chi2: Option<f64>,
    pub eps_p: Option<Complex64>,
}

macro_rules! merge_fields {
    ($dst:expr, $src:expr; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl ParamsOverride {
    fn overlay(&mut self, top: &ParamsOverride) {
        merge_fields!(self, top; omega_drive, omega1, omega2, omega_eg1, omega_eg2, gamma1, gamma2,
            gamma_ee1, gamma_ee2, f1, f2, g, chi2, eps_p);
    }

    pub fn apply(&self, base: SystemParams) -> SystemParams {
        let mut p = base;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(omega_drive, omega1, omega2, omega_eg1, omega_eg2, gamma1, gamma2, gamma_ee1, gamma_ee2, f1, f2, g, chi2, eps_p);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMethod {
    TimeEvolution,
    FixedPoint,
}

/// How the drive amplitude is chosen. With `calibrate = false` the
/// `eps_p` parameter is used as given.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    #[serde(default)]
    pub calibrate: bool,
    #[serde(default = "default_target")]
    pub target_y2: f64,
    #[serde(default = "default_bracket")]
    pub bracket: (f64, f64),
    #[serde(default = "default_method")]
    pub method: DriveMethod,
}

fn default_target() -> f64 {
    DEFAULT_TARGET_Y2
}

fn default_bracket() -> (f64, f64) {
    (0.0, 0.1)
}

fn default_method() -> DriveMethod {
    DriveMethod::TimeEvolution
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self {
            calibrate: false,
            target_y2: default_target(),
            bracket: default_bracket(),
            method: default_method(),
        }
    }
}

/// One-axis sweep. Either list `values` or give `start`, `stop`, `points`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: Variable,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    /// Also compute the time-evolved enhancement at every point.
    #[serde(default)]
    pub full: bool,
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>, Failure> {
        match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) => Ok(match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            }),
            _ => Err(Failure::config("sweep: give either `values` or all of `start`, `stop`, `points`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_precision")]
    pub csv_precision: usize,
    /// Minimum time between trajectory samples.
    #[serde(default = "default_spacing")]
    pub trajectory_spacing: f64,
}

fn default_precision() -> usize {
    12
}

fn default_spacing() -> f64 {
    100.0
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            csv_precision: default_precision(),
            trajectory_spacing: default_spacing(),
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SystemParams,
    pub drive: DriveSpec,
    pub integrator: IntegratorConfig,
    pub search: Option<SearchSpec>,
    pub sweep: Option<SweepSpec>,
    pub output: OutputSpec,
}

/// Parses TOML, reporting the dotted field path and line of the first error.
pub fn parse(text: &str, origin: &str) -> Result<RawConfig, Failure> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner();
        let line = inner
            .span()
            .map(|s| format!(" (line {})", text[..s.start.min(text.len())].matches('\n').count() + 1))
            .unwrap_or_default();
        Failure::config(format!("{origin}: field `{path}`{line}: {}", inner.message()))
    })
}

pub fn preset(name: &str) -> Result<RawConfig, Failure> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Failure::config(format!("unknown preset `{name}` (known: {})", known.join(", ")))
    })?;
    parse(text, &format!("preset {name}"))
}

/// Loads `--config` and/or `--preset` and resolves them into a [`RunConfig`].
pub fn load(config: Option<&Path>, preset_flag: Option<&str>) -> Result<RunConfig, Failure> {
    let mut raw = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            parse(&text, &path.display().to_string())?
        }
        None => RawConfig::default(),
    };
    match (&raw.preset, preset_flag) {
        (Some(a), Some(b)) if a != b => {
            return Err(Failure::config(format!("config names preset `{a}` but --preset is `{b}`")));
        }
        (None, Some(b)) => raw.preset = Some(b.to_string()),
        _ => {}
    }
    resolve(layered(raw, 0)?)
}

/// Expands the `preset` chain, innermost first.
fn layered(top: RawConfig, depth: usize) -> Result<RawConfig, Failure> {
    let Some(name) = top.preset.clone() else {
        return Ok(top);
    };
    if depth > PRESETS.len() {
        return Err(Failure::config(format!("preset chain through `{name}` does not terminate")));
    }
    let mut base = layered(preset(&name)?, depth + 1)?;
    let mut params = base.params.take().unwrap_or_default();
    if let Some(p) = &top.params {
        params.overlay(p);
    }
    Ok(RawConfig {
        preset: None,
        params: Some(params),
        drive: top.drive.or(base.drive),
        integrator: top.integrator.or(base.integrator),
        search: top.search.or(base.search),
        sweep: top.sweep.or(base.sweep),
        output: top.output.or(base.output),
    })
}

fn resolve(raw: RawConfig) -> Result<RunConfig, Failure> {
    let params = raw.params.unwrap_or_default().apply(SystemParams::bare());
    params.validate().map_err(|e| Failure::config(format!("params: {e}")))?;
    let integrator = raw.integrator.unwrap_or_default();
    integrator
        .validate(&params)
        .map_err(|e| Failure::config(format!("integrator: {e}")))?;
    if let Some(s) = &raw.search {
        s.validate().map_err(|e| Failure::config(format!("search: {e}")))?;
    }
    Ok(RunConfig {
        params,
        drive: raw.drive.unwrap_or_default(),
        integrator,
        search: raw.search,
        sweep: raw.sweep,
        output: raw.output.unwrap_or_default(),
    })
}
