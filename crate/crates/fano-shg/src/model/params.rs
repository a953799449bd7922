use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of one plasmon / two-emitter configuration.
///
/// Every frequency and rate is measured in units of the drive frequency, so
/// `omega_drive` is 1.0 for all the bundled presets and time is measured in
/// units of `1 / omega_drive`.
///
/// The emitter dephasing rates are not free: each is half the corresponding
/// population decay rate (see [`SystemParams::gamma_eg1`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    #[serde(default = "unit")]
    pub omega_drive: f64,
    /// Resonance of the fundamental plasmon mode.
    pub omega1: f64,
    /// Resonance of the second-harmonic plasmon mode.
    pub omega2: f64,
    pub omega_eg1: f64,
    pub omega_eg2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_ee1: f64,
    pub gamma_ee2: f64,
    /// Emitter 1 coupling to the second-harmonic mode.
    pub f1: Complex64,
    /// Emitter 2 coupling to the second-harmonic mode.
    pub f2: Complex64,
    /// Emitter-emitter coupling.
    pub g: Complex64,
    /// Second-order nonlinearity, in units of frequency.
    pub chi2: f64,
    /// Drive amplitude of the fundamental mode.
    pub eps_p: Complex64,
    /// Test hook for mutation checks of the oracle suite. Never serialized.
    #[serde(skip)]
    pub fault: Fault,
}

fn unit() -> f64 {
    1.0
}

/// Deliberate equation corruptions used to confirm that the validation
/// oracles can detect a wrong right-hand side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Flips the sign of the emitter back-action on the second-harmonic mode
    /// (`-i f_j rho_ge_j` becomes `+i f_j rho_ge_j`) in the time-domain
    /// equations only.
    FlipEmitterBackAction,
}

/// Default second-order nonlinearity used when none is supplied.
pub const DEFAULT_CHI2: f64 = 1e-4;

impl SystemParams {
    /// Reference operating point for the two-emitter super-enhancement:
    /// real, equal emitter couplings, a complex emitter-emitter coupling and
    /// detuned emitters. The drive is left at zero; calibrate it with
    /// [`crate::analytics::calibrate_drive`] or set it explicitly.
    pub fn preset_optimum() -> Self {
        Self {
            omega_drive: 1.0,
            omega1: 1.0,
            omega2: 2.1,
            omega_eg1: 2.111,
            omega_eg2: 2.571,
            gamma1: 0.01,
            gamma2: 0.01,
            gamma_ee1: 1e-5,
            gamma_ee2: 1e-5,
            f1: Complex64::new(-0.0994, 0.0),
            f2: Complex64::new(-0.0994, 0.0),
            g: Complex64::new(0.0066, -0.0360),
            chi2: DEFAULT_CHI2,
            eps_p: Complex64::new(0.0, 0.0),
            fault: Fault::None,
        }
    }

    /// Same resonator as [`preset_optimum`](Self::preset_optimum) with every
    /// emitter coupling switched off.
    pub fn bare() -> Self {
        Self::preset_optimum().decoupled()
    }

    /// Copy with `f1 = f2 = g = 0`; the drive and nonlinearity are kept.
    pub fn decoupled(&self) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            f1: zero,
            f2: zero,
            g: zero,
            ..*self
        }
    }

    pub fn with_drive(&self, eps_p: Complex64) -> Self {
        Self { eps_p, ..*self }
    }

    pub fn gamma_eg1(&self) -> f64 {
        0.5 * self.gamma_ee1
    }

    pub fn gamma_eg2(&self) -> f64 {
        0.5 * self.gamma_ee2
    }

    /// Checks the physical constraints: positive resonances, non-negative
    /// rates, and finite values everywhere. The error names the first
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_drive", self.omega_drive),
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("omega_eg1", self.omega_eg1),
            ("omega_eg2", self.omega_eg2),
        ];
        for (field, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(field, format!("must be a finite positive frequency, got {v}")));
            }
        }
        let rates = [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_ee1", self.gamma_ee1),
            ("gamma_ee2", self.gamma_ee2),
            ("chi2", self.chi2),
        ];
        for (field, v) in rates {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(field, format!("must be a finite non-negative rate, got {v}")));
            }
        }
        let couplings = [("f1", self.f1), ("f2", self.f2), ("g", self.g), ("eps_p", self.eps_p)];
        for (field, v) in couplings {
            if !v.is_finite() {
                return Err(invalid(field, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

fn invalid(field: &'static str, reason: String) -> Error {
    Error::InvalidParam { field, reason }
}
