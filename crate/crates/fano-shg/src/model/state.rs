use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Number of real degrees of freedom in a [`DynamicState`].
pub const STATE_DIM: usize = 10;

/// Slack allowed on the purity bound `|rho_ge|^2 <= rho_ee (1 - rho_ee)`.
pub const PURITY_TOL: f64 = 1e-6;

/// The six evolving quantities: two plasmon amplitudes, two emitter
/// coherences and two excited-state populations. Ground-state populations are
/// always `1 - rho_ee`, so they are never stored.
///
/// The same type carries either lab-frame values or rotating-frame envelopes;
/// which one is meant is tracked by the caller (see [`Frame`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DynamicState {
    pub alpha1: Complex64,
    pub alpha2: Complex64,
    pub rho_ge1: Complex64,
    pub rho_ge2: Complex64,
    pub rho_ee1: f64,
    pub rho_ee2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Lab,
    /// Fundamental envelope rotates at the drive frequency; the
    /// second-harmonic mode and both coherences rotate at twice that.
    Rotating,
}

/// Population inversions `y_i = rho_ee_i - rho_gg_i`; -1 is the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversions {
    pub y1: f64,
    pub y2: f64,
}

impl Inversions {
    pub const GROUND: Self = Self { y1: -1.0, y2: -1.0 };

    pub fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }
}

impl DynamicState {
    pub fn inversions(&self) -> Inversions {
        Inversions {
            y1: 2.0 * self.rho_ee1 - 1.0,
            y2: 2.0 * self.rho_ee2 - 1.0,
        }
    }

    pub fn rho_gg1(&self) -> f64 {
        1.0 - self.rho_ee1
    }

    pub fn rho_gg2(&self) -> f64 {
        1.0 - self.rho_ee2
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.alpha1.re,
            self.alpha1.im,
            self.alpha2.re,
            self.alpha2.im,
            self.rho_ge1.re,
            self.rho_ge1.im,
            self.rho_ge2.re,
            self.rho_ge2.im,
            self.rho_ee1,
            self.rho_ee2,
        ]
    }

    pub fn from_array(a: &[f64; STATE_DIM]) -> Self {
        Self {
            alpha1: Complex64::new(a[0], a[1]),
            alpha2: Complex64::new(a[2], a[3]),
            rho_ge1: Complex64::new(a[4], a[5]),
            rho_ge2: Complex64::new(a[6], a[7]),
            rho_ee1: a[8],
            rho_ee2: a[9],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Largest absolute value over the ten real components.
    pub fn max_norm(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest excess of `|rho_ge_i|^2` over `rho_ee_i (1 - rho_ee_i)`.
    /// Non-positive for physical states.
    pub fn purity_excess(&self) -> f64 {
        let e1 = self.rho_ge1.norm_sqr() - self.rho_ee1 * self.rho_gg1();
        let e2 = self.rho_ge2.norm_sqr() - self.rho_ee2 * self.rho_gg2();
        e1.max(e2)
    }

    pub fn is_physical(&self) -> bool {
        let in_unit = |p: f64| (-PURITY_TOL..=1.0 + PURITY_TOL).contains(&p);
        in_unit(self.rho_ee1) && in_unit(self.rho_ee2) && self.purity_excess() <= PURITY_TOL
    }

    /// Maps rotating-frame envelopes to lab-frame values at time `t`.
    pub fn to_lab(&self, omega_drive: f64, t: f64) -> Self {
        self.rephase(omega_drive * t, -1.0)
    }

    /// Maps lab-frame values at time `t` to rotating-frame envelopes.
    pub fn from_lab(&self, omega_drive: f64, t: f64) -> Self {
        self.rephase(omega_drive * t, 1.0)
    }

    fn rephase(&self, phase: f64, sign: f64) -> Self {
        let once = Complex64::from_polar(1.0, sign * phase);
        let twice = Complex64::from_polar(1.0, sign * 2.0 * phase);
        Self {
            alpha1: self.alpha1 * once,
            alpha2: self.alpha2 * twice,
            rho_ge1: self.rho_ge1 * twice,
            rho_ge2: self.rho_ge2 * twice,
            rho_ee1: self.rho_ee1,
            rho_ee2: self.rho_ee2,
        }
    }

    /// Applies the drive-phase gauge rotation `e^{i phi}` to the fundamental
    /// and `e^{2 i phi}` to everything oscillating at the second harmonic.
    pub fn gauge_rotate(&self, phi: f64) -> Self {
        self.rephase(phi, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn arb_state() -> impl Strategy<Value = DynamicState> {
        (prop::array::uniform8(-2.0..2.0f64), 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, e1, e2)| {
            DynamicState {
                alpha1: c(a[0], a[1]),
                alpha2: c(a[2], a[3]),
                rho_ge1: c(a[4], a[5]),
                rho_ge2: c(a[6], a[7]),
                rho_ee1: e1,
                rho_ee2: e2,
            }
        })
    }

    #[test]
    fn frame_map_at_zero_is_identity() {
        let s = DynamicState {
            alpha1: c(0.3, -0.1),
            alpha2: c(1.0, 2.0),
            rho_ge1: c(-0.2, 0.05),
            rho_ge2: c(0.01, 0.3),
            rho_ee1: 0.2,
            rho_ee2: 0.7,
        };
        assert_eq!(s.to_lab(1.0, 0.0), s);
        assert_eq!(s.from_lab(1.0, 0.0), s);
    }

    #[test]
    fn inversion_of_ground_state() {
        let s = DynamicState::default();
        assert_eq!(s.inversions(), Inversions::GROUND);
        assert_eq!(s.rho_gg1() + s.rho_ee1, 1.0);
    }

    #[test]
    fn purity_bound_flags_overlong_coherence() {
        let mut s = DynamicState {
            rho_ee1: 0.5,
            rho_ge1: c(0.5, 0.0),
            ..Default::default()
        };
        assert!(s.is_physical());
        s.rho_ge1 = c(0.5, 0.01);
        assert!(!s.is_physical());
    }

    proptest! {
        #[test]
        fn frame_round_trip(s in arb_state(), t in -1e4..1e4f64) {
            let back = s.to_lab(1.0, t).from_lab(1.0, t);
            let scale = s.max_norm().max(1.0);
            let err = back.to_array().iter().zip(s.to_array()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(err <= 1e-14 * scale * 4.0, "err {err}");
        }

        #[test]
        fn frame_map_preserves_moduli(s in arb_state(), t in -1e4..1e4f64) {
            let l = s.to_lab(1.0, t);
            for (a, b) in [(l.alpha1, s.alpha1), (l.alpha2, s.alpha2), (l.rho_ge1, s.rho_ge1), (l.rho_ge2, s.rho_ge2)] {
                prop_assert!((a.norm() - b.norm()).abs() <= 1e-14 * b.norm().max(1.0) * 4.0);
            }
            prop_assert_eq!(l.rho_ee1, s.rho_ee1);
            prop_assert_eq!(l.rho_ee2, s.rho_ee2);
        }
    }
}
