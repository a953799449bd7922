//! Semiclassical equations of motion for the driven plasmon dimer with two
//! emitters attached to its second-harmonic mode.
//!
//! Lab frame, with `y_i = rho_ee_i - rho_gg_i = 2 rho_ee_i - 1`:
//!
//! ```text
//! a1'    = (-i w1 - G1) a1 - 2i chi a1* a2 + eps e^{-i w t}
//! a2'    = (-i w2 - G2) a2 - i chi a1^2 - i f1 r1 - i f2 r2
//! r1'    = (-i weg1 - Geg1) r1 + i f1* a2 y1 + i g* y1 r2
//! r2'    = (-i weg2 - Geg2) r2 + i f2* a2 y2 + i g* y2 r1
//! ree1'  = -Gee1 ree1 + i (f1 a2* r1 - c.c.) + i (g r2* r1 - c.c.)
//! ree2'  = -Gee2 ree2 + i (f2 a2* r2 - c.c.) + i (g r1* r2 - c.c.)
//! ```
//!
//! In the rotating frame every carrier cancels and the bare frequencies are
//! replaced by detunings from `w` (fundamental) or `2w` (everything else).

use num_complex::Complex64;

use super::params::{Fault, SystemParams};
use super::state::DynamicState;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

struct Frequencies {
    w1: f64,
    w2: f64,
    weg1: f64,
    weg2: f64,
}

fn evolve(s: &DynamicState, p: &SystemParams, w: Frequencies, drive: Complex64) -> DynamicState {
    let y1 = 2.0 * s.rho_ee1 - 1.0;
    let y2 = 2.0 * s.rho_ee2 - 1.0;
    let chi = p.chi2;
    let back_action = match p.fault {
        Fault::None => -I,
        Fault::FlipEmitterBackAction => I,
    };

    let alpha1 = Complex64::new(-p.gamma1, -w.w1) * s.alpha1 - 2.0 * I * chi * s.alpha1.conj() * s.alpha2 + drive;
    let alpha2 = Complex64::new(-p.gamma2, -w.w2) * s.alpha2 - I * chi * s.alpha1 * s.alpha1
        + back_action * (p.f1 * s.rho_ge1 + p.f2 * s.rho_ge2);
    let rho_ge1 = Complex64::new(-p.gamma_eg1(), -w.weg1) * s.rho_ge1
        + I * y1 * (p.f1.conj() * s.alpha2 + p.g.conj() * s.rho_ge2);
    let rho_ge2 = Complex64::new(-p.gamma_eg2(), -w.weg2) * s.rho_ge2
        + I * y2 * (p.f2.conj() * s.alpha2 + p.g.conj() * s.rho_ge1);

    // i (z - z*) = -2 Im z
    let pump1 = p.f1 * s.alpha2.conj() * s.rho_ge1 + p.g * s.rho_ge2.conj() * s.rho_ge1;
    let pump2 = p.f2 * s.alpha2.conj() * s.rho_ge2 + p.g * s.rho_ge1.conj() * s.rho_ge2;
    let rho_ee1 = -p.gamma_ee1 * s.rho_ee1 - 2.0 * pump1.im;
    let rho_ee2 = -p.gamma_ee2 * s.rho_ee2 - 2.0 * pump2.im;

    DynamicState {
        alpha1,
        alpha2,
        rho_ge1,
        rho_ge2,
        rho_ee1,
        rho_ee2,
    }
}

/// Time derivative of the lab-frame state at time `t`.
pub fn rhs_lab(state: &DynamicState, params: &SystemParams, t: f64) -> DynamicState {
    let w = Frequencies {
        w1: params.omega1,
        w2: params.omega2,
        weg1: params.omega_eg1,
        weg2: params.omega_eg2,
    };
    let drive = params.eps_p * Complex64::from_polar(1.0, -params.omega_drive * t);
    evolve(state, params, w, drive)
}

/// Time derivative of the rotating-frame envelopes. Autonomous: no explicit
/// time dependence survives the frame change.
pub fn rhs_rotating(state: &DynamicState, params: &SystemParams) -> DynamicState {
    let wd = params.omega_drive;
    let w = Frequencies {
        w1: params.omega1 - wd,
        w2: params.omega2 - 2.0 * wd,
        weg1: params.omega_eg1 - 2.0 * wd,
        weg2: params.omega_eg2 - 2.0 * wd,
    };
    evolve(state, params, w, params.eps_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::state::STATE_DIM;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_params(rng: &mut ChaCha8Rng) -> SystemParams {
        let mut cr = || c(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        let (f1, f2, g, eps_p) = (cr(), cr(), cr(), cr());
        SystemParams {
            omega_drive: 1.0,
            omega1: rng.gen_range(0.8..1.2),
            omega2: rng.gen_range(1.8..2.4),
            omega_eg1: rng.gen_range(1.8..2.8),
            omega_eg2: rng.gen_range(1.8..2.8),
            gamma1: rng.gen_range(0.0..0.05),
            gamma2: rng.gen_range(0.0..0.05),
            gamma_ee1: rng.gen_range(0.0..1e-2),
            gamma_ee2: rng.gen_range(0.0..1e-2),
            f1,
            f2,
            g,
            chi2: rng.gen_range(0.0..0.1),
            eps_p,
            fault: Fault::None,
        }
    }

    fn random_state(rng: &mut ChaCha8Rng) -> DynamicState {
        let mut cr = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (alpha1, alpha2, rho_ge1, rho_ge2) = (cr(), cr(), cr(), cr());
        DynamicState {
            alpha1,
            alpha2,
            rho_ge1,
            rho_ge2,
            rho_ee1: rng.gen_range(0.0..1.0),
            rho_ee2: rng.gen_range(0.0..1.0),
        }
    }

    /// Second, independently written transcription of the lab-frame
    /// equations: complex arithmetic term by term, populations evaluated
    /// through explicit complex conjugate pairs and rho_gg kept explicit.
    fn oracle_lab(s: &DynamicState, p: &SystemParams, t: f64) -> [f64; STATE_DIM] {
        let i = c(0.0, 1.0);
        let (a1, a2, r1, r2) = (s.alpha1, s.alpha2, s.rho_ge1, s.rho_ge2);
        let (ee1, ee2) = (s.rho_ee1, s.rho_ee2);
        let (gg1, gg2) = (1.0 - ee1, 1.0 - ee2);
        let geg1 = p.gamma_ee1 / 2.0;
        let geg2 = p.gamma_ee2 / 2.0;
        let d_a1 = (-i * p.omega1 - p.gamma1) * a1 - i * 2.0 * p.chi2 * a1.conj() * a2
            + p.eps_p * (-i * p.omega_drive * t).exp();
        let d_a2 = (-i * p.omega2 - p.gamma2) * a2 - i * p.chi2 * a1.powi(2) - i * p.f1 * r1 - i * p.f2 * r2;
        let d_r1 = (-i * p.omega_eg1 - geg1) * r1 + i * p.f1.conj() * a2 * (ee1 - gg1) + i * p.g.conj() * (ee1 - gg1) * r2;
        let d_r2 = (-i * p.omega_eg2 - geg2) * r2 + i * p.f2.conj() * a2 * (ee2 - gg2) + i * p.g.conj() * (ee2 - gg2) * r1;
        let d_e1 = -p.gamma_ee1 * ee1
            + i * (p.f1 * a2.conj() * r1 - p.f1.conj() * a2 * r1.conj())
            + i * (p.g * r2.conj() * r1 - p.g.conj() * r2 * r1.conj());
        let d_e2 = -p.gamma_ee2 * ee2
            + i * (p.f2 * a2.conj() * r2 - p.f2.conj() * a2 * r2.conj())
            + i * (p.g * r1.conj() * r2 - p.g.conj() * r1 * r2.conj());
        assert!(d_e1.im.abs() < 1e-12 && d_e2.im.abs() < 1e-12);
        [d_a1.re, d_a1.im, d_a2.re, d_a2.im, d_r1.re, d_r1.im, d_r2.re, d_r2.im, d_e1.re, d_e2.re]
    }

    fn assert_rel_close(a: &[f64; STATE_DIM], b: &[f64; STATE_DIM], rel: f64) {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for k in 0..STATE_DIM {
            assert!((a[k] - b[k]).abs() <= rel * scale, "component {k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn unforced_ground_state_is_fixed() {
        let p = SystemParams::preset_optimum();
        assert_eq!(rhs_lab(&DynamicState::default(), &p, 0.0), DynamicState::default());
        assert_eq!(rhs_rotating(&DynamicState::default(), &p), DynamicState::default());
    }

    #[test]
    fn drive_enters_only_the_fundamental() {
        let p = SystemParams::preset_optimum().with_drive(c(0.003, -0.002));
        let d = rhs_lab(&DynamicState::default(), &p, 0.0);
        assert_eq!(d.alpha1, p.eps_p);
        assert_eq!(d.alpha2, c(0.0, 0.0));
        assert_eq!(d.rho_ge1, c(0.0, 0.0));
        assert_eq!(d.rho_ge2, c(0.0, 0.0));
        assert_eq!((d.rho_ee1, d.rho_ee2), (0.0, 0.0));
    }

    #[test]
    fn lab_rhs_matches_independent_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = random_params(&mut rng);
            let s = random_state(&mut rng);
            let t = rng.gen_range(-50.0..50.0);
            assert_rel_close(&rhs_lab(&s, &p, t).to_array(), &oracle_lab(&s, &p, t), 1e-12);
        }
    }

    #[test]
    fn rotating_rhs_is_lab_rhs_plus_frame_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = random_params(&mut rng);
            let env = random_state(&mut rng);
            let t = rng.gen_range(-100.0..100.0);
            let lab = env.to_lab(p.omega_drive, t);
            let mut via_lab = rhs_lab(&lab, &p, t).from_lab(p.omega_drive, t);
            // d/dt (x e^{i k w t}) = e^{i k w t} (x' + i k w x)
            let w = c(0.0, p.omega_drive);
            via_lab.alpha1 += w * env.alpha1;
            via_lab.alpha2 += 2.0 * w * env.alpha2;
            via_lab.rho_ge1 += 2.0 * w * env.rho_ge1;
            via_lab.rho_ge2 += 2.0 * w * env.rho_ge2;
            assert_rel_close(&via_lab.to_array(), &rhs_rotating(&env, &p).to_array(), 1e-10);
        }
    }

    #[test]
    fn linear_oscillator_fixed_point() {
        let p = SystemParams::bare().with_drive(c(2e-3, 1e-3));
        let p = SystemParams { chi2: 0.0, ..p };
        let xi1 = c(p.gamma1, p.omega1 - p.omega_drive);
        let s = DynamicState {
            alpha1: p.eps_p / xi1,
            ..Default::default()
        };
        assert!(rhs_rotating(&s, &p).max_norm() < 1e-18);
    }

    #[test]
    fn fault_hook_changes_only_the_second_harmonic_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng);
        let s = random_state(&mut rng);
        let good = rhs_rotating(&s, &p);
        let bad = rhs_rotating(&s, &SystemParams { fault: Fault::FlipEmitterBackAction, ..p });
        assert_ne!(good.alpha2, bad.alpha2);
        assert_eq!(good.alpha1, bad.alpha1);
        assert_eq!(good.rho_ge1, bad.rho_ge1);
        assert_eq!(good.rho_ee2, bad.rho_ee2);
    }

    proptest! {
        #[test]
        fn rotating_rhs_is_gauge_covariant(seed in 0u64..10_000, phi in -7.0..7.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let s = random_state(&mut rng);
            let rotated_params = p.with_drive(p.eps_p * Complex64::from_polar(1.0, phi));
            let lhs = rhs_rotating(&s.gauge_rotate(phi), &rotated_params);
            let rhs = rhs_rotating(&s, &p).gauge_rotate(phi);
            let scale = rhs.max_norm().max(1e-300);
            let err = lhs.to_array().iter().zip(rhs.to_array()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(err <= 1e-12 * scale, "err {err} scale {scale}");
        }
    }
}
