//! Explicit Runge-Kutta integrators over fixed-size real state vectors.
//!
//! [`Dopri5`] is the Dormand-Prince 5(4) embedded pair with FSAL and a PI step
//! controller (Hairer, Norsett & Wanner). [`rk4_step`] is the classical
//! fixed-step fourth-order scheme, kept for validation runs.

// Dormand-Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b_hat
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller (beta = 0.04 as recommended for DOPRI5).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepError {
    /// Step size fell below the configured floor while still rejecting.
    StepTooSmall { t: f64, h: f64 },
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

/// Adaptive Dormand-Prince 5(4) stepper. Keeps the FSAL derivative and the
/// controller memory between calls, so one instance should follow one
/// trajectory.
#[derive(Debug, Clone)]
pub struct Dopri5<const N: usize> {
    pub rtol: f64,
    pub atol: f64,
    pub h: f64,
    pub h_min: f64,
    pub h_max: f64,
    err_old: f64,
    fsal: Option<(f64, [f64; N])>,
    pub stats: Stats,
}

fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let ch = c * h;
        for i in 0..N {
            out[i] += ch * k[i];
        }
    }
    out
}

impl<const N: usize> Dopri5<N> {
    pub fn new(rtol: f64, atol: f64, h_initial: f64) -> Self {
        Self {
            rtol,
            atol,
            h: h_initial,
            h_min: 0.0,
            h_max: f64::INFINITY,
            err_old: 1e-4,
            fsal: None,
            stats: Stats::default(),
        }
    }

    pub fn with_h_min(mut self, h_min: f64) -> Self {
        self.h_min = h_min;
        self
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    /// Advances `(t, y)` by one accepted step, never past `t_limit`.
    /// Returns the step size that was taken.
    pub fn step<F>(&mut self, f: &mut F, t: &mut f64, y: &mut [f64; N], t_limit: f64) -> Result<f64, StepError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let k1 = match self.fsal {
            Some((tf, k)) if tf == *t => k,
            _ => {
                self.stats.evaluations += 1;
                f(*t, y)
            }
        };
        loop {
            let remaining = t_limit - *t;
            let mut h = self.h.min(self.h_max);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let k2 = f(*t + C2 * h, &lin(y, h, &[(A21, &k1)]));
            let k3 = f(*t + C3 * h, &lin(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(*t + C4 * h, &lin(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(*t + C5 * h, &lin(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(*t + h, &lin(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = lin(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let t_new = if last { t_limit } else { *t + h };
            let k7 = f(t_new, &y_new);
            self.stats.evaluations += 6;

            let mut acc = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                acc += (e / sc).powi(2);
            }
            let err = (acc / N as f64).sqrt();
            if !err.is_finite() {
                if h <= self.h_min {
                    return Err(StepError::NonFinite { t: *t });
                }
                self.stats.rejected += 1;
                self.h = 0.1 * h;
                continue;
            }

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                let fac = (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                self.err_old = err.max(1e-4);
                self.stats.accepted += 1;
                *t = t_new;
                *y = y_new;
                self.fsal = Some((t_new, k7));
                // Keep the controller's proposal even when the step was
                // clipped to land on t_limit.
                if !last || h >= self.h {
                    self.h = h / fac;
                }
                return Ok(h);
            }
            self.stats.rejected += 1;
            let h_next = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            if h_next < self.h_min {
                return Err(StepError::StepTooSmall { t: *t, h: h_next });
            }
            self.h = h_next;
        }
    }

    /// Integrates to exactly `t_end`, calling `observe` after every accepted
    /// step. The observer can stop the run early by returning `false`.
    pub fn integrate<F, O>(
        &mut self,
        f: &mut F,
        t: &mut f64,
        y: &mut [f64; N],
        t_end: f64,
        mut observe: O,
    ) -> Result<(), StepError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]) -> bool,
    {
        while *t < t_end {
            self.step(f, t, y, t_end)?;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(StepError::NonFinite { t: *t });
            }
            if !observe(*t, y) {
                break;
            }
        }
        Ok(())
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &lin(y, h, &[(0.5, &k1)]));
    let k3 = f(t + 0.5 * h, &lin(y, h, &[(0.5, &k2)]));
    let k4 = f(t + h, &lin(y, h, &[(1.0, &k3)]));
    lin(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)])
}

/// Fixed-step RK4 from `t0` to `t1` in `steps` equal steps.
pub fn rk4_integrate<const N: usize, F>(f: &mut F, t0: f64, y0: [f64; N], t1: f64, steps: usize) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for k in 0..steps {
        y = rk4_step(f, t0 + k as f64 * h, &y, h);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    // y'' = -y as a first-order system.
    fn oscillator(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn dopri_tracks_harmonic_oscillator() {
        let mut s = Dopri5::new(1e-10, 1e-12, 0.01);
        let (mut t, mut y) = (0.0, [1.0, 0.0]);
        s.integrate(&mut oscillator, &mut t, &mut y, 20.0, |_, _| true).unwrap();
        assert_eq!(t, 20.0);
        assert!((y[0] - 20f64.cos()).abs() < 1e-8);
        assert!((y[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dopri_error_scales_with_tolerance() {
        let run = |tol: f64| {
            let mut s = Dopri5::new(tol, tol, 0.01);
            let (mut t, mut y) = (0.0, [1.0, 0.0]);
            s.integrate(&mut oscillator, &mut t, &mut y, 10.0, |_, _| true).unwrap();
            ((y[0] - 10f64.cos()).abs(), s.stats.accepted)
        };
        let (e_loose, n_loose) = run(1e-6);
        let (e_tight, n_tight) = run(1e-10);
        assert!(e_tight < e_loose / 100.0);
        assert!(n_tight > n_loose);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |n| (rk4_integrate(&mut oscillator, 0.0, [1.0, 0.0], 5.0, n)[0] - 5f64.cos()).abs();
        let ratio = err(100) / err(200);
        assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn step_floor_is_reported() {
        // Stiff relaxation: explicit stability needs h below ~3e-9.
        let mut f = |t: f64, y: &[f64; 1]| [-1e9 * (y[0] - t.cos())];
        let mut s = Dopri5::new(1e-8, 1e-8, 0.1).with_h_min(1e-6);
        let (mut t, mut y) = (0.0, [0.0]);
        let r = s.integrate(&mut f, &mut t, &mut y, 1.0, |_, _| true);
        assert!(matches!(r, Err(StepError::StepTooSmall { .. })), "{r:?}");
        assert!(t < 1.0);
    }

    #[test]
    fn observer_can_stop_early() {
        let mut s = Dopri5::new(1e-8, 1e-8, 0.1);
        let (mut t, mut y) = (0.0, [1.0, 0.0]);
        let mut seen = 0;
        s.integrate(&mut oscillator, &mut t, &mut y, 100.0, |_, _| {
            seen += 1;
            seen < 3
        })
        .unwrap();
        assert_eq!(seen, 3);
        assert!(t < 100.0);
    }
}
