//! Nelder-Mead simplex maximization inside a box.
//!
//! Points are clamped into the box before evaluation. The objective returns
//! `None` once the evaluation budget is exhausted, which ends the search.
//! Non-finite objective values rank below every finite one.

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub(crate) struct Simplex<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Initial edge length as a fraction of each box width.
    pub initial_step: f64,
    /// Stop when the spread of objective values drops below this.
    pub f_tol: f64,
    pub max_iter: usize,
}

fn rank(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

impl Simplex<'_> {
    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Maximizes `f` starting from `x0`; returns the best vertex seen.
    pub fn maximize<F>(&self, x0: &[f64], mut f: F) -> Option<(Vec<f64>, f64)>
    where
        F: FnMut(&[f64]) -> Option<f64>,
    {
        let n = x0.len();
        let mut start = x0.to_vec();
        self.clamp(&mut start);
        let mut pts = vec![start.clone()];
        for i in 0..n {
            let mut v = start.clone();
            let step = self.initial_step * (self.upper[i] - self.lower[i]);
            // Step inwards when the start sits on the upper face.
            v[i] = if v[i] + step <= self.upper[i] { v[i] + step } else { v[i] - step };
            pts.push(v);
        }
        let mut vals = Vec::with_capacity(n + 1);
        for p in &pts {
            match f(p) {
                Some(v) => vals.push(rank(v)),
                None => return best_of(&pts[..vals.len()], &vals),
            }
        }

        macro_rules! eval {
            ($x:expr) => {
                match f(&$x) {
                    Some(v) => rank(v),
                    None => return best_of(&pts, &vals),
                }
            };
        }

        for _ in 0..self.max_iter {
            // descending by objective
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            if vals[0].is_finite() && vals[n].is_finite() && (vals[0] - vals[n]).abs() <= self.f_tol * vals[0].abs().max(1e-300) {
                break;
            }

            let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
            let toward = |coef: f64| -> Vec<f64> {
                let mut x: Vec<f64> = (0..n).map(|j| centroid[j] + coef * (centroid[j] - pts[n][j])).collect();
                self.clamp(&mut x);
                x
            };

            let xr = toward(REFLECT);
            let fr = eval!(xr);
            if fr > vals[0] {
                let xe = toward(EXPAND);
                let fe = eval!(xe);
                if fe > fr {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
                continue;
            }
            if fr > vals[n - 1] {
                pts[n] = xr;
                vals[n] = fr;
                continue;
            }
            // outside contraction must beat the reflection, inside the worst vertex
            let (xc, threshold) = if fr > vals[n] {
                (toward(CONTRACT * REFLECT), fr)
            } else {
                (toward(-CONTRACT), vals[n])
            };
            let fc = eval!(xc);
            if fc > threshold || (fc == threshold && fc.is_finite()) {
                pts[n] = xc;
                vals[n] = fc;
                continue;
            }
            // shrink toward the best vertex
            for i in 1..=n {
                let mut x: Vec<f64> = (0..n).map(|j| pts[0][j] + SHRINK * (pts[i][j] - pts[0][j])).collect();
                self.clamp(&mut x);
                vals[i] = eval!(x);
                pts[i] = x;
            }
        }
        best_of(&pts, &vals)
    }
}

fn best_of(pts: &[Vec<f64>], vals: &[f64]) -> Option<(Vec<f64>, f64)> {
    vals.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (pts[i].clone(), *v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maximum() {
        let lower = [-5.0, -5.0];
        let upper = [5.0, 5.0];
        let s = Simplex {
            lower: &lower,
            upper: &upper,
            initial_step: 0.1,
            f_tol: 1e-14,
            max_iter: 2000,
        };
        let (x, v) = s
            .maximize(&[3.0, -4.0], |x| Some(-(x[0] - 1.0).powi(2) - 10.0 * (x[1] + 0.5).powi(2)))
            .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 0.5).abs() < 1e-5, "{x:?}");
        assert!(v > -1e-9);
    }

    #[test]
    fn respects_the_box() {
        let lower = [0.0];
        let upper = [1.0];
        let s = Simplex {
            lower: &lower,
            upper: &upper,
            initial_step: 0.2,
            f_tol: 1e-12,
            max_iter: 500,
        };
        let (x, _) = s.maximize(&[0.5], |x| Some(x[0] * 3.0)).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stops_when_budget_runs_out() {
        let lower = [-1.0, -1.0];
        let upper = [1.0, 1.0];
        let s = Simplex {
            lower: &lower,
            upper: &upper,
            initial_step: 0.1,
            f_tol: 0.0,
            max_iter: 10_000,
        };
        let mut calls = 0;
        let r = s.maximize(&[0.0, 0.0], |x| {
            calls += 1;
            (calls <= 7).then(|| -x[0] * x[0] - x[1] * x[1])
        });
        assert!(r.is_some());
        assert_eq!(calls, 8);
    }
}
