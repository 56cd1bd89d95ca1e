//! Derivative-free minimisers for noisy variational objectives.
//!
//! [`trust_region`] keeps a simplex of `n + 1` interpolation points, fits a
//! linear model through them and steps a distance `rho` down its gradient.
//! `rho` starts at `rho_begin` and is halved whenever a step fails on a
//! well-shaped simplex; the run converges once `rho` would fall below
//! `rho_end`. [`nelder_mead`] is the usual reflect/expand/contract/shrink
//! simplex method.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub rho_begin: f64,
    pub rho_end: f64,
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { rho_begin: 1.0, rho_end: 1e-4, max_evals: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub n_evals: usize,
    pub converged: bool,
}

/// Counts evaluations and tracks the incumbent.
struct Counted<F> {
    f: F,
    n: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.n >= self.max {
            return None;
        }
        self.n += 1;
        Some((self.f)(x))
    }
}

/// Linear-approximation trust-region minimiser.
pub fn trust_region(f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &OptimizeOptions) -> OptimizeResult {
    let n = x0.len();
    let mut obj = Counted { f, n: 0, max: opts.max_evals };
    let mut rho = opts.rho_begin.max(opts.rho_end);
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);

    let finish = |pts: &[Vec<f64>], vals: &[f64], n_evals: usize, converged: bool| {
        let best = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        match best {
            Some(b) => OptimizeResult { x: pts[b].clone(), fx: vals[b], n_evals, converged },
            None => OptimizeResult { x: pts[0].clone(), fx: f64::NAN, n_evals, converged },
        }
    };

    match obj.eval(x0) {
        Some(v) => vals.push(v),
        None => return finish(&pts, &vals, obj.n, false),
    }
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += rho;
        match obj.eval(&p) {
            Some(v) => {
                pts.push(p);
                vals.push(v);
            }
            None => return finish(&pts, &vals, obj.n, false),
        }
    }
    if n == 0 {
        return finish(&pts, &vals, obj.n, true);
    }

    loop {
        // Best vertex first.
        let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
        pts.swap(0, best);
        vals.swap(0, best);

        let d = DMatrix::from_fn(n, n, |i, j| pts[i + 1][j] - pts[0][j]);
        let Some(w) = d.clone().try_inverse() else {
            // Collapsed simplex: rebuild around the incumbent.
            for i in 0..n {
                let mut p = pts[0].clone();
                p[i] += rho;
                match obj.eval(&p) {
                    Some(v) => {
                        pts[i + 1] = p;
                        vals[i + 1] = v;
                    }
                    None => return finish(&pts, &vals, obj.n, false),
                }
            }
            continue;
        };
        let df = DVector::from_fn(n, |i, _| vals[i + 1] - vals[0]);
        let g = &w * &df;

        // Column j of W is the dual direction of vertex j + 1; its length is
        // the reciprocal of that vertex's distance from the opposite face.
        let mut worst: Option<(usize, f64)> = None;
        for j in 0..n {
            let edge = (0..n).map(|k| d[(j, k)].powi(2)).sum::<f64>().sqrt();
            let height = 1.0 / w.column(j).norm();
            let badness = if edge > 2.0 * rho {
                edge / rho
            } else if height < 0.25 * rho {
                rho / height
            } else {
                0.0
            };
            if badness > 0.0 && worst.is_none_or(|(_, b)| badness > b) {
                worst = Some((j, badness));
            }
        }

        let gnorm = g.norm();
        if gnorm > 1e-14 {
            let step: Vec<f64> = (0..n).map(|k| pts[0][k] - rho * g[k] / gnorm).collect();
            let Some(fs) = obj.eval(&step) else {
                return finish(&pts, &vals, obj.n, false);
            };
            let predicted = rho * gnorm;
            let improved = vals[0] - fs >= 0.1 * predicted;
            // Barycentric coordinates of the step decide which vertex leaves.
            let lam = w.transpose() * DVector::from_fn(n, |k, _| step[k] - pts[0][k]);
            let lam0 = 1.0 - lam.sum();
            let mut out = 1;
            let mut out_score = f64::NEG_INFINITY;
            for j in 0..n {
                if lam[j].abs() > out_score {
                    out_score = lam[j].abs();
                    out = j + 1;
                }
            }
            if fs < vals[0] && lam0.abs() > out_score {
                out = 0;
            }
            if fs < vals[out] || fs < vals[0] {
                pts[out] = step;
                vals[out] = fs;
            }
            if improved {
                continue;
            }
        }

        if let Some((j, _)) = worst {
            // Geometry step: move the offending vertex to distance rho along
            // its dual direction, on the downhill side of the model.
            let dir = w.column(j).normalize();
            let sign = if g.dot(&dir) > 0.0 { -1.0 } else { 1.0 };
            let p: Vec<f64> = (0..n).map(|k| pts[0][k] + sign * rho * dir[k]).collect();
            let Some(v) = obj.eval(&p) else {
                return finish(&pts, &vals, obj.n, false);
            };
            pts[j + 1] = p;
            vals[j + 1] = v;
            continue;
        }

        if rho <= opts.rho_end {
            return finish(&pts, &vals, obj.n, true);
        }
        rho = (rho * 0.5).max(opts.rho_end);
        if rho < opts.rho_end * 1.5 {
            rho = opts.rho_end;
        }
    }
}

/// Nelder–Mead simplex minimiser; converges when the simplex diameter drops
/// below `rho_end`.
pub fn nelder_mead(f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &OptimizeOptions) -> OptimizeResult {
    let n = x0.len();
    let mut obj = Counted { f, n: 0, max: opts.max_evals };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.rho_begin;
        pts.push(p);
    }
    let mut vals = Vec::with_capacity(n + 1);
    for p in &pts {
        match obj.eval(p) {
            Some(v) => vals.push(v),
            None => break,
        }
    }
    let finish = |pts: &[Vec<f64>], vals: &[f64], n_evals: usize, converged: bool| {
        let b = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
        OptimizeResult { x: pts[b].clone(), fx: vals.get(b).copied().unwrap_or(f64::NAN), n_evals, converged }
    };
    if vals.len() < n + 1 {
        return finish(&pts, &vals, obj.n, false);
    }

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < opts.rho_end {
            return finish(&pts, &vals, obj.n, true);
        }

        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };

        let xr = along(-1.0);
        let Some(fr) = obj.eval(&xr) else {
            return finish(&pts, &vals, obj.n, false);
        };
        if fr < vals[0] {
            let xe = along(-2.0);
            let Some(fe) = obj.eval(&xe) else {
                return finish(&pts, &vals, obj.n, false);
            };
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, outside) = if fr < vals[n] { (along(-0.5), true) } else { (along(0.5), false) };
        let Some(fc) = obj.eval(&xc) else {
            return finish(&pts, &vals, obj.n, false);
        };
        if (outside && fc <= fr) || (!outside && fc < vals[n]) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
            let Some(v) = obj.eval(&p) else {
                return finish(&pts, &vals, obj.n, false);
            };
            pts[i] = p;
            vals[i] = v;
        }
    }
}
