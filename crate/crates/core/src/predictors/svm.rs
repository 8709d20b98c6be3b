//! Support vector machines trained by sequential minimal optimization.
//!
//! Both the classifier and the epsilon-insensitive regressor reduce to
//!
//! ```text
//! min  ½ αᵀQα + pᵀα   s.t.  yᵀα = const,  0 ≤ α ≤ C
//! ```
//!
//! which is solved two coordinates at a time, picking the pair by the
//! second-order working-set rule of Fan, Chen and Lin (2005).

use serde::{Deserialize, Serialize};

use super::rbf;

const TAU: f64 = 1e-12;
/// Upper bound on cached kernel entries (~128 MiB of f64).
const CACHE_ENTRIES: usize = 16 << 20;

/// State of the dual at termination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Gradient `Qα + p` of the dual objective.
    pub gradient: Vec<f64>,
    /// Signs (+1/-1) of the dual variables.
    pub y: Vec<f64>,
    pub c: f64,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Maximal KKT violation `m(α) - M(α)` at exit.
    pub gap: f64,
}

/// Lazily computed rows of an RBF kernel matrix.
struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    cached: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        Self {
            x,
            gamma,
            rows: vec![None; x.len()],
            cached: 0,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            let n = self.x.len();
            if (self.cached + 1) * n > CACHE_ENTRIES {
                self.rows.iter_mut().for_each(|r| *r = None);
                self.cached = 0;
            }
            let xi = &self.x[i];
            self.rows[i] = Some(self.x.iter().map(|xj| rbf(xi, xj, self.gamma)).collect());
            self.cached += 1;
        }
        self.rows[i].as_deref().unwrap_or_default()
    }
}

fn is_upper(a: f64, c: f64) -> bool {
    a >= c
}

fn is_lower(a: f64) -> bool {
    a <= 0.0
}

fn solve(
    p: &[f64],
    y: &[f64],
    c: f64,
    qd: &[f64],
    q_col: &mut dyn FnMut(usize) -> Vec<f64>,
    tol: f64,
) -> SmoSolution {
    let n = p.len();
    let max_iter = (100 * n).max(1000);
    let mut alpha = vec![0.0; n];
    let mut g = p.to_vec();
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..n {
            if y[t] > 0.0 {
                if !is_upper(alpha[t], c) && -g[t] >= gmax {
                    gmax = -g[t];
                    gmax_idx = Some(t);
                }
            } else if !is_lower(alpha[t]) && g[t] >= gmax {
                gmax = g[t];
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else {
            converged = true;
            gap = 0.0;
            break;
        };
        let qi = q_col(i);

        // j: second-order choice in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = None;
        let mut obj_min = f64::INFINITY;
        for j in 0..n {
            let (grad_diff, quad) = if y[j] > 0.0 {
                if is_lower(alpha[j]) {
                    continue;
                }
                gmax2 = gmax2.max(g[j]);
                (gmax + g[j], qd[i] + qd[j] - 2.0 * y[i] * qi[j])
            } else {
                if is_upper(alpha[j], c) {
                    continue;
                }
                gmax2 = gmax2.max(-g[j]);
                (gmax - g[j], qd[i] + qd[j] + 2.0 * y[i] * qi[j])
            };
            if grad_diff > 0.0 {
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    gmin_idx = Some(j);
                }
            }
        }
        gap = gmax + gmax2;
        let j = match gmin_idx {
            Some(j) if gap >= tol => j,
            _ => {
                converged = true;
                break;
            }
        };
        iterations += 1;
        let qj = q_col(j);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qi[j]).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qi[j]).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            g[k] += qi[k] * di + qj[k] * dj;
        }
    }

    let rho = compute_rho(&alpha, &g, y, c);
    SmoSolution {
        alpha,
        gradient: g,
        y: y.to_vec(),
        c,
        rho,
        iterations,
        converged,
        gap,
    }
}

fn compute_rho(alpha: &[f64], g: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * g[t];
        if is_upper(alpha[t], c) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Solves the C-SVC dual for labels `y` (true = +1).
pub fn svc_dual(x: &[Vec<f64>], y: &[bool], c: f64, gamma: f64, tol: f64) -> SmoSolution {
    let signs: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut kernel = KernelRows::new(x, gamma);
    let mut q_col = |i: usize| -> Vec<f64> {
        let yi = signs[i];
        kernel
            .row(i)
            .iter()
            .zip(&signs)
            .map(|(k, yj)| yi * yj * k)
            .collect()
    };
    let p = vec![-1.0; x.len()];
    let qd = vec![1.0; x.len()];
    solve(&p, &signs, c, &qd, &mut q_col, tol)
}

/// Solves the epsilon-SVR dual over `[α⁺; α⁻]`.
pub fn svr_dual(x: &[Vec<f64>], z: &[f64], c: f64, epsilon: f64, gamma: f64, tol: f64) -> SmoSolution {
    let n = x.len();
    let signs: Vec<f64> = (0..2 * n).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
    let p: Vec<f64> = (0..2 * n)
        .map(|t| if t < n { epsilon - z[t] } else { epsilon + z[t - n] })
        .collect();
    let mut kernel = KernelRows::new(x, gamma);
    let mut q_col = |i: usize| -> Vec<f64> {
        let si = signs[i];
        let row = kernel.row(i % n);
        (0..2 * n).map(|t| si * signs[t] * row[t % n]).collect()
    };
    let qd = vec![1.0; 2 * n];
    solve(&p, &signs, c, &qd, &mut q_col, tol)
}

/// Sparse kernel expansion `f(x) = Σ coef_i k(sv_i, x) - rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    fn from_coef(x: &[Vec<f64>], coef: Vec<f64>, sol: &SmoSolution, gamma: f64) -> Self {
        let (support_vectors, coef) = x
            .iter()
            .zip(coef)
            .filter(|(_, c)| *c != 0.0)
            .map(|(r, c)| (r.clone(), c))
            .unzip();
        if !sol.converged {
            log::warn!(
                "SMO stopped after {} iterations with KKT gap {:.3e}",
                sol.iterations,
                sol.gap
            );
        }
        Self {
            support_vectors,
            coef,
            rho: sol.rho,
            gamma,
            iterations: sol.iterations,
            converged: sol.converged,
        }
    }

    pub fn fit_classifier(x: &[Vec<f64>], y: &[bool], c: f64, gamma: f64, tol: f64) -> Self {
        let sol = svc_dual(x, y, c, gamma, tol);
        let coef = sol.alpha.iter().zip(&sol.y).map(|(a, s)| a * s).collect();
        Self::from_coef(x, coef, &sol, gamma)
    }

    pub fn fit_regressor(x: &[Vec<f64>], z: &[f64], c: f64, epsilon: f64, gamma: f64, tol: f64) -> Self {
        let n = x.len();
        let sol = svr_dual(x, z, c, epsilon, gamma, tol);
        let coef = (0..n).map(|i| sol.alpha[i] - sol.alpha[i + n]).collect();
        Self::from_coef(x, coef, &sol, gamma)
    }

    pub fn decision_value(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(sv, x, self.gamma))
            .sum::<f64>()
            - self.rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let t = i as f64 / 30.0;
            let a = (t * 17.0).sin() * 0.4;
            let b = (t * 29.0).cos() * 0.4;
            x.push(vec![a + if i % 2 == 0 { 0.3 } else { -0.3 }, b]);
            y.push(i % 2 == 0);
        }
        (x, y)
    }

    #[test]
    fn dual_is_feasible_and_satisfies_kkt() {
        let (x, y) = blobs();
        let tol = 1e-3;
        let sol = svc_dual(&x, &y, 1.0, 2.0, tol);
        assert!(sol.converged);
        assert!(sol.gap < tol);
        let eq: f64 = sol.alpha.iter().zip(&sol.y).map(|(a, s)| a * s).sum();
        assert!(eq.abs() < 1e-9);
        let model = SvmModel::fit_classifier(&x, &y, 1.0, 2.0, tol);
        for (i, a) in sol.alpha.iter().enumerate() {
            assert!((0.0..=1.0).contains(a));
            let margin = sol.y[i] * model.decision_value(&x[i]);
            let violation = if *a <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if *a >= 1.0 {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            assert!(violation <= tol + 1e-9, "sample {i}: violation {violation}");
        }
    }

    #[test]
    fn svr_tracks_linear_target() {
        let x: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 / 24.0]).collect();
        let z: Vec<f64> = x.iter().map(|r| 0.2 + 0.6 * r[0]).collect();
        let m = SvmModel::fit_regressor(&x, &z, 1.0, 0.05, 1.0, 1e-3);
        assert!(m.converged);
        for (r, t) in x.iter().zip(&z) {
            assert!((m.decision_value(r) - t).abs() <= 0.05 + 2e-3);
        }
    }
}
