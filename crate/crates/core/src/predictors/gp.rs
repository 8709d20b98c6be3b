//! Gaussian processes with a unit-variance RBF kernel.
//!
//! Classification uses a logistic likelihood and the Laplace approximation:
//! the posterior mode is found by Newton's method in the stable
//! `B = I + W^½ K W^½` parameterisation and predictive probabilities
//! average the sigmoid over the Gaussian latent marginal with 20-point
//! Gauss–Hermite quadrature.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::quadrature::gauss_hermite;
use super::rbf;
use crate::error::{Error, Result};

pub const GP_MODE_TOLERANCE: f64 = 1e-6;
pub const GP_MAX_NEWTON_ITERATIONS: usize = 50;
const JITTERS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
const HERMITE_POINTS: usize = 20;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn gamma_from_length_scale(l: f64) -> f64 {
    1.0 / (2.0 * l * l)
}

fn kernel_matrix(x: &[Vec<f64>], gamma: f64, diag: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| rbf(&x[i], &x[j], gamma) + if i == j { diag } else { 0.0 })
}

fn kernel_vector(x: &[Vec<f64>], z: &[f64], gamma: f64) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().map(|xi| rbf(xi, z, gamma)))
}

/// Binary GP classifier fitted by the Laplace approximation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpClassifier {
    x_train: Vec<Vec<f64>>,
    gamma: f64,
    /// `∇ log p(y|f)` at the mode, i.e. `t - σ(f̂)`.
    grad_log_lik: Vec<f64>,
    sqrt_w: Vec<f64>,
    /// Row-major lower Cholesky factor of `B` at the mode.
    chol_b: Vec<f64>,
    pub mode: Vec<f64>,
    /// Newton iterate `a` with `mode = K a`.
    pub alpha: Vec<f64>,
    pub jitter: f64,
    pub iterations: usize,
    /// `‖∇ log p(y|f) - K⁻¹ f‖` at the returned mode.
    pub gradient_norm: f64,
}

struct Newton {
    f: DVector<f64>,
    a: DVector<f64>,
    iterations: usize,
    gradient_norm: f64,
}

impl GpClassifier {
    pub fn fit(x: &[Vec<f64>], y: &[bool], length_scale: f64) -> Result<Self> {
        let gamma = gamma_from_length_scale(length_scale);
        let t = DVector::from_iterator(y.len(), y.iter().map(|&l| f64::from(u8::from(l))));
        for jitter in JITTERS {
            let k = kernel_matrix(x, gamma, jitter);
            let Some(newton) = find_mode(&k, &t) else {
                continue;
            };
            let pi = newton.f.map(sigmoid);
            let w = pi.map(|p| p * (1.0 - p));
            let sqrt_w = w.map(f64::sqrt);
            let Some(l) = b_cholesky(&k, &sqrt_w).map(|c| c.l()) else {
                continue;
            };
            if newton.gradient_norm > GP_MODE_TOLERANCE {
                log::warn!(
                    "Laplace mode search stopped after {} iterations with gradient norm {:.3e}",
                    newton.iterations,
                    newton.gradient_norm
                );
            }
            let n = x.len();
            let mut chol_b = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    chol_b.push(l[(i, j)]);
                }
            }
            return Ok(Self {
                x_train: x.to_vec(),
                gamma,
                grad_log_lik: (&t - &pi).iter().copied().collect(),
                sqrt_w: sqrt_w.iter().copied().collect(),
                chol_b,
                mode: newton.f.iter().copied().collect(),
                alpha: newton.a.iter().copied().collect(),
                jitter,
                iterations: newton.iterations,
                gradient_norm: newton.gradient_norm,
            });
        }
        Err(Error::NotPositiveDefinite)
    }

    /// Posterior mean and variance of the latent function at `z`.
    pub fn latent(&self, z: &[f64]) -> (f64, f64) {
        let ks = kernel_vector(&self.x_train, z, self.gamma);
        let mean: f64 = ks.iter().zip(&self.grad_log_lik).map(|(k, g)| k * g).sum();
        // forward substitution L v = W^½ k*
        let n = self.x_train.len();
        let mut v = vec![0.0; n];
        for i in 0..n {
            let mut s = self.sqrt_w[i] * ks[i];
            for (j, vj) in v.iter().enumerate().take(i) {
                s -= self.chol_b[i * n + j] * vj;
            }
            v[i] = s / self.chol_b[i * n + i];
        }
        let var = (1.0 - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (mean, var)
    }

    /// `E[σ(f*)]` under the Laplace posterior.
    pub fn predict_proba(&self, z: &[f64]) -> f64 {
        let (mean, var) = self.latent(z);
        let (nodes, weights) = gauss_hermite(HERMITE_POINTS);
        let spread = (2.0 * var).sqrt();
        let total: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * sigmoid(mean + spread * x))
            .sum();
        (total / std::f64::consts::PI.sqrt()).clamp(0.0, 1.0)
    }
}

fn b_cholesky(k: &DMatrix<f64>, sqrt_w: &DVector<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = k.nrows();
    let b = DMatrix::from_fn(n, n, |i, j| {
        sqrt_w[i] * k[(i, j)] * sqrt_w[j] + if i == j { 1.0 } else { 0.0 }
    });
    b.cholesky()
}

fn objective(a: &DVector<f64>, f: &DVector<f64>, t: &DVector<f64>) -> f64 {
    let log_lik: f64 = f.iter().zip(t).map(|(fi, ti)| ti * fi - softplus(*fi)).sum();
    log_lik - 0.5 * a.dot(f)
}

/// Newton iterations for the posterior mode. `None` if `B` cannot be factored.
fn find_mode(k: &DMatrix<f64>, t: &DVector<f64>) -> Option<Newton> {
    let n = t.len();
    let mut f = DVector::zeros(n);
    let mut a = DVector::zeros(n);
    let mut psi = objective(&a, &f, t);
    let mut gradient_norm = (t - f.map(sigmoid) - &a).norm();
    let mut iterations = 0;
    while gradient_norm > GP_MODE_TOLERANCE && iterations < GP_MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let pi = f.map(sigmoid);
        let w = pi.map(|p| p * (1.0 - p));
        let sqrt_w = w.map(f64::sqrt);
        let chol = b_cholesky(k, &sqrt_w)?;
        let b = w.component_mul(&f) + (t - &pi);
        let kb = k * &b;
        let c = chol.solve(&sqrt_w.component_mul(&kb));
        let mut a_new = &b - sqrt_w.component_mul(&c);
        let mut f_new = k * &a_new;
        let mut psi_new = objective(&a_new, &f_new, t);
        // backtrack if the full Newton step overshoots
        let mut halvings = 0;
        while psi_new < psi && halvings < 20 {
            a_new = (&a + &a_new) * 0.5;
            f_new = k * &a_new;
            psi_new = objective(&a_new, &f_new, t);
            halvings += 1;
        }
        a = a_new;
        f = f_new;
        psi = psi_new;
        gradient_norm = (t - f.map(sigmoid) - &a).norm();
    }
    Some(Newton {
        f,
        a,
        iterations,
        gradient_norm,
    })
}

/// Exact GP regression around the training-target mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpRegressor {
    x_train: Vec<Vec<f64>>,
    gamma: f64,
    y_mean: f64,
    alpha: Vec<f64>,
    pub noise: f64,
    pub jitter: f64,
}

impl GpRegressor {
    pub fn fit(x: &[Vec<f64>], y: &[f64], length_scale: f64, noise: f64) -> Result<Self> {
        let gamma = gamma_from_length_scale(length_scale);
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let centered = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
        for jitter in JITTERS {
            let k = kernel_matrix(x, gamma, noise + jitter);
            if let Some(chol) = k.cholesky() {
                let alpha = chol.solve(&centered);
                return Ok(Self {
                    x_train: x.to_vec(),
                    gamma,
                    y_mean,
                    alpha: alpha.iter().copied().collect(),
                    noise,
                    jitter,
                });
            }
        }
        Err(Error::NotPositiveDefinite)
    }

    pub fn predict_mean(&self, z: &[f64]) -> f64 {
        self.y_mean
            + self
                .x_train
                .iter()
                .zip(&self.alpha)
                .map(|(xi, a)| a * rbf(xi, z, self.gamma))
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let angle = i as f64 * 0.61;
            let r = if i % 2 == 0 { 0.5 } else { 2.0 };
            x.push(vec![r * angle.cos(), r * angle.sin()]);
            y.push(i % 2 == 0);
        }
        (x, y)
    }

    #[test]
    fn mode_gradient_vanishes() {
        let (x, y) = ring();
        let gp = GpClassifier::fit(&x, &y, 1.0).unwrap();
        assert!(gp.gradient_norm <= GP_MODE_TOLERANCE, "{}", gp.gradient_norm);
        assert!(gp.iterations <= GP_MAX_NEWTON_ITERATIONS);

        // recompute ∇Ψ = (t - σ(f)) - K⁻¹f independently of the stored state
        let k = kernel_matrix(&x, gp.gamma, gp.jitter);
        let f = DVector::from_vec(gp.mode.clone());
        let kinv_f = k.clone().cholesky().unwrap().solve(&f);
        let t = DVector::from_iterator(y.len(), y.iter().map(|&l| f64::from(u8::from(l))));
        let grad = &t - f.map(sigmoid) - kinv_f;
        assert!(grad.norm() <= 1e-5, "{}", grad.norm());
    }

    #[test]
    fn separates_ring() {
        let (x, y) = ring();
        let gp = GpClassifier::fit(&x, &y, 1.0).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(r, &l)| (gp.predict_proba(r) > 0.5) == l)
            .count();
        assert_eq!(correct, x.len());
        let (_, var_far) = gp.latent(&[50.0, 50.0]);
        assert!((var_far - 1.0).abs() < 1e-9);
        assert!((gp.predict_proba(&[50.0, 50.0]) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn handles_duplicate_inputs() {
        let x = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0], vec![3.0]];
        let y = vec![true, false, true, true, false];
        let gp = GpClassifier::fit(&x, &y, 1.0).unwrap();
        let p = gp.predict_proba(&[0.0]);
        assert!((0.0..=1.0).contains(&p));
    }
}
