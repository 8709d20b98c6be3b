//! Fully connected ReLU network trained with Adam on mini-batches.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    /// Sigmoid output, binary cross-entropy loss.
    Logistic,
    /// Identity output, half mean squared error loss.
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.random_range(-limit..limit))
                .collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Multilayer perceptron with one scalar output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    output: OutputKind,
    /// Per-feature `(mean, scale)` applied before the first layer.
    input_scaling: Vec<(f64, f64)>,
    /// `(mean, scale)` mapping the linear output back to target units.
    target_scaling: (f64, f64),
}

impl Mlp {
    /// `hidden_layers` ReLU layers of width `hidden`, then one output unit.
    pub fn new(input_dim: usize, hidden: usize, hidden_layers: usize, output: OutputKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden_layers + 1);
        let mut width = input_dim;
        for _ in 0..hidden_layers {
            layers.push(Layer::glorot(width, hidden, &mut rng));
            width = hidden;
        }
        layers.push(Layer::glorot(width, 1, &mut rng));
        Self {
            layers,
            output,
            input_scaling: vec![(0.0, 1.0); input_dim],
            target_scaling: (0.0, 1.0),
        }
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output
    }

    /// Pre-activations of every layer for one input.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            if i + 1 < self.layers.len() {
                h = z.iter().map(|v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.activations(x).last().map_or(0.0, |z| z[0])
    }

    /// Smallest `|pre-activation|` over all hidden units and rows, in internal
    /// units. Finite-difference checks need this away from zero.
    pub fn kink_distance(&self, x: &[Vec<f64>]) -> f64 {
        let hidden = self.layers.len() - 1;
        x.iter()
            .flat_map(|r| self.activations(r).into_iter().take(hidden).flatten())
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }

    fn scale_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_scaling)
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Probability for [`OutputKind::Logistic`], raw value for [`OutputKind::Linear`].
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.logit(&self.scale_input(x));
        match self.output {
            OutputKind::Logistic => sigmoid(z),
            OutputKind::Linear => self.target_scaling.0 + self.target_scaling.1 * z,
        }
    }

    fn sample_loss(&self, z: f64, y: f64) -> f64 {
        match self.output {
            // BCE on logits: log(1 + e^z) - y z
            OutputKind::Logistic => softplus(z) - y * z,
            OutputKind::Linear => 0.5 * (z - y) * (z - y),
        }
    }

    /// Mean loss over the rows, in the network's internal (standardized) units.
    pub fn loss(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let total: f64 = x
            .iter()
            .zip(y)
            .map(|(r, &t)| self.sample_loss(self.logit(r), t))
            .sum();
        total / x.len().max(1) as f64
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params(), "parameter vector length");
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
    }

    /// Gradient of [`Mlp::loss`] in the layout of [`Mlp::params`].
    pub fn gradient(&self, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.n_params()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.n_params();
                Some(start)
            })
            .collect();
        for (row, &target) in x.iter().zip(y) {
            let pre = self.activations(row);
            let z_out = pre.last().map_or(0.0, |z| z[0]);
            // both losses have dL/dz = output - target
            let mut delta = vec![match self.output {
                OutputKind::Logistic => sigmoid(z_out) - target,
                OutputKind::Linear => z_out - target,
            }];
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input: Vec<f64> = if li == 0 {
                    row.clone()
                } else {
                    pre[li - 1].iter().map(|v| v.max(0.0)).collect()
                };
                let base = offsets[li];
                for o in 0..layer.outputs {
                    for i in 0..layer.inputs {
                        grad[base + o * layer.inputs + i] += delta[o] * input[i];
                    }
                    grad[base + layer.weights.len() + o] += delta[o];
                }
                if li > 0 {
                    let below = &pre[li - 1];
                    delta = (0..layer.inputs)
                        .map(|i| {
                            if below[i] <= 0.0 {
                                return 0.0;
                            }
                            (0..layer.outputs)
                                .map(|o| layer.weights[o * layer.inputs + i] * delta[o])
                                .sum()
                        })
                        .collect();
                }
            }
        }
        let scale = 1.0 / x.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        grad
    }

    /// Standardizes inputs (and targets for a linear output), then runs Adam on
    /// shuffled mini-batches. Returns the mean training loss per epoch.
    pub fn fit(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        seed: u64,
    ) -> Vec<f64> {
        let dim = self.input_scaling.len();
        self.input_scaling = (0..dim)
            .map(|j| standardizer(x.iter().map(|r| r[j])))
            .collect();
        if self.output == OutputKind::Linear {
            self.target_scaling = standardizer(y.iter().copied());
        }
        let x: Vec<Vec<f64>> = x.iter().map(|r| self.scale_input(r)).collect();
        let (tm, ts) = self.target_scaling;
        let y: Vec<f64> = y.iter().map(|v| (v - tm) / ts).collect();
        let (x, y) = (&x[..], &y[..]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut params = self.params();
        let mut m = vec![0.0; params.len()];
        let mut v = vec![0.0; params.len()];
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(batch_size.max(1)) {
                let bx: Vec<Vec<f64>> = batch.iter().map(|&i| x[i].clone()).collect();
                let by: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
                let g = self.gradient(&bx, &by);
                step += 1;
                let c1 = 1.0 - BETA1.powi(step);
                let c2 = 1.0 - BETA2.powi(step);
                for k in 0..params.len() {
                    m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                    v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                    params[k] -= learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
                }
                self.set_params(&params);
            }
            history.push(self.loss(x, y));
        }
        history
    }
}

/// `(mean, sd)`, with unit scale for constant inputs.
fn standardizer(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let sd = (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = x.iter().map(|r| f64::from(u8::from(r[0] > 0.0))).collect();
        (x, y)
    }

    fn max_rel_error(net: &Mlp, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let analytic = net.gradient(x, y);
        let p = net.params();
        let h = 1e-5;
        let mut probe = net.clone();
        let mut worst: f64 = 0.0;
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k] = p[k] + h;
            probe.set_params(&q);
            let up = probe.loss(x, y);
            q[k] = p[k] - h;
            probe.set_params(&q);
            let down = probe.loss(x, y);
            let numeric = (up - down) / (2.0 * h);
            let err = (numeric - analytic[k]).abs() / numeric.abs().max(analytic[k].abs()).max(1e-8);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for kind in [OutputKind::Logistic, OutputKind::Linear] {
            let net = Mlp::new(4, 16, 3, kind, 3);
            let (x, y) = data(11, 8, 4);
            assert!(max_rel_error(&net, &x, &y) <= 1e-3);
        }
    }

    #[test]
    fn architecture_and_determinism() {
        let net = Mlp::new(5, 16, 3, OutputKind::Logistic, 1);
        assert_eq!(net.n_params(), 5 * 16 + 16 + 2 * (16 * 16 + 16) + 16 + 1);
        let (x, y) = data(2, 64, 5);
        let mut a = Mlp::new(5, 16, 3, OutputKind::Logistic, 7);
        let mut b = a.clone();
        a.fit(&x, &y, 1e-3, 32, 3, 9);
        b.fit(&x, &y, 1e-3, 32, 3, 9);
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn training_reduces_loss() {
        let (x, y) = data(4, 200, 3);
        let mut net = Mlp::new(3, 16, 3, OutputKind::Logistic, 5);
        let before = net.loss(&x, &y);
        let history = net.fit(&x, &y, 1e-2, 32, 20, 5);
        assert!(history.last().copied().unwrap() < before);
    }
}
