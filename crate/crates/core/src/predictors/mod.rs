//! Trainable predictors used by the compression experiments: RBF support
//! vector machines, Gaussian processes and a small multilayer perceptron, each
//! for binary classification and for regression.

mod gp;
mod mlp;
mod quadrature;
mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gp::{GpClassifier, GpRegressor, GP_MAX_NEWTON_ITERATIONS, GP_MODE_TOLERANCE};
pub use mlp::{Mlp, OutputKind};
pub use quadrature::gauss_hermite;
pub use svm::{svc_dual, svr_dual, SmoSolution, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Svm,
    Gp,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Svm, Family::Gp, Family::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Svm => "svm",
            Family::Gp => "gp",
            Family::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(Family::Svm),
            "gp" => Ok(Family::Gp),
            "mlp" => Ok(Family::Mlp),
            other => Err(Error::OutOfRange(format!("unknown predictor family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Classification,
    Regression,
}

impl Problem {
    pub fn as_str(self) -> &'static str {
        match self {
            Problem::Classification => "classification",
            Problem::Regression => "regression",
        }
    }
}

/// Default hyperparameters for all three families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    /// SVM box constraint.
    pub c: f64,
    /// SVM RBF width; `None` means `1 / (n_features * var(X))`.
    pub gamma: Option<f64>,
    pub svr_epsilon: f64,
    pub svm_tolerance: f64,
    pub gp_length_scale: f64,
    pub gp_noise: f64,
    pub mlp_hidden_size: usize,
    pub mlp_hidden_layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            svr_epsilon: 0.1,
            svm_tolerance: 1e-3,
            gp_length_scale: 1.0,
            gp_noise: 1e-2,
            mlp_hidden_size: 16,
            mlp_hidden_layers: 3,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub family: Family,
    pub problem: Problem,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl PredictorSpec {
    pub fn new(family: Family, problem: Problem) -> Self {
        Self {
            family,
            problem,
            hyperparameters: Hyperparameters::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Stable identifier such as `svm-classification`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.family.as_str(), self.problem.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Model {
    Svc(SvmModel),
    Svr(SvmModel),
    GpClassifier(GpClassifier),
    GpRegressor(GpRegressor),
    Mlp(Mlp),
}

/// A fitted predictor; immutable once trained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedPredictor {
    pub spec: PredictorSpec,
    pub feature_dim: usize,
    pub model: Model,
}

/// Labels and the confidence scores they were thresholded from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<bool>,
    pub scores: Vec<f64>,
}

/// `K[i][j] = exp(-gamma * |a_i - b_j|^2)`.
pub fn rbf_kernel(a: &[Vec<f64>], b: &[Vec<f64>], gamma: f64) -> Result<Vec<Vec<f64>>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::OutOfRange(format!("gamma must be positive, got {gamma}")));
    }
    let dim = a.first().or(b.first()).map_or(0, Vec::len);
    for row in a.iter().chain(b) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
    }
    Ok(a.iter()
        .map(|x| b.iter().map(|z| rbf(x, z, gamma)).collect())
        .collect())
}

#[inline]
pub(crate) fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// `1 / (n_features * var(X))` over all entries, or 1 when X is constant.
pub fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let dim = x.first().map_or(1, Vec::len).max(1);
    let n = (x.len() * dim) as f64;
    let mean = x.iter().flatten().sum::<f64>() / n;
    let var = x.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0
    }
}

fn check_matrix(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature row {i}")));
        }
    }
    Ok(dim)
}

/// Sorts training rows into a canonical order so the fit does not depend on
/// how the caller ordered them.
fn canonical_order<T: Copy>(x: &[Vec<f64>], y: &[T], key: impl Fn(T) -> f64) -> (Vec<Vec<f64>>, Vec<T>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(key(y[a]).total_cmp(&key(y[b])))
    });
    (
        idx.iter().map(|&i| x[i].clone()).collect(),
        idx.iter().map(|&i| y[i]).collect(),
    )
}

/// Fits a binary classifier; `true` is the positive class.
pub fn train_classifier(spec: &PredictorSpec, x: &[Vec<f64>], y: &[bool]) -> Result<TrainedPredictor> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 4 {
        return Err(Error::NotEnoughRows { need: 4, got: x.len() });
    }
    let dim = check_matrix(x)?;
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    let hp = &spec.hyperparameters;
    let model = match spec.family {
        Family::Svm => {
            let (x, y) = canonical_order(x, y, |l| f64::from(u8::from(l)));
            let gamma = hp.gamma.unwrap_or_else(|| default_gamma(&x));
            Model::Svc(SvmModel::fit_classifier(&x, &y, hp.c, gamma, hp.svm_tolerance))
        }
        Family::Gp => {
            let (x, y) = canonical_order(x, y, |l| f64::from(u8::from(l)));
            Model::GpClassifier(GpClassifier::fit(&x, &y, hp.gp_length_scale)?)
        }
        Family::Mlp => {
            let targets: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l))).collect();
            let mut net = Mlp::new(
                dim,
                hp.mlp_hidden_size,
                hp.mlp_hidden_layers,
                OutputKind::Logistic,
                spec.seed,
            );
            net.fit(x, &targets, hp.learning_rate, hp.batch_size, hp.epochs, spec.seed);
            Model::Mlp(net)
        }
    };
    Ok(TrainedPredictor {
        spec: PredictorSpec {
            problem: Problem::Classification,
            ..spec.clone()
        },
        feature_dim: dim,
        model,
    })
}

/// Fits a real-valued regressor.
pub fn train_regressor(spec: &PredictorSpec, x: &[Vec<f64>], y: &[f64]) -> Result<TrainedPredictor> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::NotEnoughRows { need: 3, got: x.len() });
    }
    let dim = check_matrix(x)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression target".into()));
    }
    let hp = &spec.hyperparameters;
    let model = match spec.family {
        Family::Svm => {
            let (x, y) = canonical_order(x, y, |v| v);
            let gamma = hp.gamma.unwrap_or_else(|| default_gamma(&x));
            Model::Svr(SvmModel::fit_regressor(
                &x,
                &y,
                hp.c,
                hp.svr_epsilon,
                gamma,
                hp.svm_tolerance,
            ))
        }
        Family::Gp => {
            let (x, y) = canonical_order(x, y, |v| v);
            Model::GpRegressor(GpRegressor::fit(&x, &y, hp.gp_length_scale, hp.gp_noise)?)
        }
        Family::Mlp => {
            let mut net = Mlp::new(
                dim,
                hp.mlp_hidden_size,
                hp.mlp_hidden_layers,
                OutputKind::Linear,
                spec.seed,
            );
            net.fit(x, y, hp.learning_rate, hp.batch_size, hp.epochs, spec.seed);
            Model::Mlp(net)
        }
    };
    Ok(TrainedPredictor {
        spec: PredictorSpec {
            problem: Problem::Regression,
            ..spec.clone()
        },
        feature_dim: dim,
        model,
    })
}

impl TrainedPredictor {
    fn check_input(&self, x: &[Vec<f64>]) -> Result<()> {
        for row in x {
            if row.len() != self.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_dim,
                    got: row.len(),
                });
            }
        }
        Ok(())
    }

    fn raw_scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        match &self.model {
            Model::Svc(m) | Model::Svr(m) => x.iter().map(|r| m.decision_value(r)).collect(),
            Model::GpClassifier(m) => x.iter().map(|r| m.predict_proba(r)).collect(),
            Model::GpRegressor(m) => x.iter().map(|r| m.predict_mean(r)).collect(),
            Model::Mlp(net) => x.iter().map(|r| net.predict(r)).collect(),
        }
    }

    /// Decision threshold applied to scores.
    pub fn threshold(&self) -> f64 {
        match self.model {
            Model::Svc(_) | Model::Svr(_) => 0.0,
            _ => 0.5,
        }
    }
}

/// Class labels plus monotone confidence scores.
pub fn predict(model: &TrainedPredictor, x: &[Vec<f64>]) -> Result<Prediction> {
    if model.spec.problem != Problem::Classification {
        return Err(Error::OutOfRange("predict needs a classifier".into()));
    }
    model.check_input(x)?;
    let scores = model.raw_scores(x);
    let t = model.threshold();
    Ok(Prediction {
        labels: scores.iter().map(|&s| s > t).collect(),
        scores,
    })
}

/// Unclipped real-valued outputs (classifiers return their scores).
pub fn predict_values(model: &TrainedPredictor, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.check_input(x)?;
    Ok(model.raw_scores(x))
}
