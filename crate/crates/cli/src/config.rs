use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vygotsky::compression::{RowPolicy, SearchOptions, DEFAULT_ROW_RATIO};
use vygotsky::leaderboard::{DEFAULT_METRIC_PRIORITY, DEFAULT_MIN_COMMON_MODELS};
use vygotsky::metrics::MetricName;
use vygotsky::numfmt::canonical_json;
use vygotsky::predictors::{Family, Hyperparameters, PredictorSpec, Problem};

use crate::error::CliError;

pub const DEFAULT_MAX_COMPRESSION: f64 = 0.4;

/// Everything a run depends on. Loaded from `--config`, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Fraction of models used for training.
    pub ratio: f64,
    /// Row splits averaged per evaluation.
    pub repeats: usize,
    pub min_models: usize,
    pub metric_priority: Vec<String>,
    pub max_compression: f64,
    pub threshold: Option<f64>,
    pub metric: MetricName,
    pub predictors: Vec<Family>,
    pub samples_per_rate: Option<usize>,
    pub task: Option<String>,
    pub k: usize,
    /// Tasks whose metric decreases with quality.
    pub lower_better: Vec<String>,
    /// Use scores as given instead of rescaling each task to [0, 1].
    pub assume_normalized: bool,
    pub hyperparameters: Hyperparameters,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: None,
            seed: 0,
            ratio: DEFAULT_ROW_RATIO,
            repeats: 1,
            min_models: DEFAULT_MIN_COMMON_MODELS,
            metric_priority: DEFAULT_METRIC_PRIORITY.iter().map(|s| s.to_string()).collect(),
            max_compression: DEFAULT_MAX_COMPRESSION,
            threshold: None,
            metric: MetricName::Accuracy,
            predictors: Family::ALL.to_vec(),
            samples_per_rate: None,
            task: None,
            k: 3,
            lower_better: Vec::new(),
            assume_normalized: false,
            hyperparameters: Hyperparameters::default(),
        }
    }
}

/// Flag values; `None` leaves the config value in place.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
    pub repeats: Option<usize>,
    pub min_models: Option<usize>,
    pub max_compression: Option<f64>,
    pub threshold: Option<f64>,
    pub metric: Option<MetricName>,
    pub predictors: Option<Vec<Family>>,
    pub samples_per_rate: Option<usize>,
    pub task: Option<String>,
    pub k: Option<usize>,
    pub assume_normalized: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field {
                    self.$field = v;
                }
            )*};
        }
        set!(seed, ratio, repeats, min_models, max_compression, metric, predictors, k);
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if o.$field.is_some() {
                    self.$field = o.$field;
                }
            )*};
        }
        set_opt!(input, out, threshold, samples_per_rate, task);
        self.assume_normalized |= o.assume_normalized;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad(format!("ratio must be in (0, 1), got {}", self.ratio));
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if self.min_models < 2 {
            return bad(format!("min-models must be >= 2, got {}", self.min_models));
        }
        if !(self.max_compression > 0.0 && self.max_compression < 1.0) {
            return bad(format!("max-compression must be in (0, 1), got {}", self.max_compression));
        }
        if self.threshold.is_some_and(|t| !t.is_finite()) {
            return bad("threshold must be finite".into());
        }
        if self.predictors.is_empty() {
            return bad("at least one predictor family is required".into());
        }
        if self.samples_per_rate == Some(0) {
            return bad("samples-per-rate must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        Ok(())
    }

    /// Hash of the canonical JSON of the config without its output path.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Canonical JSON of the config without its output path.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        canonical_json(&c).expect("config serializes")
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            rows: RowPolicy {
                ratio: self.ratio,
                seed: self.seed,
                repeats: self.repeats,
            },
            samples_per_rate: self.samples_per_rate,
            split_seed: self.seed,
        }
    }

    pub fn specs(&self, problems: &[Problem]) -> Vec<PredictorSpec> {
        let mut families = self.predictors.clone();
        families.dedup();
        families
            .iter()
            .flat_map(|&f| {
                problems.iter().map(move |&p| PredictorSpec {
                    family: f,
                    problem: p,
                    hyperparameters: self.hyperparameters.clone(),
                    seed: self.seed,
                })
            })
            .collect()
    }

    pub fn metric_problem(&self) -> Problem {
        if self.metric.is_classification() {
            Problem::Classification
        } else {
            Problem::Regression
        }
    }
}
