//! Public/private task splits and the prediction experiments built on them.
//!
//! A split divides the tasks of a leaderboard into a public part, whose scores
//! are observed, and a private part, whose information is to be predicted.
//! Two problems are posed per split: for every pair of models, classify which
//! one has the lower mean private score; and for every model, regress its mean
//! private score. Models are divided into train and validation rows first, so
//! no validation model contributes to training features.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostic::Diagnostic;
use crate::error::{Error, Result};
use crate::leaderboard::Leaderboard;
use crate::metrics::{
    ci95, classification_metrics, regression_metrics, ClassificationReport, MetricName, RegressionReport,
};
use crate::predictors::{predict, predict_values, train_classifier, train_regressor, PredictorSpec, Problem};

/// Largest task count for which every split is enumerated.
pub const ENUMERATION_CAP: usize = 20;
/// Subsets drawn per public size when a board is too large to enumerate.
pub const DEFAULT_SAMPLES_PER_RATE: usize = 100;
pub const DEFAULT_ROW_RATIO: f64 = 0.7;
const MAX_TASKS: usize = 64;

/// A division of the tasks into non-empty, disjoint public and private parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitSpec {
    pub public_tasks: Vec<usize>,
    pub private_tasks: Vec<usize>,
    /// Bit `t` is set iff task `t` is public.
    pub mask: u64,
}

impl SplitSpec {
    pub fn from_mask(mask: u64, n_tasks: usize) -> Result<Self> {
        if !(2..=MAX_TASKS).contains(&n_tasks) {
            return Err(Error::OutOfRange(format!(
                "split needs 2..={MAX_TASKS} tasks, got {n_tasks}"
            )));
        }
        let full = if n_tasks == 64 { u64::MAX } else { (1u64 << n_tasks) - 1 };
        if mask == 0 || mask & full == full || mask & !full != 0 {
            return Err(Error::OutOfRange(format!(
                "mask {mask:#b} is not a proper non-empty subset of {n_tasks} tasks"
            )));
        }
        let (public_tasks, private_tasks) = (0..n_tasks).partition(|&t| mask >> t & 1 == 1);
        Ok(Self {
            public_tasks,
            private_tasks,
            mask,
        })
    }

    pub fn from_public(public: &[usize], n_tasks: usize) -> Result<Self> {
        let mut mask = 0u64;
        for &t in public {
            if t >= n_tasks || t >= MAX_TASKS {
                return Err(Error::OutOfRange(format!("task index {t} out of range")));
            }
            mask |= 1 << t;
        }
        Self::from_mask(mask, n_tasks)
    }

    pub fn n_tasks(&self) -> usize {
        self.public_tasks.len() + self.private_tasks.len()
    }

    pub fn public_size(&self) -> usize {
        self.public_tasks.len()
    }

    /// `|public| / n_tasks`.
    pub fn compression_rate(&self) -> f64 {
        self.public_tasks.len() as f64 / self.n_tasks() as f64
    }
}

/// Every split of `n_tasks` tasks, in increasing mask order.
pub fn enumerate_splits(n_tasks: usize) -> Result<Vec<SplitSpec>> {
    if n_tasks < 2 {
        return Err(Error::OutOfRange(format!("need >= 2 tasks, got {n_tasks}")));
    }
    if n_tasks > ENUMERATION_CAP {
        return Err(Error::OutOfRange(format!(
            "{n_tasks} tasks exceed the enumeration cap of {ENUMERATION_CAP}; sample instead"
        )));
    }
    (1..(1u64 << n_tasks) - 1)
        .map(|m| SplitSpec::from_mask(m, n_tasks))
        .collect()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `n` bits in increasing order (Gosper's hack).
fn masks_of_size(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut m: u128 = (1u128 << k) - 1;
    while m >> n == 0 {
        out.push(m as u64);
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
    out
}

/// For each public size `k`, up to `per_rate` distinct uniformly drawn
/// `k`-subsets. Sizes ascend; masks ascend within a size.
pub fn sample_splits(n_tasks: usize, per_rate: usize, seed: u64) -> Result<Vec<SplitSpec>> {
    if !(2..=MAX_TASKS).contains(&n_tasks) {
        return Err(Error::OutOfRange(format!(
            "sampling needs 2..={MAX_TASKS} tasks, got {n_tasks}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for k in 1..n_tasks {
        let masks: Vec<u64> = if binomial(n_tasks, k) <= per_rate as u128 {
            masks_of_size(n_tasks, k)
        } else {
            let mut seen = BTreeSet::new();
            while seen.len() < per_rate {
                let m = index::sample(&mut rng, n_tasks, k)
                    .into_iter()
                    .fold(0u64, |acc, t| acc | 1 << t);
                seen.insert(m);
            }
            seen.into_iter().collect()
        };
        for m in masks {
            out.push(SplitSpec::from_mask(m, n_tasks)?);
        }
    }
    Ok(out)
}

/// Models used for training and for validation. Both lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSplit {
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
}

/// Seeded shuffle of the models, cut at `round(ratio * n)` and adjusted so both
/// sides keep at least two rows.
pub fn make_row_split(n_models: usize, ratio: f64, seed: u64) -> Result<RowSplit> {
    if n_models < 4 {
        return Err(Error::NotEnoughRows {
            need: 4,
            got: n_models,
        });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::OutOfRange(format!("row ratio must be in (0, 1), got {ratio}")));
    }
    let mut order: Vec<usize> = (0..n_models).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((ratio * n_models as f64).round() as usize).clamp(2, n_models - 2);
    let mut train_rows = order[..cut].to_vec();
    let mut val_rows = order[cut..].to_vec();
    train_rows.sort_unstable();
    val_rows.sort_unstable();
    Ok(RowSplit { train_rows, val_rows })
}

/// How model rows are divided for each evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPolicy {
    pub ratio: f64,
    pub seed: u64,
    /// Row splits per evaluation; metrics are averaged over them.
    pub repeats: usize,
}

impl Default for RowPolicy {
    fn default() -> Self {
        Self {
            ratio: DEFAULT_ROW_RATIO,
            seed: 0,
            repeats: 1,
        }
    }
}

impl RowPolicy {
    /// Repeat `r` uses seed `seed + r`.
    pub fn row_splits(&self, n_models: usize) -> Result<Vec<RowSplit>> {
        (0..self.repeats.max(1) as u64)
            .map(|r| make_row_split(n_models, self.ratio, self.seed.wrapping_add(r)))
            .collect()
    }
}

/// Labelling of model pairs whose private averages are exactly equal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Label 0, as the strict indicator `avg_i < avg_j` gives.
    #[default]
    Zero,
    /// Leave tied pairs out.
    Drop,
}

/// Pairwise comparison data for one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDataset {
    pub x_tr: Vec<Vec<f64>>,
    pub y_tr: Vec<bool>,
    pub x_val: Vec<Vec<f64>>,
    pub y_val: Vec<bool>,
    /// `(i, j)` model indices behind each training row.
    pub pairs_tr: Vec<(usize, usize)>,
    pub pairs_val: Vec<(usize, usize)>,
}

/// Score regression data for one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegDataset {
    pub x_tr: Vec<Vec<f64>>,
    pub y_tr: Vec<f64>,
    pub x_val: Vec<Vec<f64>>,
    pub y_val: Vec<f64>,
}

fn check_inputs(lb: &Leaderboard, split: &SplitSpec, rows: &RowSplit) -> Result<()> {
    if !lb.is_normalized() {
        return Err(Error::NotNormalized);
    }
    if split.n_tasks() != lb.n_tasks() {
        return Err(Error::DimensionMismatch {
            expected: lb.n_tasks(),
            got: split.n_tasks(),
        });
    }
    let mut seen = vec![false; lb.n_models()];
    for &r in rows.train_rows.iter().chain(&rows.val_rows) {
        if r >= lb.n_models() || std::mem::replace(&mut seen[r], true) {
            return Err(Error::OutOfRange(format!("row split is not a partition (row {r})")));
        }
    }
    if rows.train_rows.len() < 2 || rows.val_rows.len() < 2 {
        return Err(Error::OutOfRange("row split needs >= 2 rows per side".into()));
    }
    Ok(())
}

fn public_features(lb: &Leaderboard, split: &SplitSpec, model: usize) -> Vec<f64> {
    split.public_tasks.iter().map(|&t| lb.score(model, t)).collect()
}

fn private_mean(lb: &Leaderboard, split: &SplitSpec, model: usize) -> f64 {
    split.private_tasks.iter().map(|&t| lb.score(model, t)).sum::<f64>() / split.private_tasks.len() as f64
}

/// Rows for `pairs(R) = {(i, j) : i, j ∈ R, i < j}` with features
/// `concat(public_i, public_j)` and label `avg(private_i) < avg(private_j)`.
pub fn build_pair_dataset(
    lb: &Leaderboard,
    split: &SplitSpec,
    rows: &RowSplit,
    ties: TiePolicy,
) -> Result<PairDataset> {
    check_inputs(lb, split, rows)?;
    let side = |models: &[usize]| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut pairs = Vec::new();
        for (a, &i) in models.iter().enumerate() {
            for &j in &models[a + 1..] {
                let (pi, pj) = (private_mean(lb, split, i), private_mean(lb, split, j));
                if pi == pj && ties == TiePolicy::Drop {
                    continue;
                }
                let mut features = public_features(lb, split, i);
                features.extend(public_features(lb, split, j));
                x.push(features);
                y.push(pi < pj);
                pairs.push((i, j));
            }
        }
        (x, y, pairs)
    };
    let (x_tr, y_tr, pairs_tr) = side(&rows.train_rows);
    let (x_val, y_val, pairs_val) = side(&rows.val_rows);
    Ok(PairDataset {
        x_tr,
        y_tr,
        x_val,
        y_val,
        pairs_tr,
        pairs_val,
    })
}

/// Public score rows as features, mean private score as target.
pub fn build_reg_dataset(lb: &Leaderboard, split: &SplitSpec, rows: &RowSplit) -> Result<RegDataset> {
    check_inputs(lb, split, rows)?;
    let side = |models: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        models
            .iter()
            .map(|&m| (public_features(lb, split, m), private_mean(lb, split, m)))
            .unzip()
    };
    let (x_tr, y_tr) = side(&rows.train_rows);
    let (x_val, y_val) = side(&rows.val_rows);
    Ok(RegDataset {
        x_tr,
        y_tr,
        x_val,
        y_val,
    })
}

/// Validation metrics of one predictor on one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub split: SplitSpec,
    pub public_task_names: Vec<String>,
    pub predictor: PredictorSpec,
    pub classification: Option<ClassificationReport>,
    pub regression: Option<RegressionReport>,
    pub compression_rate: f64,
    /// Row splits that contributed to the averaged metrics.
    pub repeats: usize,
}

impl SplitResult {
    pub fn metric(&self, m: MetricName) -> Option<f64> {
        if m.is_classification() {
            self.classification.and_then(|r| r.get(m))
        } else {
            self.regression.and_then(|r| r.get(m))
        }
    }
}

/// Either metrics, or the reason the split could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitOutcome {
    Evaluated(SplitResult),
    Degenerate {
        split: SplitSpec,
        predictor: String,
        reason: String,
    },
}

impl SplitOutcome {
    pub fn result(&self) -> Option<&SplitResult> {
        match self {
            SplitOutcome::Evaluated(r) => Some(r),
            SplitOutcome::Degenerate { .. } => None,
        }
    }

    pub fn into_result(self) -> Option<SplitResult> {
        match self {
            SplitOutcome::Evaluated(r) => Some(r),
            SplitOutcome::Degenerate { .. } => None,
        }
    }
}

enum Scored {
    Class(ClassificationReport),
    Reg(RegressionReport),
    Degenerate(String),
}

fn degenerate_reason(e: &Error) -> Option<String> {
    match e {
        Error::SingleClass | Error::NotEnoughRows { .. } | Error::UndefinedMetric(_) => Some(e.to_string()),
        _ => None,
    }
}

fn score_once(lb: &Leaderboard, split: &SplitSpec, spec: &PredictorSpec, rows: &RowSplit) -> Result<Scored> {
    let attempt = || -> Result<Scored> {
        match spec.problem {
            Problem::Classification => {
                let data = build_pair_dataset(lb, split, rows, TiePolicy::Zero)?;
                if data.y_val.iter().all(|&l| l) || data.y_val.iter().all(|&l| !l) {
                    return Ok(Scored::Degenerate("single-class validation labels".into()));
                }
                let model = train_classifier(spec, &data.x_tr, &data.y_tr)?;
                let pred = predict(&model, &data.x_val)?;
                Ok(Scored::Class(classification_metrics(&data.y_val, &pred.labels, &pred.scores)?))
            }
            Problem::Regression => {
                let data = build_reg_dataset(lb, split, rows)?;
                let model = train_regressor(spec, &data.x_tr, &data.y_tr)?;
                let pred = predict_values(&model, &data.x_val)?;
                Ok(Scored::Reg(regression_metrics(&data.y_val, &pred)?))
            }
        }
    };
    match attempt() {
        Err(e) => degenerate_reason(&e).map(Scored::Degenerate).ok_or(e),
        ok => ok,
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn average_classification(reports: &[ClassificationReport]) -> ClassificationReport {
    let avg = |f: fn(&ClassificationReport) -> f64| mean_of(reports.iter().map(f));
    ClassificationReport {
        accuracy: avg(|r| r.accuracy),
        f1: avg(|r| r.f1),
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        roc_auc: avg(|r| r.roc_auc),
    }
}

/// Averages field-wise, except `rmse = sqrt(mean mse)` so the identity holds.
fn average_regression(reports: &[RegressionReport]) -> RegressionReport {
    let avg = |f: fn(&RegressionReport) -> f64| mean_of(reports.iter().map(f));
    let mse = avg(|r| r.mse);
    let r2 = avg(|r| r.r2);
    RegressionReport {
        mse,
        rmse: mse.sqrt(),
        mae: avg(|r| r.mae),
        max_error: avg(|r| r.max_error),
        r2,
        r2_clamped: r2.max(0.0),
    }
}

/// Trains on the train rows and scores the validation rows.
pub fn evaluate_split(
    lb: &Leaderboard,
    split: &SplitSpec,
    spec: &PredictorSpec,
    rows: &RowSplit,
) -> Result<SplitOutcome> {
    evaluate_split_repeated(lb, split, spec, std::slice::from_ref(rows))
}

/// [`evaluate_split`] over several row splits, averaging the metrics of the
/// non-degenerate ones.
pub fn evaluate_split_repeated(
    lb: &Leaderboard,
    split: &SplitSpec,
    spec: &PredictorSpec,
    rows: &[RowSplit],
) -> Result<SplitOutcome> {
    let mut class = Vec::new();
    let mut reg = Vec::new();
    let mut reason = String::from("no row splits");
    for r in rows {
        match score_once(lb, split, spec, r)? {
            Scored::Class(c) => class.push(c),
            Scored::Reg(g) => reg.push(g),
            Scored::Degenerate(why) => reason = why,
        }
    }
    let repeats = class.len() + reg.len();
    if repeats == 0 {
        return Ok(SplitOutcome::Degenerate {
            split: split.clone(),
            predictor: spec.id(),
            reason,
        });
    }
    Ok(SplitOutcome::Evaluated(SplitResult {
        split: split.clone(),
        public_task_names: split
            .public_tasks
            .iter()
            .map(|&t| lb.task_names()[t].clone())
            .collect(),
        predictor: spec.clone(),
        classification: (!class.is_empty()).then(|| average_classification(&class)),
        regression: (!reg.is_empty()).then(|| average_regression(&reg)),
        compression_rate: split.compression_rate(),
        repeats,
    }))
}

/// Split selection and row handling shared by the search experiments.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub rows: RowPolicy,
    /// Sample this many splits per public size instead of enumerating.
    /// Boards above [`ENUMERATION_CAP`] tasks are always sampled.
    pub samples_per_rate: Option<usize>,
    pub split_seed: u64,
}

/// Candidate splits with public size in `sizes`, ordered by size then mask.
fn candidate_splits(
    n_tasks: usize,
    sizes: std::ops::RangeInclusive<usize>,
    opts: &SearchOptions,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Vec<SplitSpec>> {
    let mut splits = match opts.samples_per_rate {
        Some(p) => sample_splits(n_tasks, p, opts.split_seed)?,
        None if n_tasks <= ENUMERATION_CAP => enumerate_splits(n_tasks)?,
        None => {
            diagnostics.push(Diagnostic::warn(format!(
                "{n_tasks} tasks exceed the enumeration cap; sampling {DEFAULT_SAMPLES_PER_RATE} splits per size"
            )));
            sample_splits(n_tasks, DEFAULT_SAMPLES_PER_RATE, opts.split_seed)?
        }
    };
    splits.retain(|s| sizes.contains(&s.public_size()));
    splits.sort_by_key(|s| (s.public_size(), s.mask));
    Ok(splits)
}

fn evaluate_all(
    lb: &Leaderboard,
    splits: &[SplitSpec],
    specs: &[PredictorSpec],
    rows: &[RowSplit],
) -> Result<Vec<SplitOutcome>> {
    let jobs: Vec<(&SplitSpec, &PredictorSpec)> = splits
        .iter()
        .flat_map(|s| specs.iter().map(move |p| (s, p)))
        .collect();
    jobs.par_iter()
        .map(|(s, p)| evaluate_split_repeated(lb, s, p, rows))
        .collect()
}

fn degenerate_diagnostics(outcomes: &[SplitOutcome], diagnostics: &mut Vec<Diagnostic>) {
    for o in outcomes {
        if let SplitOutcome::Degenerate {
            split,
            predictor,
            reason,
        } = o
        {
            diagnostics.push(Diagnostic::warn(format!(
                "skipped split {:?} for {predictor}: {reason}",
                split.public_tasks
            )));
        }
    }
}

fn specs_for(specs: &[PredictorSpec], metric: MetricName) -> Result<Vec<PredictorSpec>> {
    let problem = if metric.is_classification() {
        Problem::Classification
    } else {
        Problem::Regression
    };
    let chosen: Vec<PredictorSpec> = specs.iter().filter(|s| s.problem == problem).cloned().collect();
    if chosen.is_empty() {
        return Err(Error::OutOfRange(format!(
            "no {} predictor to score `{metric}`",
            problem.as_str()
        )));
    }
    Ok(chosen)
}

/// Best split found by a search, with bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub best: SplitResult,
    pub candidates: usize,
    pub evaluated: usize,
    pub degenerate: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Largest public size allowed by `max_compression`.
pub fn max_public_size(n_tasks: usize, max_compression: f64) -> Result<usize> {
    let k = (max_compression * n_tasks as f64 + 1e-9).floor();
    if k.is_nan() || k < 1.0 {
        return Err(Error::NoValidSplit(format!(
            "max compression {max_compression} admits no public task out of {n_tasks}"
        )));
    }
    Ok((k as usize).min(n_tasks - 1))
}

/// Evaluates every split with `|public| / n <= max_compression` under every
/// spec that solves `metric`'s problem, and returns the best result. Ties go to
/// the smaller public set, then the smaller mask, then the earlier spec.
pub fn best_split_under_compression(
    lb: &Leaderboard,
    max_compression: f64,
    specs: &[PredictorSpec],
    metric: MetricName,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let max_k = max_public_size(lb.n_tasks(), max_compression)?;
    let specs = specs_for(specs, metric)?;
    let rows = opts.rows.row_splits(lb.n_models())?;
    let mut diagnostics = Vec::new();
    let splits = candidate_splits(lb.n_tasks(), 1..=max_k, opts, &mut diagnostics)?;
    let outcomes = evaluate_all(lb, &splits, &specs, &rows)?;
    degenerate_diagnostics(&outcomes, &mut diagnostics);
    let mut best: Option<(f64, &SplitResult)> = None;
    let mut evaluated = 0;
    for r in outcomes.iter().filter_map(SplitOutcome::result) {
        evaluated += 1;
        let Some(v) = r.metric(metric) else { continue };
        let better = match best {
            None => true,
            Some((b, _)) => v != b && metric.meets(v, b),
        };
        if better {
            best = Some((v, r));
        }
    }
    let best = best
        .map(|(_, r)| r.clone())
        .ok_or_else(|| Error::NoValidSplit("every candidate split was degenerate".into()))?;
    Ok(SearchOutcome {
        best,
        candidates: outcomes.len(),
        evaluated,
        degenerate: outcomes.len() - evaluated,
        diagnostics,
    })
}

/// Smallest public set whose validation `metric` meets `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinSubsetOutcome {
    pub found: Option<SplitResult>,
    pub evaluated: usize,
    pub degenerate: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Scans public sizes upward and returns the first split, in mask order, that
/// meets the threshold.
pub fn min_public_subset(
    lb: &Leaderboard,
    spec: &PredictorSpec,
    metric: MetricName,
    threshold: f64,
    opts: &SearchOptions,
) -> Result<MinSubsetOutcome> {
    if !threshold.is_finite() {
        return Err(Error::NonFinite("threshold".into()));
    }
    let specs = specs_for(std::slice::from_ref(spec), metric)?;
    let rows = opts.rows.row_splits(lb.n_models())?;
    let mut diagnostics = Vec::new();
    let all = candidate_splits(lb.n_tasks(), 1..=lb.n_tasks() - 1, opts, &mut diagnostics)?;
    let (mut evaluated, mut degenerate) = (0, 0);
    for k in 1..lb.n_tasks() {
        let splits: Vec<SplitSpec> = all.iter().filter(|s| s.public_size() == k).cloned().collect();
        let outcomes = evaluate_all(lb, &splits, &specs, &rows)?;
        degenerate_diagnostics(&outcomes, &mut diagnostics);
        let mut hit = None;
        for o in outcomes {
            match o.into_result() {
                Some(r) => {
                    evaluated += 1;
                    if hit.is_none() && r.metric(metric).is_some_and(|v| metric.meets(v, threshold)) {
                        hit = Some(r);
                    }
                }
                None => degenerate += 1,
            }
        }
        if hit.is_some() {
            return Ok(MinSubsetOutcome {
                found: hit,
                evaluated,
                degenerate,
                diagnostics,
            });
        }
    }
    Ok(MinSubsetOutcome {
        found: None,
        evaluated,
        degenerate,
        diagnostics,
    })
}

/// Aggregate of one metric over the splits evaluated at one rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    /// `mean ± 1.96 · sd / sqrt(count)`.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Empirical 2.5th and 97.5th percentiles.
    pub p2_5: f64,
    pub p97_5: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorSummary {
    pub evaluated: usize,
    pub degenerate: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub public_size: usize,
    pub rate: f64,
    pub splits: usize,
    /// Keyed by predictor id.
    pub predictors: BTreeMap<String, PredictorSummary>,
}

/// Metric distributions as a function of the compression rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionProfile {
    pub task_names: Vec<String>,
    pub n_models: usize,
    pub rates: Vec<RateSummary>,
    pub diagnostics: Vec<Diagnostic>,
}

fn summarize(values: &[f64]) -> Result<MetricSummary> {
    let ci = ci95(values)?;
    Ok(MetricSummary {
        count: ci.n,
        mean: ci.mean,
        ci_low: ci.param_low,
        ci_high: ci.param_high,
        p2_5: ci.low,
        p97_5: ci.high,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Evaluates every split and spec at every public size `1..n_tasks` and
/// aggregates each metric. Degenerate splits are counted, not aggregated.
pub fn compression_profile(
    lb: &Leaderboard,
    specs: &[PredictorSpec],
    opts: &SearchOptions,
) -> Result<CompressionProfile> {
    if specs.is_empty() {
        return Err(Error::OutOfRange("no predictors given".into()));
    }
    let rows = opts.rows.row_splits(lb.n_models())?;
    let mut diagnostics = Vec::new();
    let n = lb.n_tasks();
    let splits = candidate_splits(n, 1..=n - 1, opts, &mut diagnostics)?;
    let outcomes = evaluate_all(lb, &splits, specs, &rows)?;
    degenerate_diagnostics(&outcomes, &mut diagnostics);
    let mut rates = Vec::with_capacity(n - 1);
    for k in 1..n {
        let mut predictors = BTreeMap::new();
        for spec in specs {
            let id = spec.id();
            let mut values: BTreeMap<MetricName, Vec<f64>> = BTreeMap::new();
            let (mut evaluated, mut degenerate) = (0, 0);
            for (o, s) in outcomes.iter().zip(splits.iter().flat_map(|s| specs.iter().map(move |p| (s, p)))) {
                if s.0.public_size() != k || s.1 != spec {
                    continue;
                }
                let Some(r) = o.result() else {
                    degenerate += 1;
                    continue;
                };
                evaluated += 1;
                let names: &[MetricName] = match spec.problem {
                    Problem::Classification => &MetricName::CLASSIFICATION,
                    Problem::Regression => &MetricName::REGRESSION,
                };
                for &m in names {
                    if let Some(v) = r.metric(m) {
                        values.entry(m).or_default().push(v);
                    }
                }
            }
            let metrics = values
                .iter()
                .map(|(m, v)| Ok((m.as_str().to_string(), summarize(v)?)))
                .collect::<Result<_>>()?;
            predictors.insert(
                id,
                PredictorSummary {
                    evaluated,
                    degenerate,
                    metrics,
                },
            );
        }
        rates.push(RateSummary {
            public_size: k,
            rate: k as f64 / n as f64,
            splits: splits.iter().filter(|s| s.public_size() == k).count(),
            predictors,
        });
    }
    Ok(CompressionProfile {
        task_names: lb.task_names().to_vec(),
        n_models: lb.n_models(),
        rates,
        diagnostics,
    })
}
