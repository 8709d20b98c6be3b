//! Classification and regression quality metrics, plus 95% interval summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub roc_auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub max_error: f64,
    pub r2: f64,
    /// `max(r2, 0)`, for comparison with tables that clamp.
    pub r2_clamped: f64,
}

/// Every metric a split can be scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    F1,
    Precision,
    Recall,
    RocAuc,
    Mse,
    Rmse,
    Mae,
    MaxError,
    R2,
}

impl MetricName {
    pub const CLASSIFICATION: [MetricName; 5] = [
        MetricName::Accuracy,
        MetricName::F1,
        MetricName::Precision,
        MetricName::Recall,
        MetricName::RocAuc,
    ];
    pub const REGRESSION: [MetricName; 5] = [
        MetricName::Mse,
        MetricName::Rmse,
        MetricName::Mae,
        MetricName::MaxError,
        MetricName::R2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::F1 => "f1",
            MetricName::Precision => "precision",
            MetricName::Recall => "recall",
            MetricName::RocAuc => "roc_auc",
            MetricName::Mse => "mse",
            MetricName::Rmse => "rmse",
            MetricName::Mae => "mae",
            MetricName::MaxError => "max_error",
            MetricName::R2 => "r2",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(
            self,
            MetricName::Accuracy
                | MetricName::F1
                | MetricName::Precision
                | MetricName::Recall
                | MetricName::RocAuc
                | MetricName::R2
        )
    }

    pub fn is_classification(self) -> bool {
        Self::CLASSIFICATION.contains(&self)
    }

    /// True when `value` is at least as good as `threshold`.
    pub fn meets(self, value: f64, threshold: f64) -> bool {
        if self.higher_is_better() {
            value >= threshold
        } else {
            value <= threshold
        }
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::CLASSIFICATION
            .iter()
            .chain(&Self::REGRESSION)
            .copied()
            .find(|m| m.as_str() == name)
            .ok_or_else(|| Error::UndefinedMetric(s.to_string()))
    }
}

impl ClassificationReport {
    pub fn get(&self, m: MetricName) -> Option<f64> {
        match m {
            MetricName::Accuracy => Some(self.accuracy),
            MetricName::F1 => Some(self.f1),
            MetricName::Precision => Some(self.precision),
            MetricName::Recall => Some(self.recall),
            MetricName::RocAuc => Some(self.roc_auc),
            _ => None,
        }
    }
}

impl RegressionReport {
    pub fn get(&self, m: MetricName) -> Option<f64> {
        match m {
            MetricName::Mse => Some(self.mse),
            MetricName::Rmse => Some(self.rmse),
            MetricName::Mae => Some(self.mae),
            MetricName::MaxError => Some(self.max_error),
            MetricName::R2 => Some(self.r2),
            _ => None,
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

fn ratio_or_zero(num: usize, den: usize, what: &str) -> f64 {
    if den == 0 {
        log::warn!("{what} has a zero denominator, reported as 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall, F1 and ROC-AUC with class 1 (`true`) as positive.
pub fn classification_metrics(
    labels_true: &[bool],
    labels_pred: &[bool],
    scores: &[f64],
) -> Result<ClassificationReport> {
    check_lengths(labels_true.len(), labels_pred.len())?;
    check_lengths(labels_true.len(), scores.len())?;
    if labels_true.is_empty() {
        return Err(Error::OutOfRange("empty label sequence".into()));
    }
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in labels_true.iter().zip(labels_pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
        if t == p {
            correct += 1;
        }
    }
    let precision = ratio_or_zero(tp, tp + fp, "precision");
    let recall = ratio_or_zero(tp, tp + fn_, "recall");
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        log::warn!("f1 has a zero denominator, reported as 0");
        0.0
    };
    Ok(ClassificationReport {
        accuracy: correct as f64 / labels_true.len() as f64,
        f1,
        precision,
        recall,
        roc_auc: roc_auc(labels_true, scores)?,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks in O(n log n).
pub fn roc_auc(labels_true: &[bool], scores: &[f64]) -> Result<f64> {
    check_lengths(labels_true.len(), scores.len())?;
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {i}")));
    }
    let n_pos = labels_true.iter().filter(|&&l| l).count();
    let n_neg = labels_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end share their average
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_block = idx[start..end].iter().filter(|&&i| labels_true[i]).count();
        pos_rank_sum += avg_rank * pos_in_block as f64;
        start = end;
    }
    let p = n_pos as f64;
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

/// MSE, RMSE, MAE, max error and R².
pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionReport> {
    check_lengths(y_true.len(), y_pred.len())?;
    let n = y_true.len();
    if n < 2 {
        return Err(Error::OutOfRange(format!("need at least 2 targets, got {n}")));
    }
    let mean = y_true.iter().sum::<f64>() / n as f64;
    let (mut sse, mut sae, mut max_err, mut sst) = (0.0, 0.0, 0.0f64, 0.0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        sse += e * e;
        sae += e.abs();
        max_err = max_err.max(e.abs());
        sst += (t - mean) * (t - mean);
    }
    if sst == 0.0 {
        return Err(Error::UndefinedMetric("r2 with constant targets".into()));
    }
    let mse = sse / n as f64;
    let r2 = 1.0 - sse / sst;
    Ok(RegressionReport {
        mse,
        rmse: mse.sqrt(),
        mae: sae / n as f64,
        max_error: max_err,
        r2,
        r2_clamped: r2.max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub n: usize,
    pub mean: f64,
    /// Empirical 2.5th percentile.
    pub low: f64,
    /// Empirical 97.5th percentile.
    pub high: f64,
    /// `mean - 1.96 * sd / sqrt(n)`.
    pub param_low: f64,
    /// `mean + 1.96 * sd / sqrt(n)`.
    pub param_high: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn ci95(values: &[f64]) -> Result<ConfidenceInterval> {
    if values.is_empty() {
        return Err(Error::OutOfRange("ci95 of an empty sequence".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ci95 input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = 1.96 * sd / (n as f64).sqrt();
    Ok(ConfidenceInterval {
        n,
        mean,
        low: percentile_sorted(&sorted, 0.025),
        high: percentile_sorted(&sorted, 0.975),
        param_low: mean - half,
        param_high: mean + half,
    })
}
