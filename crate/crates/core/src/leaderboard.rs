//! Leaderboard ingestion, validation and normalization.
//!
//! A [`Leaderboard`] is a complete `n_models x n_tasks` score matrix. Boards
//! come either from a CSV file (`model,<task1>,...`) or from a dump of
//! per-model evaluation records, which [`extract_task_groups`] turns into one
//! board per benchmark.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostic::Diagnostic;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_COMMON_MODELS: usize = 10;
pub const DEFAULT_METRIC_PRIORITY: [&str; 3] = ["accuracy", "f1", "exact_match"];

/// How a raw score column was mapped into `[0, 1]`: `normalized = offset + scale * raw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTransform {
    pub task: String,
    pub method: ScalingMethod,
    pub orientation: Orientation,
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMethod {
    Percentage,
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    pub orientation: Orientation,
    pub is_percentage: bool,
}

impl MetricSpec {
    /// Default spec for a column: higher is better, percentage iff every score is in `(1, 100]`.
    pub fn infer(name: impl Into<String>, column: &[f64]) -> Self {
        let is_percentage = !column.is_empty() && column.iter().all(|&s| s > 1.0 && s <= 100.0);
        Self {
            name: name.into(),
            orientation: Orientation::HigherBetter,
            is_percentage,
        }
    }
}

/// One row of an evaluation dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub benchmark_id: String,
    pub task_id: String,
    pub model_id: String,
    pub metrics: BTreeMap<String, f64>,
}

/// Parsed records plus whatever had to be dropped on the way.
#[derive(Debug, Clone, Default)]
pub struct RecordSet {
    pub records: Vec<EvaluationRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Default)]
pub struct TaskGroups {
    pub boards: Vec<Leaderboard>,
    /// Names of the benchmark each board came from, parallel to `boards`.
    pub benchmarks: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Complete score matrix, models in rows and tasks in columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    model_names: Vec<String>,
    task_names: Vec<String>,
    scores: Vec<Vec<f64>>,
    metric_names: Vec<String>,
    normalized: bool,
    transforms: Vec<TaskTransform>,
}

impl Leaderboard {
    /// Builds a board and checks completeness, uniqueness and minimum size.
    pub fn new(
        model_names: Vec<String>,
        task_names: Vec<String>,
        scores: Vec<Vec<f64>>,
        metric_names: Vec<String>,
    ) -> Result<Self> {
        let lb = Self::from_raw_parts(model_names, task_names, scores, metric_names);
        lb.check()?;
        Ok(lb)
    }

    /// Builds a board without any checks. Use [`validate`] to inspect it.
    pub fn from_raw_parts(
        model_names: Vec<String>,
        task_names: Vec<String>,
        scores: Vec<Vec<f64>>,
        metric_names: Vec<String>,
    ) -> Self {
        Self {
            model_names,
            task_names,
            scores,
            metric_names,
            normalized: false,
            transforms: Vec::new(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.model_names.len() < 2 {
            return Err(Error::TooSmall(format!(
                "need n_models >= 2, got {}",
                self.model_names.len()
            )));
        }
        if self.task_names.len() < 2 {
            return Err(Error::TooSmall(format!(
                "need n_tasks >= 2, got {}",
                self.task_names.len()
            )));
        }
        if let Some(dup) = first_duplicate(&self.model_names) {
            return Err(Error::DuplicateModel(dup.to_string()));
        }
        if let Some(dup) = first_duplicate(&self.task_names) {
            return Err(Error::DuplicateTask(dup.to_string()));
        }
        if self.scores.len() != self.model_names.len() {
            return Err(Error::IncompleteMatrix(format!(
                "{} score rows for {} models",
                self.scores.len(),
                self.model_names.len()
            )));
        }
        if self.metric_names.len() != self.task_names.len() {
            return Err(Error::IncompleteMatrix(format!(
                "{} metric names for {} tasks",
                self.metric_names.len(),
                self.task_names.len()
            )));
        }
        for (i, row) in self.scores.iter().enumerate() {
            if row.len() != self.task_names.len() {
                return Err(Error::IncompleteMatrix(format!(
                    "row `{}` has {} cells, expected {}",
                    self.model_names[i],
                    row.len(),
                    self.task_names.len()
                )));
            }
            if let Some(j) = row.iter().position(|s| !s.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "model `{}`, task `{}`",
                    self.model_names[i], self.task_names[j]
                )));
            }
        }
        Ok(())
    }

    /// Marks a board whose scores are already in `[0, 1]`, higher-better, as
    /// normalized, recording identity transforms.
    pub fn assume_normalized(mut self) -> Result<Self> {
        self.check()?;
        if let Some((i, j)) = self.scores.iter().enumerate().find_map(|(i, row)| {
            row.iter()
                .position(|s| !(0.0..=1.0).contains(s))
                .map(|j| (i, j))
        }) {
            return Err(Error::OutOfRange(format!(
                "score {} of model `{}` on task `{}` is outside [0, 1]",
                self.scores[i][j], self.model_names[i], self.task_names[j]
            )));
        }
        self.transforms = self
            .task_names
            .iter()
            .map(|t| TaskTransform {
                task: t.clone(),
                method: ScalingMethod::MinMax,
                orientation: Orientation::HigherBetter,
                scale: 1.0,
                offset: 0.0,
            })
            .collect();
        self.normalized = true;
        Ok(self)
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.task_names.len()
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn task_names(&self) -> &[String] {
        &self.task_names
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn row(&self, model: usize) -> &[f64] {
        &self.scores[model]
    }

    pub fn score(&self, model: usize, task: usize) -> f64 {
        self.scores[model][task]
    }

    pub fn column(&self, task: usize) -> Vec<f64> {
        self.scores.iter().map(|row| row[task]).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Affine maps applied by [`normalize_and_orient`], one per task.
    pub fn transforms(&self) -> &[TaskTransform] {
        &self.transforms
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.task_names.iter().position(|t| t == name)
    }

    /// Renders the board in the CSV format accepted by [`parse_leaderboard_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for t in &self.task_names {
            out.push(',');
            out.push_str(&csv_field(t));
        }
        out.push('\n');
        for (name, row) in self.model_names.iter().zip(&self.scores) {
            out.push_str(&csv_field(name));
            for s in row {
                out.push(',');
                out.push_str(&s.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    let mut seen = HashSet::new();
    names
        .iter()
        .find(|n| !seen.insert(n.as_str()))
        .map(String::as_str)
}

/// Parses `model,<task1>,...,<taskK>` CSV into an un-normalized board.
pub fn parse_leaderboard_csv(bytes: &[u8]) -> Result<Leaderboard> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut rows = reader.records();
    let header = match rows.next() {
        Some(r) => r.map_err(|e| Error::Malformed(e.to_string()))?,
        None => return Err(Error::TooSmall("empty file".into())),
    };
    if header.get(0) != Some("model") {
        return Err(Error::Malformed(
            "first header cell must be `model`".into(),
        ));
    }
    let task_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if task_names.iter().any(String::is_empty) {
        return Err(Error::Malformed("empty task name in header".into()));
    }
    if let Some(dup) = first_duplicate(&task_names) {
        return Err(Error::DuplicateTask(dup.to_string()));
    }

    let mut model_names = Vec::new();
    let mut scores = Vec::new();
    for (line, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| Error::Malformed(e.to_string()))?;
        let row_no = line + 1;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue; // blank line
        }
        if rec.len() < task_names.len() + 1 {
            return Err(Error::IncompleteMatrix(format!(
                "row {row_no} has {} cells, expected {}",
                rec.len(),
                task_names.len() + 1
            )));
        }
        if rec.len() > task_names.len() + 1 {
            return Err(Error::Malformed(format!(
                "row {row_no} has {} cells, expected {}",
                rec.len(),
                task_names.len() + 1
            )));
        }
        let name = rec.get(0).unwrap_or_default();
        if name.is_empty() {
            return Err(Error::IncompleteMatrix(format!("row {row_no} has no model name")));
        }
        let mut row = Vec::with_capacity(task_names.len());
        for (col, cell) in rec.iter().enumerate().skip(1) {
            if cell.is_empty() {
                return Err(Error::IncompleteMatrix(format!(
                    "empty cell at row {row_no}, column {col}"
                )));
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row: row_no,
                        column: col,
                        value: cell.to_string(),
                    })
                }
            }
        }
        model_names.push(name.to_string());
        scores.push(row);
    }

    let metric_names = vec!["score".to_string(); task_names.len()];
    Leaderboard::new(model_names, task_names, scores, metric_names)
}

/// Parses a JSON array of `{benchmark, task, model, metrics}` objects.
///
/// Entries without a usable finite metric are dropped with a diagnostic;
/// repeated `(benchmark, task, model)` triples are merged, first value wins.
pub fn parse_records_json(bytes: &[u8]) -> Result<RecordSet> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| Error::Malformed(e.to_string()))?;
    let items = doc
        .as_array()
        .ok_or_else(|| Error::Malformed("top-level value must be an array".into()))?;

    let mut out = RecordSet::default();
    let mut index: HashMap<(String, String, String), usize> = HashMap::new();
    for (pos, item) in items.iter().enumerate() {
        let Some(obj) = item.as_object() else {
            out.diagnostics
                .push(Diagnostic::warn(format!("entry {pos}: not an object, dropped")));
            continue;
        };
        let field = |key: &str| {
            obj.get(key)
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        let (Some(benchmark), Some(task), Some(model)) =
            (field("benchmark"), field("task"), field("model"))
        else {
            out.diagnostics.push(Diagnostic::warn(format!(
                "entry {pos}: missing benchmark/task/model, dropped"
            )));
            continue;
        };
        let mut metrics = BTreeMap::new();
        if let Some(map) = obj.get("metrics").and_then(Value::as_object) {
            for (name, value) in map {
                let v = match value {
                    Value::Number(n) => n.as_f64(),
                    Value::String(s) => s.trim().parse::<f64>().ok(),
                    _ => None,
                };
                if let Some(v) = v.filter(|v| v.is_finite()) {
                    metrics.insert(name.clone(), v);
                }
            }
        }
        if metrics.is_empty() {
            out.diagnostics.push(Diagnostic::warn(format!(
                "entry {pos} ({benchmark}/{task}/{model}): no finite real-valued metric, dropped"
            )));
            continue;
        }
        let key = (benchmark.clone(), task.clone(), model.clone());
        if let Some(&existing) = index.get(&key) {
            let rec: &mut EvaluationRecord = &mut out.records[existing];
            for (k, v) in metrics {
                rec.metrics.entry(k).or_insert(v);
            }
            out.diagnostics.push(Diagnostic::warn(format!(
                "entry {pos} ({benchmark}/{task}/{model}): duplicate record merged"
            )));
            continue;
        }
        index.insert(key, out.records.len());
        out.records.push(EvaluationRecord {
            benchmark_id: benchmark,
            task_id: task,
            model_id: model,
            metrics,
        });
    }
    if out.records.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(out)
}

fn lookup_metric(metrics: &BTreeMap<String, f64>, name: &str) -> Option<f64> {
    metrics
        .get(name)
        .or_else(|| {
            metrics
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, v)| v)
        })
        .copied()
}

fn push_unique(order: &mut Vec<String>, seen: &mut HashSet<String>, name: &str) {
    if seen.insert(name.to_string()) {
        order.push(name.to_string());
    }
}

/// Groups records by benchmark and emits one complete board per benchmark that
/// has at least `min_common_models` models evaluated on every task.
///
/// Benchmarks, tasks and models keep their first-appearance order.
pub fn extract_task_groups(
    records: &[EvaluationRecord],
    min_common_models: usize,
    metric_priority: &[String],
) -> TaskGroups {
    let min_common_models = min_common_models.max(2);
    let mut out = TaskGroups::default();

    let mut bench_order = Vec::new();
    let mut bench_seen = HashSet::new();
    for r in records {
        push_unique(&mut bench_order, &mut bench_seen, &r.benchmark_id);
    }

    for bench in &bench_order {
        let recs: Vec<&EvaluationRecord> =
            records.iter().filter(|r| &r.benchmark_id == bench).collect();
        let (mut tasks, mut task_seen) = (Vec::new(), HashSet::new());
        let (mut models, mut model_seen) = (Vec::new(), HashSet::new());
        let mut cell: HashMap<(&str, &str), &BTreeMap<String, f64>> = HashMap::new();
        for r in &recs {
            push_unique(&mut tasks, &mut task_seen, &r.task_id);
            push_unique(&mut models, &mut model_seen, &r.model_id);
            cell.entry((r.task_id.as_str(), r.model_id.as_str()))
                .or_insert(&r.metrics);
        }
        if tasks.len() < 2 {
            out.diagnostics.push(Diagnostic::warn(format!(
                "benchmark `{bench}`: only {} task, skipped",
                tasks.len()
            )));
            continue;
        }

        let candidates: Vec<&String> = models
            .iter()
            .filter(|m| tasks.iter().all(|t| cell.contains_key(&(t.as_str(), m.as_str()))))
            .collect();

        let mut selected = Vec::with_capacity(tasks.len());
        let mut dropped = None;
        for t in &tasks {
            let choice = metric_priority.iter().find(|metric| {
                let covered = candidates
                    .iter()
                    .filter(|m| lookup_metric(cell[&(t.as_str(), m.as_str())], metric).is_some())
                    .count();
                covered >= min_common_models
            });
            match choice {
                Some(m) => selected.push(m.clone()),
                None => {
                    dropped = Some(t.clone());
                    break;
                }
            }
        }
        if let Some(task) = dropped {
            out.diagnostics.push(Diagnostic::warn(format!(
                "benchmark `{bench}`: task `{task}` has no prioritized real-valued metric \
                 shared by {min_common_models} models, skipped"
            )));
            continue;
        }

        let mut model_names = Vec::new();
        let mut scores = Vec::new();
        for m in &candidates {
            let row: Option<Vec<f64>> = tasks
                .iter()
                .zip(&selected)
                .map(|(t, metric)| lookup_metric(cell[&(t.as_str(), m.as_str())], metric))
                .collect();
            if let Some(row) = row {
                model_names.push((*m).clone());
                scores.push(row);
            }
        }
        if model_names.len() < min_common_models {
            out.diagnostics.push(Diagnostic::warn(format!(
                "benchmark `{bench}`: {} common models < {min_common_models}, skipped",
                model_names.len()
            )));
            continue;
        }
        match Leaderboard::new(model_names, tasks, scores, selected) {
            Ok(lb) => {
                out.boards.push(lb);
                out.benchmarks.push(bench.clone());
            }
            Err(e) => out
                .diagnostics
                .push(Diagnostic::warn(format!("benchmark `{bench}`: {e}, skipped"))),
        }
    }
    if out.boards.len() < bench_order.len() {
        out.diagnostics.push(Diagnostic::warn(format!(
            "extracted {} of {} benchmarks",
            out.boards.len(),
            bench_order.len()
        )));
    }
    out
}

/// Maps every task column into `[0, 1]` with higher meaning better.
///
/// Percentage metrics are divided by 100, everything else is min-max scaled per
/// task, and lower-is-better columns are flipped with `s -> 1 - s`. Tasks
/// without an entry in `specs` get [`MetricSpec::infer`]. A board that is
/// already normalized is returned unchanged.
pub fn normalize_and_orient(
    lb: &Leaderboard,
    specs: &BTreeMap<String, MetricSpec>,
) -> Result<Leaderboard> {
    lb.check()?;
    if lb.normalized {
        return Ok(lb.clone());
    }
    let mut scores = lb.scores.clone();
    let mut transforms = Vec::with_capacity(lb.n_tasks());
    for (j, task) in lb.task_names.iter().enumerate() {
        let column = lb.column(j);
        let spec = specs
            .get(task)
            .cloned()
            .unwrap_or_else(|| MetricSpec::infer(lb.metric_names[j].clone(), &column));
        let (method, lo, range) = if spec.is_percentage {
            (ScalingMethod::Percentage, 0.0, 100.0)
        } else {
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= 0.0 {
                return Err(Error::DegenerateTask(task.clone()));
            }
            (ScalingMethod::MinMax, lo, hi - lo)
        };
        let (scale, offset) = match spec.orientation {
            Orientation::HigherBetter => (1.0 / range, -lo / range),
            Orientation::LowerBetter => (-1.0 / range, 1.0 + lo / range),
        };
        for (i, row) in scores.iter_mut().enumerate() {
            let mut v = (row[j] - lo) / range;
            if spec.orientation == Orientation::LowerBetter {
                v = 1.0 - v;
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange(format!(
                    "task `{task}`, model `{}`: score {} maps to {v} outside [0, 1]",
                    lb.model_names[i], lb.scores[i][j]
                )));
            }
            row[j] = v;
        }
        transforms.push(TaskTransform {
            task: task.clone(),
            method,
            orientation: spec.orientation,
            scale,
            offset,
        });
    }
    Ok(Leaderboard {
        model_names: lb.model_names.clone(),
        task_names: lb.task_names.clone(),
        scores,
        metric_names: lb.metric_names.clone(),
        normalized: true,
        transforms,
    })
}

/// Lists every invariant violation; an empty result means the board is sound.
pub fn validate(lb: &Leaderboard) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if lb.n_models() < 2 {
        out.push(Diagnostic::error(format!("n_models >= 2 violated: {}", lb.n_models())));
    }
    if lb.n_tasks() < 2 {
        out.push(Diagnostic::error(format!("n_tasks >= 2 violated: {}", lb.n_tasks())));
    }
    if let Some(d) = first_duplicate(&lb.model_names) {
        out.push(Diagnostic::error(format!("duplicate model `{d}`")));
    }
    if let Some(d) = first_duplicate(&lb.task_names) {
        out.push(Diagnostic::error(format!("duplicate task `{d}`")));
    }
    if lb.scores.len() != lb.n_models() {
        out.push(Diagnostic::error(format!(
            "{} score rows for {} models",
            lb.scores.len(),
            lb.n_models()
        )));
    }
    if lb.metric_names.len() != lb.n_tasks() {
        out.push(Diagnostic::error(format!(
            "{} metric names for {} tasks",
            lb.metric_names.len(),
            lb.n_tasks()
        )));
    }
    for (i, row) in lb.scores.iter().enumerate() {
        let name = lb.model_names.get(i).map_or("?", String::as_str);
        if row.len() != lb.n_tasks() {
            out.push(Diagnostic::error(format!(
                "row `{name}` has {} cells, expected {}",
                row.len(),
                lb.n_tasks()
            )));
        }
        for (j, &s) in row.iter().enumerate() {
            let task = lb.task_names.get(j).map_or("?", String::as_str);
            if !s.is_finite() {
                out.push(Diagnostic::error(format!(
                    "non-finite score at model `{name}`, task `{task}`"
                )));
            } else if lb.normalized && !(0.0..=1.0).contains(&s) {
                out.push(Diagnostic::error(format!(
                    "normalized score {s} outside [0, 1] at model `{name}`, task `{task}`"
                )));
            }
        }
    }
    out
}
