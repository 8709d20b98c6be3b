use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use vygotsky::compression::{
    best_split_under_compression, compression_profile, min_public_subset, MinSubsetOutcome, SearchOutcome,
};
use vygotsky::leaderboard::{
    extract_task_groups, normalize_and_orient, parse_leaderboard_csv, parse_records_json, MetricSpec, Orientation,
};
use vygotsky::metrics::MetricName;
use vygotsky::predictors::Problem;
use vygotsky::{distance_matrix, export_dot, mst, nearest_tasks, Diagnostic, Leaderboard, SpanningTree};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{sha256_hex, Report};

pub struct Input {
    pub bytes: Vec<u8>,
    pub sha256: String,
}

pub fn read_input(cfg: &RunConfig) -> Result<Input, CliError> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("--in is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = sha256_hex(&bytes);
    Ok(Input { bytes, sha256 })
}

fn emit(diagnostics: &[Diagnostic]) {
    diagnostics.iter().for_each(Diagnostic::emit);
}

/// Parses a CSV board and maps it into `[0, 1]`, higher-better.
pub fn load_board(cfg: &RunConfig, bytes: &[u8]) -> Result<Leaderboard, CliError> {
    let raw = parse_leaderboard_csv(bytes)?;
    if cfg.assume_normalized {
        if !cfg.lower_better.is_empty() {
            return Err(CliError::Usage("lower_better cannot be combined with assume_normalized".into()));
        }
        return Ok(raw.assume_normalized()?);
    }
    let mut specs = BTreeMap::new();
    for task in &cfg.lower_better {
        let j = raw
            .task_index(task)
            .ok_or_else(|| CliError::Data(format!("lower_better names unknown task `{task}`")))?;
        let mut spec = MetricSpec::infer(task.clone(), &raw.column(j));
        spec.orientation = Orientation::LowerBetter;
        specs.insert(task.clone(), spec);
    }
    let lb = normalize_and_orient(&raw, &specs)?;
    emit(&vygotsky::leaderboard::validate(&lb));
    Ok(lb)
}

#[derive(Serialize)]
struct IngestedBoard {
    benchmark: String,
    file: String,
    n_models: usize,
    n_tasks: usize,
    tasks: Vec<String>,
    metrics: Vec<String>,
}

#[derive(Serialize)]
struct IngestSummary {
    records: usize,
    boards: Vec<IngestedBoard>,
    diagnostics: Vec<Diagnostic>,
}

/// File-system safe name: lowercase ASCII alphanumerics separated by `-`.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_matches('-');
    if trimmed.is_empty() {
        "benchmark".to_string()
    } else {
        trimmed.to_string()
    }
}

pub fn ingest(cfg: &RunConfig, input: &Input, report: &mut Report) -> Result<(), CliError> {
    let set = parse_records_json(&input.bytes)?;
    let groups = extract_task_groups(&set.records, cfg.min_models, &cfg.metric_priority);
    let mut diagnostics = set.diagnostics;
    diagnostics.extend(groups.diagnostics);
    emit(&diagnostics);
    if groups.boards.is_empty() {
        return Err(CliError::Data(format!(
            "no benchmark has at least {} models evaluated on every task",
            cfg.min_models
        )));
    }
    let mut used = BTreeSet::new();
    let mut boards = Vec::new();
    for (board, benchmark) in groups.boards.iter().zip(&groups.benchmarks) {
        let base = slug(benchmark);
        let mut stem = base.clone();
        let mut suffix = 2;
        while !used.insert(stem.clone()) {
            stem = format!("{base}-{suffix}");
            suffix += 1;
        }
        let file = format!("{stem}.csv");
        report.text(&file, board.to_csv());
        boards.push(IngestedBoard {
            benchmark: benchmark.clone(),
            file,
            n_models: board.n_models(),
            n_tasks: board.n_tasks(),
            tasks: board.task_names().to_vec(),
            metrics: board.metric_names().to_vec(),
        });
    }
    let summary = IngestSummary {
        records: set.records.len(),
        boards,
        diagnostics,
    };
    report.primary_json("ingest.json", &summary)
}

pub fn dist(cfg: &RunConfig, input: &Input, report: &mut Report) -> Result<(), CliError> {
    let lb = load_board(cfg, &input.bytes)?;
    let dm = distance_matrix(&lb)?;
    report.primary_json("distance_matrix.json", &dm)
}

#[derive(Serialize)]
struct TreeReport<'a> {
    #[serde(flatten)]
    tree: &'a SpanningTree,
    total_weight: f64,
}

pub fn tree(cfg: &RunConfig, input: &Input, report: &mut Report) -> Result<(), CliError> {
    let lb = load_board(cfg, &input.bytes)?;
    let dm = distance_matrix(&lb)?;
    let tree = mst(&dm)?;
    report.primary_json(
        "mst.json",
        &TreeReport {
            tree: &tree,
            total_weight: tree.total_weight(),
        },
    )?;
    report.text("mst.dot", export_dot(&tree));
    Ok(())
}

#[derive(Serialize)]
struct Neighbor {
    task: String,
    distance: f64,
}

#[derive(Serialize)]
struct NearestReport {
    task: String,
    k: usize,
    neighbors: Vec<Neighbor>,
}

pub fn nearest(cfg: &RunConfig, input: &Input, report: &mut Report) -> Result<(), CliError> {
    let task = cfg
        .task
        .clone()
        .ok_or_else(|| CliError::Usage("nearest requires --task".into()))?;
    let lb = load_board(cfg, &input.bytes)?;
    let dm = distance_matrix(&lb)?;
    let neighbors = nearest_tasks(&dm, &task, cfg.k)?
        .into_iter()
        .map(|(task, distance)| Neighbor { task, distance })
        .collect();
    report.primary_json(
        "nearest.json",
        &NearestReport {
            task,
            k: cfg.k,
            neighbors,
        },
    )
}

#[derive(Serialize)]
struct CompressReport {
    max_compression: f64,
    metric: MetricName,
    #[serde(flatten)]
    outcome: SearchOutcome,
}

pub fn compress(cfg: &RunConfig, input: &Input, report: &mut Report) -> Result<(), CliError> {
    let lb = load_board(cfg, &input.bytes)?;
    let specs = cfg.specs(&[cfg.metric_problem()]);
    let outcome = best_split_under_compression(&lb, cfg.max_compression, &specs, cfg.metric, &cfg.search_options())?;
    emit(&outcome.diagnostics);
    report.primary_json(
        "compress.json",
        &CompressReport {
            max_compression: cfg.max_compression,
            metric: cfg.metric,
            outcome,
        },
    )
}

#[derive(Serialize)]
struct MinsetReport {
    metric: MetricName,
    threshold: f64,
    /// Keyed by predictor id.
    results: BTreeMap<String, MinSubsetOutcome>,
}

pub fn minset(cfg: &RunConfig, input: &Input, report: &mut Report) -> Result<(), CliError> {
    let threshold = cfg
        .threshold
        .ok_or_else(|| CliError::Usage("minset requires --threshold".into()))?;
    let lb = load_board(cfg, &input.bytes)?;
    let opts = cfg.search_options();
    let mut results = BTreeMap::new();
    for spec in cfg.specs(&[cfg.metric_problem()]) {
        let outcome = min_public_subset(&lb, &spec, cfg.metric, threshold, &opts)?;
        emit(&outcome.diagnostics);
        if outcome.found.is_none() {
            log::warn!("{} never reaches {} {threshold}", spec.id(), cfg.metric);
        }
        results.insert(spec.id(), outcome);
    }
    report.primary_json(
        "minset.json",
        &MinsetReport {
            metric: cfg.metric,
            threshold,
            results,
        },
    )
}

pub fn profile(cfg: &RunConfig, input: &Input, report: &mut Report) -> Result<(), CliError> {
    let lb = load_board(cfg, &input.bytes)?;
    let specs = cfg.specs(&[Problem::Classification, Problem::Regression]);
    let profile = compression_profile(&lb, &specs, &cfg.search_options())?;
    emit(&profile.diagnostics);
    report.primary_json("profile.json", &profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("GLUE (2019)"), "glue-2019");
        assert_eq!(slug("SuperGLUE"), "superglue");
        assert_eq!(slug("???"), "benchmark");
    }
}
