//! Task-similarity graphs and compression for benchmark leaderboards.
//!
//! Each task in a leaderboard induces a ranking of the models. The distance
//! between two tasks is the normalized number of discordant model pairs
//! between their rankings. The resulting metric space is summarized by a
//! minimum spanning tree, and leaderboards are compressed by searching for a
//! small public subset of tasks from which predictors recover model
//! comparisons and scores on the remaining private tasks.

pub mod compression;
pub mod diagnostic;
pub mod error;
pub mod graph;
pub mod leaderboard;
pub mod metrics;
pub mod numfmt;
pub mod predictors;
pub mod ranking;

pub use diagnostic::{Diagnostic, Severity};
pub use error::{Error, Result};
pub use graph::{export_dot, mst, nearest_tasks, path_bounds, PathBounds, SpanningTree, TreeEdge};
pub use leaderboard::{
    extract_task_groups, normalize_and_orient, parse_leaderboard_csv, parse_records_json, validate,
    EvaluationRecord, Leaderboard, MetricSpec, Orientation,
};
pub use ranking::{distance_matrix, vygotsky_weight, DistanceMatrix, Permutation};
