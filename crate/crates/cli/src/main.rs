//! `vygotsky` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or I/O errors.

mod commands;
mod config;
mod error;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vygotsky::metrics::MetricName;
use vygotsky::predictors::Family;

use config::{Overrides, RunConfig};
use error::CliError;
use report::Report;

#[derive(Parser, Debug)]
#[command(name = "vygotsky", version, about = "Task distances and compression for benchmark leaderboards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split an evaluation dump into one leaderboard CSV per benchmark.
    Ingest(Common),
    /// Pairwise task distances of a leaderboard.
    Dist(Common),
    /// Minimum spanning tree of the task distances, as JSON and DOT.
    Mst(Common),
    /// Tasks closest to `--task`.
    Nearest(Common),
    /// Best public subset under `--max-compression`.
    Compress(Common),
    /// Smallest public subset reaching `--threshold`, per predictor.
    Minset(Common),
    /// Metric distributions per compression rate.
    Profile(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Dist(_) => "dist",
            Command::Mst(_) => "mst",
            Command::Nearest(_) => "nearest",
            Command::Compress(_) => "compress",
            Command::Minset(_) => "minset",
            Command::Profile(_) => "profile",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Ingest(c)
            | Command::Dist(c)
            | Command::Mst(c)
            | Command::Nearest(c)
            | Command::Compress(c)
            | Command::Minset(c)
            | Command::Profile(c) => c,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Input file: records JSON for `ingest`, leaderboard CSV otherwise.
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output directory, or a `.json` file path for the main artifact.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON run configuration; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of models used for training.
    #[arg(long)]
    ratio: Option<f64>,
    /// Row splits averaged per evaluation.
    #[arg(long)]
    repeats: Option<usize>,
    /// Minimum models shared by every task of an ingested benchmark.
    #[arg(long)]
    min_models: Option<usize>,
    #[arg(long)]
    max_compression: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Metric to optimise, e.g. accuracy, f1, roc_auc, rmse, r2.
    #[arg(long)]
    metric: Option<MetricName>,
    /// Comma-separated predictor families: svm, gp, mlp.
    #[arg(long, value_delimiter = ',')]
    predictors: Option<Vec<Family>>,
    /// Sample this many splits per public size instead of enumerating.
    #[arg(long)]
    samples_per_rate: Option<usize>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Treat scores as already normalized to [0, 1], higher-better.
    #[arg(long)]
    assume_normalized: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            input: self.input.clone(),
            out: self.out.clone(),
            seed: self.seed,
            ratio: self.ratio,
            repeats: self.repeats,
            min_models: self.min_models,
            max_compression: self.max_compression,
            threshold: self.threshold,
            metric: self.metric,
            predictors: self.predictors.clone(),
            samples_per_rate: self.samples_per_rate,
            task: self.task.clone(),
            k: self.k,
            assume_normalized: self.assume_normalized,
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let common = command.common();
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.apply(common.overrides());
    cfg.validate()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let input = commands::read_input(&cfg)?;
    let mut report = Report::new(&out);
    match command {
        Command::Ingest(_) => commands::ingest(&cfg, &input, &mut report)?,
        Command::Dist(_) => commands::dist(&cfg, &input, &mut report)?,
        Command::Mst(_) => commands::tree(&cfg, &input, &mut report)?,
        Command::Nearest(_) => commands::nearest(&cfg, &input, &mut report)?,
        Command::Compress(_) => commands::compress(&cfg, &input, &mut report)?,
        Command::Minset(_) => commands::minset(&cfg, &input, &mut report)?,
        Command::Profile(_) => commands::profile(&cfg, &input, &mut report)?,
    }
    report.finish(command.name(), &cfg, Some(input.sha256))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| writeln!(buf, "{}: {}", record.level(), record.args()))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `vygotsky {} --help` for usage", cli.command.name());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
