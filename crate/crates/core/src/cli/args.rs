use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::{
    cmd_benchmark, cmd_evaluate, cmd_predict, cmd_synth, cmd_train, parse_ratios, parse_synth_spec, DataSource,
    ModelKind, RunConfig,
};
use crate::error::{Error, Result};
use crate::hybrid::{HybridMode, Setting};
use crate::metrics::{comparison_table, ComparisonRow};

#[derive(Parser, Debug)]
#[command(name = "gbm-ssrf", version, about = "Tree ensembles for imbalanced binary classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and save it with its preprocessing and split.
    Train(TrainArgs),
    /// Score a labelled CSV with a saved model.
    Evaluate(EvaluateArgs),
    /// Append score and flag columns to a CSV.
    Predict(PredictArgs),
    /// Compare RF, GBM and GBM-SSRF on one split per seed.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic dataset to CSV.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Synthetic data instead of a file: n,rate,features,difficulty.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    positive_label: Option<String>,
    #[arg(long)]
    negative_label: Option<String>,
    /// rf | gbm | ssrf | hybrid
    #[arg(long)]
    kind: Option<ModelKind>,
    /// blend | embedded
    #[arg(long)]
    mode: Option<HybridMode>,
    #[arg(long)]
    n_stages: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    n_trees: Option<usize>,
    /// Depth cap for both forest and boosting trees.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Importance blend of the strengthened feature sampler, in [0, 1].
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    pilot_trees: Option<usize>,
    #[arg(long)]
    stage_forest_size: Option<usize>,
    /// Forest weight: auto or a value in [0, 1].
    #[arg(long)]
    alpha: Option<Setting>,
    /// Decision threshold: auto (max validation F1) or a value in (0, 1).
    #[arg(long)]
    threshold: Option<Setting>,
    #[arg(long)]
    seed: Option<u64>,
    /// train,valid,test fractions.
    #[arg(long)]
    ratios: Option<String>,
    /// Cut GBM back to its best validation stage count.
    #[arg(long)]
    early_stopping: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the label column stored in the model.
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated seeds; defaults to --seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// JSON array of extra table rows, e.g. an external baseline.
    #[arg(long)]
    external: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// n,rate,features,difficulty
    #[arg(long)]
    synth: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    out: PathBuf,
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = &a.data {
        cfg.data = Some(DataSource::File(p.clone()));
    }
    if let Some(s) = &a.synth {
        cfg.data = Some(DataSource::Synth(parse_synth_spec(s, cfg.seed)?));
    }
    if let Some(v) = &a.label_column {
        cfg.label_column = v.clone();
    }
    if let Some(v) = &a.positive_label {
        cfg.labels.positive_label = v.clone();
    }
    if let Some(v) = &a.negative_label {
        cfg.labels.negative_label = v.clone();
    }
    let m = &mut cfg.model;
    if let Some(v) = a.kind {
        cfg.kind = v;
    }
    if let Some(v) = a.mode {
        m.mode = v;
    }
    if let Some(v) = a.n_stages {
        m.gbm.n_stages = v;
    }
    if let Some(v) = a.learning_rate {
        m.gbm.learning_rate = v;
    }
    if let Some(v) = a.n_trees {
        m.ssrf.n_trees = v;
    }
    if let Some(v) = a.max_depth {
        m.ssrf.max_depth = v;
        m.gbm.tree.max_depth = v;
    }
    if let Some(v) = a.beta {
        m.ssrf.importance_blend = v;
    }
    if let Some(v) = a.pilot_trees {
        m.ssrf.pilot_trees = v;
    }
    if let Some(v) = a.stage_forest_size {
        m.stage_forest_size = v;
    }
    if let Some(v) = a.alpha {
        m.alpha = v;
    }
    if let Some(v) = a.threshold {
        m.threshold = v;
    }
    if let Some(r) = &a.ratios {
        cfg.ratios = parse_ratios(r)?;
    }
    cfg.early_stopping |= a.early_stopping;
    Ok(cfg.with_seed(cfg.seed))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Invariant(e.to_string()))
}

fn run(cli: Cli) -> Result<String> {
    let json = cli.format == Format::Json;
    let text = match cli.command {
        Command::Train(a) => {
            let cfg = run_config(&a.run)?;
            let o = cmd_train(&cfg, &a.model_out)?;
            if json {
                to_json(&o)?
            } else {
                let mut s = format!(
                    "trained {} model -> {} (threshold {:.6})\n",
                    o.model_kind,
                    o.model_path.display(),
                    o.threshold
                );
                match &o.validation {
                    Some(r) => {
                        s.push_str("validation split\n");
                        s.push_str(&r.to_text());
                    }
                    None => s.push_str("validation split is empty; no report\n"),
                }
                s
            }
        }
        Command::Evaluate(a) => {
            let o = cmd_evaluate(&a.model, &a.data, a.label_column.as_deref())?;
            if json {
                to_json(&o)?
            } else {
                format!("{} model on {} rows\n{}", o.model_kind, o.n_rows, o.report.to_text())
            }
        }
        Command::Predict(a) => {
            let o = cmd_predict(&a.model, &a.data, &a.out)?;
            if json {
                to_json(&o)?
            } else {
                format!("wrote {} scored rows to {}\n", o.rows, o.out.display())
            }
        }
        Command::Benchmark(a) => {
            let cfg = run_config(&a.run)?;
            let external: Vec<ComparisonRow> = match &a.external {
                Some(p) => {
                    let t = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&t).map_err(|e| Error::config(format!("external rows: {e}")))?
                }
                None => Vec::new(),
            };
            let seeds = if a.seeds.is_empty() { vec![cfg.seed] } else { a.seeds.clone() };
            let o = cmd_benchmark(&cfg, &seeds, external)?;
            if json {
                to_json(&o)?
            } else {
                format!("test split, mean over seeds {:?}\n{}", o.seeds, comparison_table(&o.rows))
            }
        }
        Command::Synth(a) => {
            let spec = parse_synth_spec(&a.synth, a.seed)?;
            let o = cmd_synth(&spec, &a.label_column, &a.out)?;
            if json {
                to_json(&o)?
            } else {
                format!("wrote {} rows ({} positive) to {}\n", o.rows, o.positives, o.out.display())
            }
        }
    };
    Ok(if text.ends_with('\n') { text } else { text + "\n" })
}

/// Runs the command line and returns the process exit code: 0 success,
/// 1 bad data or configuration, 2 I/O failure, 3 internal invariant.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                0
            } else {
                let _ = write!(err, "{e}");
                1
            };
        }
    };
    let result = match cli.workers {
        Some(0) => Err(Error::config("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| run(cli))),
        None => run(cli),
    };
    match result.and_then(|text| out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_entry() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    main_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
