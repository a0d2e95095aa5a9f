//! Command-line front end. `rankic <simulate|train|predict|benchmark|backtest>`.
//!
//! Every command resolves a [`RunConfig`] from an optional TOML file plus flags
//! (flags win), writes it to `<out>/config.resolved`, then does its work. Failures
//! print one JSON line `{"error": kind, "message": ...}` on stderr and exit nonzero.

mod commands;
mod config;
mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::objectives::ObjectiveKind;
use crate::simulate::SnrLevel;

pub use commands::{run_benchmark, BenchmarkRow, BenchmarkRun};
pub use config::{
    parse_seeds, BacktestSection, BenchmarkSection, DataConfig, RunConfig, SimulateSection, WindowSection, TOOL_VERSION,
};
pub use svg::line_chart;

#[derive(Debug, Parser)]
#[command(name = "rankic", version, about = "Gradient-boosted ranking with a Rank-IC objective")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic panel (panel.csv + panel.meta.json).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train one model (model.json + history.csv).
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a dataset with a saved model (predictions.csv).
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Compare objectives across seeds (benchmark.csv, runs.csv, curves.csv).
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated objectives, e.g. rankic,ndcg,mse.
        #[arg(long, value_delimiter = ',')]
        objectives: Option<Vec<ObjectiveKind>>,
    },
    /// Decile backtest from a model, a score column or the rolling protocol.
    Backtest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        bt: BacktestArgs,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list: `0..9` (inclusive) or `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads; 1 gives bit-reproducible output.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    objective: Option<ObjectiveKind>,
    /// Also render SVG charts.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset CSV (columns group, label, features...). Without it a panel is simulated.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Simulation preset: noiseless, snr-sweep or heavy-tail.
    #[arg(long)]
    preset: Option<String>,
    /// SNR level for the noisy presets: high, medium or low.
    #[arg(long)]
    snr: Option<SnrLevel>,
    #[arg(long = "periods")]
    t: Option<usize>,
    #[arg(long = "items")]
    n: Option<usize>,
    #[arg(long = "features")]
    p: Option<usize>,
    /// Leading groups used for training; the rest form the test set.
    #[arg(long)]
    train_periods: Option<usize>,
    /// Rank-transform features within each group.
    #[arg(long)]
    rank_transform: bool,
    #[arg(long)]
    group_col: Option<String>,
    #[arg(long)]
    label_col: Option<String>,
    /// Per-item portfolio weight column (equal weights when absent).
    #[arg(long)]
    weight_col: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Debug, Args)]
struct BacktestArgs {
    /// Score with this saved model instead of running the rolling protocol.
    #[arg(long, conflicts_with = "score_col")]
    model: Option<PathBuf>,
    /// Use this CSV column as the scores.
    #[arg(long)]
    score_col: Option<String>,
    #[arg(long)]
    negate_scores: bool,
    #[arg(long)]
    train_len: Option<usize>,
    #[arg(long)]
    valid_len: Option<usize>,
    #[arg(long)]
    test_len: Option<usize>,
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    ndcg_k: Option<usize>,
    #[arg(long)]
    parallel_windows: bool,
}

fn apply_common(cfg: &mut RunConfig, c: &Common) -> Result<()> {
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = c.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(s) = &c.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    if let Some(k) = c.objective {
        cfg.objective.kind = k;
    }
    cfg.svg |= c.svg;
    Ok(())
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if let Some(p) = &d.data {
        cfg.data.path = Some(p.clone());
    }
    if let Some(p) = &d.preset {
        cfg.simulate.preset = Some(p.clone());
    }
    if let Some(s) = d.snr {
        cfg.simulate.snr = s;
    }
    let dgp = &mut cfg.simulate.dgp;
    dgp.t = d.t.unwrap_or(dgp.t);
    dgp.n = d.n.unwrap_or(dgp.n);
    dgp.p = d.p.unwrap_or(dgp.p);
    if let Some(k) = d.train_periods {
        cfg.data.train_periods = Some(k);
        if cfg.data.path.is_none() {
            cfg.simulate.dgp.train_periods = k;
        }
    } else if let Some(t) = d.t {
        // keep the default two-thirds train share when only the length changes
        cfg.simulate.dgp.train_periods = ((2 * t + 1) / 3).clamp(1, t.max(1));
    }
    cfg.data.rank_transform |= d.rank_transform;
    let schema = &mut cfg.data.schema;
    schema.group_col = d.group_col.clone().unwrap_or(std::mem::take(&mut schema.group_col));
    schema.label_col = d.label_col.clone().unwrap_or(std::mem::take(&mut schema.label_col));
    if d.weight_col.is_some() {
        schema.weight_col = d.weight_col.clone();
    }
}

fn apply_train(cfg: &mut RunConfig, t: &TrainArgs) -> Result<()> {
    cfg.train.num_rounds = t.rounds.unwrap_or(cfg.train.num_rounds);
    cfg.train.learning_rate = t.learning_rate.unwrap_or(cfg.train.learning_rate);
    cfg.train.max_depth = t.max_depth.unwrap_or(cfg.train.max_depth);
    cfg.train.eval_every = t.eval_every.unwrap_or(cfg.train.eval_every);
    if let Some(s) = t.sigma {
        cfg.objective.config.sigma = crate::rankcore::SigmoidShape::new(s)?;
    }
    Ok(())
}

fn apply_backtest(cfg: &mut RunConfig, b: &BacktestArgs) {
    if let Some(m) = &b.model {
        cfg.backtest.model = Some(m.clone());
    }
    if let Some(c) = &b.score_col {
        cfg.backtest.score_col = Some(c.clone());
    }
    cfg.backtest.negate_scores |= b.negate_scores;
    cfg.backtest.parallel_windows |= b.parallel_windows;
    cfg.backtest.ndcg_k = b.ndcg_k.unwrap_or(cfg.backtest.ndcg_k);
    let w = &mut cfg.windows;
    w.train_len = b.train_len.unwrap_or(w.train_len);
    w.valid_len = b.valid_len.unwrap_or(w.valid_len);
    w.test_len = b.test_len.unwrap_or(w.test_len);
    w.step = b.step.unwrap_or(w.step);
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let (name, common) = match &cli.command {
        Command::Simulate { common, .. } => ("simulate", common),
        Command::Train { common, .. } => ("train", common),
        Command::Predict { common, .. } => ("predict", common),
        Command::Benchmark { common, .. } => ("benchmark", common),
        Command::Backtest { common, .. } => ("backtest", common),
    };
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    cfg.command = name.to_string();
    apply_common(&mut cfg, common)?;
    match &cli.command {
        Command::Simulate { data, .. } => apply_data(&mut cfg, data),
        Command::Train { data, train, .. } => {
            apply_data(&mut cfg, data);
            apply_train(&mut cfg, train)?;
        }
        Command::Predict { data, model: m, .. } => {
            apply_data(&mut cfg, data);
            cfg.backtest.model = Some(m.clone());
        }
        Command::Benchmark { data, train, objectives, .. } => {
            apply_data(&mut cfg, data);
            apply_train(&mut cfg, train)?;
            if let Some(o) = objectives {
                cfg.benchmark.objectives = o.clone();
            }
        }
        Command::Backtest { data, train, bt, .. } => {
            apply_data(&mut cfg, data);
            apply_train(&mut cfg, train)?;
            apply_backtest(&mut cfg, bt);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run the resolved command, honouring the thread cap.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    let run = || match cfg.command.as_str() {
        "simulate" => commands::simulate(cfg),
        "train" => commands::train(cfg),
        "predict" => commands::predict(cfg),
        "benchmark" => commands::benchmark(cfg),
        "backtest" => commands::backtest(cfg),
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", first));
            return 2;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match resolve(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string().replace('\n', " ")));
            1
        }
    }
}
