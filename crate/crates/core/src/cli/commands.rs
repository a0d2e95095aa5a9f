use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::RunConfig;
use super::svg::line_chart;
use crate::dataset::{load_csv, CsvSchema, GroupedDataset};
use crate::error::{Error, Result};
use crate::evaluate::{
    decile_backtest, evaluate_scores, run_protocol, write_cumulative_csv, write_deciles_csv, BacktestReport, ICSeries,
    MetricsReport, ProtocolConfig, Summary,
};
use crate::gbdt::{fit, load_model, predict_dataset, save_model, EvalMetric, Objective, TrainConfig, TrainHistory};
use crate::objectives::ObjectiveKind;
use crate::simulate::{export_panel, gen_linear_panel};

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path).map(std::io::BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Create the output directory and record the resolved configuration before any work.
fn start(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_text(&out_path(cfg, "config.resolved"), &cfg.to_toml()?)
}

fn train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    let mut t = TrainConfig { seed, ..cfg.train.clone() };
    if !t.eval_metrics.contains(&EvalMetric::MeanRankIc) {
        t.eval_metrics.push(EvalMetric::MeanRankIc);
    }
    t
}

fn split(ds: &GroupedDataset, k: usize) -> Result<(GroupedDataset, Option<GroupedDataset>)> {
    let m = ds.num_groups();
    Ok((ds.slice(0..k)?, (k < m).then(|| ds.slice(k..m)).transpose()?))
}

pub(super) fn simulate(cfg: &RunConfig) -> Result<()> {
    start(cfg)?;
    let seed = cfg.seeds[0];
    let panel = gen_linear_panel(&cfg.dgp(seed)?)?;
    export_panel(&panel, out_path(cfg, "panel.csv"), out_path(cfg, "panel.meta.json"))?;
    log::info!("wrote {} rows in {} groups", panel.dataset.num_rows(), panel.dataset.num_groups());
    Ok(())
}

pub(super) fn train(cfg: &RunConfig) -> Result<()> {
    start(cfg)?;
    let seed = cfg.seeds[0];
    let (ds, k) = cfg.load_data(seed)?;
    let (train, test) = split(&ds, k)?;
    let evals: Vec<(&str, &GroupedDataset)> = test.iter().map(|t| ("test", t)).collect();
    let started = Instant::now();
    let (forest, history) = fit(&train, &cfg.objective, &train_config(cfg, seed), &evals)?;
    log::info!("trained {} trees in {:.1?}", forest.trees.len(), started.elapsed());
    save_model(&forest, out_path(cfg, "model.json"))?;
    history.write_csv(create(&out_path(cfg, "history.csv"))?)?;
    if cfg.svg {
        let series = ["train", "test"]
            .iter()
            .map(|s| (s.to_string(), curve(&history, s)))
            .filter(|(_, c)| !c.is_empty())
            .collect::<Vec<_>>();
        write_text(&out_path(cfg, "curves.svg"), &line_chart("Rank IC by round", &series))?;
    }
    Ok(())
}

fn curve(history: &TrainHistory, set: &str) -> Vec<(f64, f64)> {
    history.series(set, EvalMetric::MeanRankIc).into_iter().map(|(r, v)| (r as f64, v)).collect()
}

pub(super) fn predict(cfg: &RunConfig) -> Result<()> {
    let model = cfg.backtest.model.as_ref().ok_or_else(|| Error::Config("predict needs --model".into()))?;
    start(cfg)?;
    let forest = load_model(model)?;
    let (ds, _) = cfg.load_data(cfg.seeds[0])?;
    let scores = predict_dataset(&forest, &ds)?;
    write_scores(&out_path(cfg, "predictions.csv"), &ds, &scores)
}

fn write_scores(path: &Path, ds: &GroupedDataset, scores: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["group", "item", "score", "label"])?;
    for (g, s) in ds.groups().iter().zip(scores) {
        for (i, v) in s.iter().enumerate() {
            w.write_record([g.id(), &i.to_string(), &v.to_string(), &g.labels()[i].to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One (objective, seed) training run of a benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRun {
    pub objective: ObjectiveKind,
    pub seed: u64,
    pub peak_test_ic: f64,
    /// 1-based round of the peak.
    pub peak_round: usize,
    pub final_train_ic: f64,
    pub final_test_ic: f64,
    #[serde(skip)]
    pub history: TrainHistory,
}

/// Per-objective means over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub objective: ObjectiveKind,
    pub peak_ic_mean: f64,
    pub peak_ic_std: f64,
    pub peak_round_mean: f64,
    pub seeds: usize,
}

impl BenchmarkRow {
    pub fn summarise(runs: &[BenchmarkRun], objectives: &[ObjectiveKind]) -> Vec<BenchmarkRow> {
        objectives
            .iter()
            .map(|&o| {
                let mine: Vec<&BenchmarkRun> = runs.iter().filter(|r| r.objective == o).collect();
                let m = mine.len() as f64;
                let mean = mine.iter().map(|r| r.peak_test_ic).sum::<f64>() / m;
                let var = if mine.len() > 1 {
                    mine.iter().map(|r| (r.peak_test_ic - mean).powi(2)).sum::<f64>() / (m - 1.0)
                } else {
                    0.0
                };
                BenchmarkRow {
                    objective: o,
                    peak_ic_mean: mean,
                    peak_ic_std: var.sqrt(),
                    peak_round_mean: mine.iter().map(|r| r.peak_round as f64).sum::<f64>() / m,
                    seeds: mine.len(),
                }
            })
            .collect()
    }
}

/// Train every configured objective on every seed and record test Rank IC curves.
/// Simulated panels are regenerated per seed; a dataset file is shared by all seeds.
pub fn run_benchmark(cfg: &RunConfig) -> Result<Vec<BenchmarkRun>> {
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let (ds, k) = cfg.load_data(seed)?;
        let (train, test) = split(&ds, k)?;
        let test = test.ok_or_else(|| Error::Config("benchmark needs test groups after train_periods".into()))?;
        for &kind in &cfg.benchmark.objectives {
            let started = Instant::now();
            let objective = Objective { kind, config: cfg.objective.config.clone() };
            let (_, history) = fit(&train, &objective, &train_config(cfg, seed), &[("test", &test)])?;
            let (peak_round, peak_test_ic) = history
                .peak("test", EvalMetric::MeanRankIc)
                .ok_or_else(|| Error::Config("benchmark needs at least one evaluated round".into()))?;
            let run = BenchmarkRun {
                objective: kind,
                seed,
                peak_test_ic,
                peak_round,
                final_train_ic: history.final_value("train", EvalMetric::MeanRankIc).unwrap_or(f64::NAN),
                final_test_ic: history.final_value("test", EvalMetric::MeanRankIc).unwrap_or(f64::NAN),
                history,
            };
            log::info!(
                "seed {seed} {kind}: peak test IC {:.4} at round {} ({:.1?})",
                run.peak_test_ic,
                run.peak_round,
                started.elapsed()
            );
            runs.push(run);
        }
    }
    Ok(runs)
}

pub(super) fn benchmark(cfg: &RunConfig) -> Result<()> {
    start(cfg)?;
    let runs = run_benchmark(cfg)?;
    let rows = BenchmarkRow::summarise(&runs, &cfg.benchmark.objectives);

    let mut w = csv::Writer::from_writer(create(&out_path(cfg, "benchmark.csv"))?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = csv::Writer::from_writer(create(&out_path(cfg, "runs.csv"))?);
    for r in &runs {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = csv::Writer::from_writer(create(&out_path(cfg, "curves.csv"))?);
    w.write_record(["objective", "seed", "split", "round", "rank_ic"])?;
    for r in &runs {
        for split in ["train", "test"] {
            for (round, v) in r.history.series(split, EvalMetric::MeanRankIc) {
                w.write_record([r.objective.as_str(), &r.seed.to_string(), split, &round.to_string(), &v.to_string()])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;

    if cfg.svg {
        let series: Vec<(String, Vec<(f64, f64)>)> = cfg
            .benchmark
            .objectives
            .iter()
            .map(|&o| {
                let mine: Vec<Vec<(f64, f64)>> =
                    runs.iter().filter(|r| r.objective == o).map(|r| curve(&r.history, "test")).collect();
                let len = mine.iter().map(Vec::len).min().unwrap_or(0);
                let mean = (0..len)
                    .map(|i| (mine[0][i].0, mine.iter().map(|c| c[i].1).sum::<f64>() / mine.len() as f64))
                    .collect();
                (o.to_string(), mean)
            })
            .collect();
        write_text(&out_path(cfg, "curves.svg"), &line_chart("Mean test Rank IC by round", &series))?;
    }
    Ok(())
}

/// Summary JSON: benchmark-table columns plus the full metric and long-short records.
#[derive(Serialize)]
struct MetricsFile<'a> {
    summary: Summary,
    metrics: &'a MetricsReport,
    long_short: &'a crate::evaluate::PortfolioStats,
    mode: &'a str,
    negated_scores: bool,
}

fn score_column(cfg: &RunConfig, path: &Path, col: &str) -> Result<Vec<Vec<f64>>> {
    // reuse the CSV reader: the score column acts as the label, grouping is identical
    let schema = CsvSchema {
        label_col: col.to_string(),
        weight_col: None,
        feature_cols: Some(vec![cfg.data.schema.label_col.clone()]),
        exclude_cols: Vec::new(),
        ..cfg.data.schema.clone()
    };
    Ok(load_csv(path, &schema)?.groups().iter().map(|g| g.labels().to_vec()).collect())
}

pub(super) fn backtest(cfg: &RunConfig) -> Result<()> {
    start(cfg)?;
    let seed = cfg.seeds[0];
    let mut data_cfg = cfg.clone();
    if let Some(col) = &cfg.backtest.score_col {
        data_cfg.data.schema.exclude_cols.push(col.clone());
    }
    let (ds, _) = data_cfg.load_data(seed)?;

    let (mode, test_set, mut scores, protocol) = match (&cfg.backtest.score_col, &cfg.backtest.model) {
        (Some(col), _) => {
            let path = cfg.data.path.as_ref().ok_or_else(|| Error::Config("--score-col needs --data".into()))?;
            ("score_column", ds, score_column(cfg, path, col)?, None)
        }
        (None, Some(model)) => {
            let forest = load_model(model)?;
            let scores = predict_dataset(&forest, &ds)?;
            ("model", ds, scores, None)
        }
        (None, None) => {
            let plan = cfg.windows.plan(ds.num_groups())?;
            let pcfg = ProtocolConfig {
                objective: cfg.objective.clone(),
                train: train_config(cfg, seed),
                tuning: cfg.tuning.clone(),
                parallel_windows: cfg.backtest.parallel_windows,
                ndcg_k: cfg.backtest.ndcg_k,
            };
            let out = run_protocol(&ds, &plan, &pcfg)?;
            ("protocol", out.test_set.clone(), out.scores.clone(), Some(out))
        }
    };
    if cfg.backtest.negate_scores {
        scores.iter_mut().flatten().for_each(|s| *s = -*s);
    }
    let (ic, metrics, bt): (ICSeries, MetricsReport, BacktestReport) = match (&protocol, cfg.backtest.negate_scores) {
        (Some(p), false) => (p.ic.clone(), p.metrics.clone(), p.backtest.clone()),
        _ => {
            let (ic, metrics) = evaluate_scores(&scores, &test_set, cfg.backtest.ndcg_k)?;
            (ic, metrics, decile_backtest(&scores, &test_set, None)?)
        }
    };

    let summary = Summary::new(cfg.objective.kind.as_str(), &metrics, &bt);
    let file = MetricsFile {
        summary,
        metrics: &metrics,
        long_short: &bt.long_short,
        mode,
        negated_scores: cfg.backtest.negate_scores,
    };
    let mut f = create(&out_path(cfg, "metrics.json"))?;
    serde_json::to_writer_pretty(&mut f, &file)?;
    f.flush().map_err(|e| Error::io(out_path(cfg, "metrics.json"), e))?;
    write_deciles_csv(&bt, create(&out_path(cfg, "deciles.csv"))?)?;
    write_cumulative_csv(&bt, create(&out_path(cfg, "cumulative.csv"))?)?;
    ic.write_csv(create(&out_path(cfg, "ic_series.csv"))?)?;
    write_scores(&out_path(cfg, "scores.csv"), &test_set, &scores)?;
    if cfg.svg {
        let series: Vec<(String, Vec<(f64, f64)>)> = bt
            .cumulative
            .iter()
            .filter(|(name, _)| matches!(name.as_str(), "1" | "10" | "H-L"))
            .map(|(name, path)| (name.clone(), path.iter().enumerate().map(|(t, v)| (t as f64 + 1.0, *v)).collect()))
            .collect();
        write_text(&out_path(cfg, "cumulative.svg"), &line_chart("Cumulative return", &series))?;
    }
    Ok(())
}
