//! Ranking metrics, decile backtests and the rolling-window protocol.

mod backtest;
mod protocol;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::objectives::labels_to_relevance_grades;
use crate::rankcore::{ndcg_at_k, predicted_ranks, spearman_rho};

pub use backtest::{
    decile_assignment, decile_backtest, decile_sizes, max_drawdown, write_cumulative_csv, write_deciles_csv,
    BacktestReport, PeriodReturns, PortfolioStats, NUM_DECILES,
};
pub use protocol::{run_protocol, ProtocolConfig, ProtocolOutput, TuningGrid, WindowResult};

/// Relevance grades used when NDCG@k is reported as a metric.
pub const METRIC_RELEVANCE_GRADES: u32 = 32;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ICSeries {
    /// `(group id, rho)` in group order.
    pub entries: Vec<(String, f64)>,
    /// Groups with fewer than two items.
    pub skipped: usize,
}

impl ICSeries {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "rank_ic"])?;
        for (g, v) in &self.entries {
            w.write_record([g.as_str(), &v.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_shape(scores: &[Vec<f64>], ds: &GroupedDataset) -> Result<()> {
    if scores.len() != ds.num_groups() {
        return Err(Error::LengthMismatch { expected: ds.num_groups(), got: scores.len() });
    }
    for (s, g) in scores.iter().zip(ds.groups()) {
        if s.len() != g.len() {
            return Err(Error::LengthMismatch { expected: g.len(), got: s.len() });
        }
    }
    Ok(())
}

/// Per-group Spearman correlation between scores and labels.
pub fn ic_series(scores: &[Vec<f64>], ds: &GroupedDataset) -> Result<ICSeries> {
    check_shape(scores, ds)?;
    let per_group: Vec<Option<(String, f64)>> = scores
        .par_iter()
        .zip(ds.groups())
        .map(|(s, g)| {
            if g.len() < 2 {
                return Ok(None);
            }
            let rho = spearman_rho(&predicted_ranks(s, g.item_index())?, &g.label_ranks())?;
            Ok(Some((g.id().to_string(), rho)))
        })
        .collect::<Result<_>>()?;
    let skipped = per_group.iter().filter(|e| e.is_none()).count();
    Ok(ICSeries { entries: per_group.into_iter().flatten().collect(), skipped })
}

/// Per-group NDCG@k on relevance grades derived from the labels.
pub fn ndcg_series(scores: &[Vec<f64>], ds: &GroupedDataset, k: usize) -> Result<Vec<f64>> {
    check_shape(scores, ds)?;
    scores
        .par_iter()
        .zip(ds.groups())
        .map(|(s, g)| ndcg_at_k(s, &labels_to_relevance_grades(g, METRIC_RELEVANCE_GRADES)?, k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean_ic: f64,
    /// Sample standard deviation; `None` with a single group.
    pub std_ic: Option<f64>,
    /// `mean_ic / std_ic`; `None` when the deviation is zero or undefined.
    pub icir: Option<f64>,
    pub ndcg_k: usize,
    pub ndcg_at_k: Option<f64>,
    pub groups_evaluated: usize,
}

/// Mean and sample standard deviation (`None` below two values). Identical values give exactly 0.
pub(crate) fn mean_and_sample_std(v: &[f64]) -> (f64, Option<f64>) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    if v.len() < 2 {
        return (mean, None);
    }
    if v.iter().all(|&x| x == v[0]) {
        return (v[0], Some(0.0));
    }
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, Some((ss / (m - 1.0)).sqrt()))
}

pub fn aggregate_metrics(series: &ICSeries, ndcg: &[f64], k: usize) -> Result<MetricsReport> {
    if series.entries.is_empty() {
        return Err(Error::EmptyDataset("no groups with at least two items to evaluate".into()));
    }
    let (mean_ic, std_ic) = mean_and_sample_std(&series.values());
    let icir = std_ic.filter(|&s| s > 0.0).map(|s| mean_ic / s);
    let ndcg_at_k = (!ndcg.is_empty()).then(|| ndcg.iter().sum::<f64>() / ndcg.len() as f64);
    Ok(MetricsReport { mean_ic, std_ic, icir, ndcg_k: k, ndcg_at_k, groups_evaluated: series.entries.len() })
}

/// IC series plus aggregate report for one set of scores.
pub fn evaluate_scores(scores: &[Vec<f64>], ds: &GroupedDataset, k: usize) -> Result<(ICSeries, MetricsReport)> {
    let series = ic_series(scores, ds)?;
    let ndcg = ndcg_series(scores, ds, k)?;
    let report = aggregate_metrics(&series, &ndcg, k)?;
    Ok((series, report))
}

/// One-line summary with the columns of a benchmark table: ranking metrics
/// followed by long-short portfolio statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub mean_ic: f64,
    pub std_ic: Option<f64>,
    pub icir: Option<f64>,
    pub ndcg_k: usize,
    pub ndcg_at_k: Option<f64>,
    pub return_pct: f64,
    pub vol_pct: Option<f64>,
    pub sharpe: Option<f64>,
    pub mdd_pct: f64,
    pub groups_evaluated: usize,
}

impl Summary {
    pub fn new(method: &str, metrics: &MetricsReport, backtest: &BacktestReport) -> Self {
        let ls = &backtest.long_short;
        Summary {
            method: method.to_string(),
            mean_ic: metrics.mean_ic,
            std_ic: metrics.std_ic,
            icir: metrics.icir,
            ndcg_k: metrics.ndcg_k,
            ndcg_at_k: metrics.ndcg_at_k,
            return_pct: ls.mean_pct,
            vol_pct: ls.vol_pct,
            sharpe: ls.sharpe,
            mdd_pct: ls.mdd_pct,
            groups_evaluated: metrics.groups_evaluated,
        }
    }
}
