//! Rolling-window training and out-of-sample evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decile_backtest, evaluate_scores, BacktestReport, ICSeries, MetricsReport};
use crate::dataset::{GroupedDataset, RollingWindowPlan, Window};
use crate::error::{Error, Result};
use crate::gbdt::{fit, predict_dataset, EvalMetric, Forest, Objective, TrainConfig, TrainHistory};

/// Candidate values for a grid search on the validation segment. Empty lists
/// keep the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningGrid {
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub num_rounds: Vec<usize>,
    pub min_child_weight: Vec<f64>,
    pub reg_lambda: Vec<f64>,
    pub subsample: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
}

impl TuningGrid {
    pub fn is_empty(&self) -> bool {
        self.max_depth.is_empty()
            && self.learning_rate.is_empty()
            && self.num_rounds.is_empty()
            && self.min_child_weight.is_empty()
            && self.reg_lambda.is_empty()
            && self.subsample.is_empty()
            && self.colsample_bytree.is_empty()
    }

    /// Cartesian product of the listed values applied to `base`.
    pub fn candidates(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        fn expand<T: Copy>(
            configs: Vec<TrainConfig>,
            values: &[T],
            set: impl Fn(&mut TrainConfig, T),
        ) -> Vec<TrainConfig> {
            if values.is_empty() {
                return configs;
            }
            configs
                .into_iter()
                .flat_map(|c| {
                    values
                        .iter()
                        .map(|&v| {
                            let mut c = c.clone();
                            set(&mut c, v);
                            c
                        })
                        .collect::<Vec<_>>()
                })
                .collect()
        }
        let mut out = vec![base.clone()];
        out = expand(out, &self.max_depth, |c, v| c.max_depth = v);
        out = expand(out, &self.learning_rate, |c, v| c.learning_rate = v);
        out = expand(out, &self.num_rounds, |c, v| c.num_rounds = v);
        out = expand(out, &self.min_child_weight, |c, v| c.min_child_weight = v);
        out = expand(out, &self.reg_lambda, |c, v| c.reg_lambda = v);
        out = expand(out, &self.subsample, |c, v| c.subsample = v);
        out = expand(out, &self.colsample_bytree, |c, v| c.colsample_bytree = v);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub objective: Objective,
    pub train: TrainConfig,
    pub tuning: TuningGrid,
    /// Run windows concurrently instead of one after another.
    pub parallel_windows: bool,
    pub ndcg_k: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            objective: Objective::default(),
            train: TrainConfig::default(),
            tuning: TuningGrid::default(),
            parallel_windows: false,
            ndcg_k: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WindowResult {
    pub window: Window,
    /// Configuration chosen on the validation segment (the base one without tuning).
    pub chosen: TrainConfig,
    /// Final-round validation mean Rank IC of the chosen configuration.
    pub validation_ic: Option<f64>,
    pub forest: Forest,
    pub history: TrainHistory,
    /// Test groups this window contributed (overlaps with earlier windows removed).
    pub scored_groups: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    /// Out-of-sample groups in window order.
    pub test_set: GroupedDataset,
    pub scores: Vec<Vec<f64>>,
    pub ic: ICSeries,
    pub metrics: MetricsReport,
    pub backtest: BacktestReport,
    pub windows: Vec<WindowResult>,
}

fn run_window(
    ds: &GroupedDataset,
    w: &Window,
    cfg: &ProtocolConfig,
) -> Result<(TrainConfig, Option<f64>, Forest, TrainHistory)> {
    let train = ds.slice(w.train.clone())?;
    let valid = (!w.valid.is_empty()).then(|| ds.slice(w.valid.clone())).transpose()?;
    let candidates = cfg.tuning.candidates(&cfg.train);
    let mut best: Option<(TrainConfig, Option<f64>, Forest, TrainHistory)> = None;
    for mut cand in candidates {
        if !cand.eval_metrics.contains(&EvalMetric::MeanRankIc) {
            cand.eval_metrics.push(EvalMetric::MeanRankIc);
        }
        // score validation only at the final round; that is what selection uses
        if valid.is_some() {
            cand.eval_every = cand.num_rounds.max(1);
        }
        let evals: Vec<(&str, &GroupedDataset)> = valid.iter().map(|v| ("valid", v)).collect();
        let (forest, history) = fit(&train, &cfg.objective, &cand, &evals)?;
        let ic = history.final_value("valid", EvalMetric::MeanRankIc).filter(|v| !v.is_nan());
        let better = match (&best, ic) {
            (None, _) => true,
            (Some((_, Some(b), ..)), Some(v)) => v > *b,
            (Some((_, None, ..)), Some(_)) => true,
            _ => false,
        };
        if better {
            best = Some((cand, ic, forest, history));
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Fit one model per window on its training segment (tuning on the validation
/// segment when a grid is given) and score its test segment. Test groups that
/// appear in more than one window are scored by the first window only.
pub fn run_protocol(ds: &GroupedDataset, plan: &RollingWindowPlan, cfg: &ProtocolConfig) -> Result<ProtocolOutput> {
    if plan.windows.is_empty() {
        return Err(Error::Domain("window plan is empty (insufficient history?)".into()));
    }
    for w in &plan.windows {
        if w.test.end > ds.num_groups() {
            return Err(Error::Domain(format!("window test range {:?} exceeds {} groups", w.test, ds.num_groups())));
        }
    }
    let fitted: Vec<_> = if cfg.parallel_windows {
        plan.windows.par_iter().map(|w| run_window(ds, w, cfg)).collect::<Result<_>>()?
    } else {
        plan.windows.iter().map(|w| run_window(ds, w, cfg)).collect::<Result<_>>()?
    };

    let mut seen = vec![false; ds.num_groups()];
    let mut positions = Vec::new();
    let mut scores = Vec::new();
    let mut windows = Vec::with_capacity(fitted.len());
    for (w, (chosen, validation_ic, forest, history)) in plan.windows.iter().zip(fitted) {
        let fresh: Vec<usize> = w.test.clone().filter(|&g| !seen[g]).collect();
        if fresh.len() < w.test.len() {
            log::warn!(
                "test groups {:?} overlap earlier windows; keeping their first out-of-sample scores",
                w.test.clone().filter(|g| seen[*g]).collect::<Vec<_>>()
            );
        }
        if !fresh.is_empty() {
            scores.extend(predict_dataset(&forest, &ds.select(&fresh)?)?);
        }
        for &g in &fresh {
            seen[g] = true;
        }
        positions.extend_from_slice(&fresh);
        windows.push(WindowResult { window: w.clone(), chosen, validation_ic, forest, history, scored_groups: fresh });
    }
    let test_set = ds.select(&positions)?;
    let (ic, metrics) = evaluate_scores(&scores, &test_set, cfg.ndcg_k)?;
    let backtest = decile_backtest(&scores, &test_set, None)?;
    Ok(ProtocolOutput { test_set, scores, ic, metrics, backtest, windows })
}
