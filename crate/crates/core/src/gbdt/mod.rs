//! Histogram-based second-order gradient boosting.
//!
//! Features are quantile-binned once per fit. Each round computes per-item
//! gradient statistics from the chosen objective, grows one tree depth-wise by
//! the usual second-order gain with L2 leaf regularisation, and adds
//! `learning_rate * tree(x)` to every cached score.

mod binning;
mod history;
mod model;
mod tree;

use std::ops::Range;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Group, GroupedDataset, LabelRanks};
use crate::error::{Error, Result};
use crate::objectives::{squared_error_into, LambdaGroup, ObjectiveConfig, ObjectiveKind};
use crate::rankcore::{descending_ranks, rho_from_ranks};

pub use history::{EvalMetric, HistoryRecord, TrainHistory};
pub use model::{load_model, parse_model, save_model, serialize_model, MODEL_FORMAT_VERSION};
pub use tree::{Node, Tree};

use binning::BinnedMatrix;
use tree::{grow_tree, GrowParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub num_rounds: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub reg_lambda: f64,
    pub max_bins: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub eval_metrics: Vec<EvalMetric>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_depth: 8,
            learning_rate: 0.1,
            num_rounds: 200,
            subsample: 1.0,
            colsample_bytree: 1.0,
            min_child_weight: 1.0,
            reg_lambda: 1.0,
            max_bins: 256,
            seed: 0,
            eval_every: 1,
            eval_metrics: vec![EvalMetric::MeanRankIc],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_depth == 0 {
            return fail("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be a positive real");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return fail("subsample must lie in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return fail("colsample_bytree must lie in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0) || !(self.reg_lambda >= 0.0) {
            return fail("min_child_weight and reg_lambda must be nonnegative");
        }
        if !(2..=u16::MAX as usize).contains(&self.max_bins) {
            return fail("max_bins must lie in 2..=65535");
        }
        if self.eval_every == 0 {
            return fail("eval_every must be at least 1");
        }
        Ok(())
    }
}

/// The objective used for training.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Objective {
    pub kind: ObjectiveKind,
    #[serde(flatten)]
    pub config: ObjectiveConfig,
}

impl Objective {
    pub fn new(kind: ObjectiveKind) -> Self {
        Objective { kind, config: ObjectiveConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub feature_count: usize,
    pub objective: ObjectiveKind,
}

impl Forest {
    pub fn empty(feature_count: usize, learning_rate: f64, objective: ObjectiveKind) -> Self {
        Forest { trees: Vec::new(), base_score: 0.0, learning_rate, feature_count, objective }
    }

    /// Score one row: `base_score + learning_rate * sum_k tree_k(row)`, accumulated tree by tree.
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut s = self.base_score;
        for t in &self.trees {
            s += self.learning_rate * t.predict_row(row);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.trees {
            t.validate(self.feature_count)?;
        }
        if !self.base_score.is_finite() || !self.learning_rate.is_finite() {
            return Err(Error::Domain("forest has non-finite base score or learning rate".into()));
        }
        Ok(())
    }
}

/// Score a row-major `n x d` matrix.
pub fn predict(forest: &Forest, features: &[f64], num_features: usize) -> Result<Vec<f64>> {
    if num_features != forest.feature_count {
        return Err(Error::FeatureMismatch { expected: forest.feature_count, got: num_features });
    }
    if !features.len().is_multiple_of(num_features) {
        return Err(Error::LengthMismatch {
            expected: features.len() / num_features * num_features,
            got: features.len(),
        });
    }
    Ok(features.par_chunks(num_features).map(|row| forest.predict_row(row)).collect())
}

pub fn predict_group(forest: &Forest, group: &Group) -> Result<Vec<f64>> {
    predict(forest, group.features(), group.num_features())
}

pub fn predict_dataset(forest: &Forest, ds: &GroupedDataset) -> Result<Vec<Vec<f64>>> {
    ds.groups().iter().map(|g| predict_group(forest, g)).collect()
}

/// Flattened view of a dataset for training and evaluation.
struct FlatSet {
    rows: Vec<f64>,
    labels: Vec<f64>,
    spans: Vec<Range<usize>>,
    label_ranks: Vec<LabelRanks>,
    item_index: Vec<Vec<usize>>,
}

impl FlatSet {
    fn new(ds: &GroupedDataset) -> Self {
        let mut rows = Vec::with_capacity(ds.num_rows() * ds.num_features());
        let mut labels = Vec::with_capacity(ds.num_rows());
        let mut spans = Vec::with_capacity(ds.num_groups());
        for g in ds.groups() {
            let start = labels.len();
            rows.extend_from_slice(g.features());
            labels.extend_from_slice(g.labels());
            spans.push(start..labels.len());
        }
        FlatSet {
            rows,
            labels,
            spans,
            label_ranks: ds.groups().iter().map(Group::label_ranks).collect(),
            item_index: ds.groups().iter().map(|g| g.item_index().to_vec()).collect(),
        }
    }

    fn mean_rank_ic(&self, scores: &[f64]) -> f64 {
        let ics: Vec<f64> = self
            .spans
            .par_iter()
            .enumerate()
            .filter(|(_, s)| s.len() >= 2)
            .map(|(k, span)| {
                let pred = descending_ranks(&scores[span.clone()], &self.item_index[k]);
                rho_from_ranks(&pred, &self.label_ranks[k]).expect("group has at least two items")
            })
            .collect();
        if ics.is_empty() {
            f64::NAN
        } else {
            ics.iter().sum::<f64>() / ics.len() as f64
        }
    }

    fn rmse(&self, scores: &[f64]) -> f64 {
        let sse: f64 = scores.iter().zip(&self.labels).map(|(s, y)| (s - y) * (s - y)).sum();
        (sse / scores.len() as f64).sqrt()
    }

    fn metric(&self, metric: EvalMetric, scores: &[f64]) -> f64 {
        match metric {
            EvalMetric::MeanRankIc => self.mean_rank_ic(scores),
            EvalMetric::Rmse => self.rmse(scores),
        }
    }
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub forest: Forest,
    pub history: TrainHistory,
    /// Final cached scores of the training rows, in dataset order.
    pub train_scores: Vec<f64>,
}

pub fn fit(
    train: &GroupedDataset,
    objective: &Objective,
    cfg: &TrainConfig,
    eval_sets: &[(&str, &GroupedDataset)],
) -> Result<(Forest, TrainHistory)> {
    let out = fit_with_scores(train, objective, cfg, eval_sets)?;
    Ok((out.forest, out.history))
}

pub fn fit_with_scores(
    train: &GroupedDataset,
    objective: &Objective,
    cfg: &TrainConfig,
    eval_sets: &[(&str, &GroupedDataset)],
) -> Result<FitOutput> {
    cfg.validate()?;
    objective.config.validate()?;
    let d = train.num_features();
    for (name, ds) in eval_sets {
        if ds.num_features() != d {
            return Err(Error::Schema(format!(
                "eval set {name:?} has {} features, training data has {d}",
                ds.num_features()
            )));
        }
    }
    let kind = objective.kind;
    let flat = FlatSet::new(train);
    let n_rows = flat.labels.len();
    let lambda_groups: Vec<Option<LambdaGroup>> = if kind.is_lambda() {
        train
            .groups()
            .iter()
            .zip(&flat.label_ranks)
            .map(|(g, r)| {
                if g.len() < 2 {
                    log::warn!("group {:?} has a single item and is skipped by the {kind} objective", g.id());
                    None
                } else {
                    Some(LambdaGroup::new(g, r, &objective.config))
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let binned = BinnedMatrix::build(&flat.rows, d, cfg.max_bins);
    let evals: Vec<(&str, FlatSet)> = eval_sets.iter().map(|(n, ds)| (*n, FlatSet::new(ds))).collect();

    let mut forest = Forest::empty(d, cfg.learning_rate, kind);
    let mut history = TrainHistory::default();
    let mut scores = vec![forest.base_score; n_rows];
    let mut eval_scores: Vec<Vec<f64>> = evals.iter().map(|(_, f)| vec![forest.base_score; f.labels.len()]).collect();
    let mut grad = vec![0.0; n_rows];
    let mut hess = vec![0.0; n_rows];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params =
        GrowParams { max_depth: cfg.max_depth, min_child_weight: cfg.min_child_weight, reg_lambda: cfg.reg_lambda };
    let mut tree_out = vec![0.0; n_rows];

    for round in 1..=cfg.num_rounds {
        compute_gradients(&flat, &lambda_groups, kind, objective, &scores, cfg.seed, round, &mut grad, &mut hess)?;
        if let Some(row) = (0..n_rows).find(|&i| !grad[i].is_finite() || !hess[i].is_finite()) {
            return Err(Error::NonFiniteGradient { round, row, g: grad[row], h: hess[row] });
        }
        let rows = sample_rows(&flat, kind, cfg.subsample, &mut rng);
        let features = sample_features(d, cfg.colsample_bytree, &mut rng);
        let tree = grow_tree(&binned, &grad, &hess, rows, &features, &params);

        tree_out.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
            for (k, out) in chunk.iter_mut().enumerate() {
                let i = c * 4096 + k;
                *out = tree.predict_row(&flat.rows[i * d..(i + 1) * d]);
            }
        });
        for (s, t) in scores.iter_mut().zip(&tree_out) {
            *s += cfg.learning_rate * t;
        }
        for ((_, set), es) in evals.iter().zip(eval_scores.iter_mut()) {
            es.par_iter_mut().enumerate().for_each(|(i, s)| {
                *s += cfg.learning_rate * tree.predict_row(&set.rows[i * d..(i + 1) * d]);
            });
        }
        forest.trees.push(tree);

        if round % cfg.eval_every == 0 {
            for &metric in &cfg.eval_metrics {
                history.push(round, "train", metric, flat.metric(metric, &scores));
                for ((name, set), es) in evals.iter().zip(&eval_scores) {
                    history.push(round, name, metric, set.metric(metric, es));
                }
            }
            log::debug!("round {round}: {:?}", history.records.last());
        }
    }
    Ok(FitOutput { forest, history, train_scores: scores })
}

#[allow(clippy::too_many_arguments)]
fn compute_gradients(
    flat: &FlatSet,
    lambda_groups: &[Option<LambdaGroup>],
    kind: ObjectiveKind,
    objective: &Objective,
    scores: &[f64],
    seed: u64,
    round: usize,
    grad: &mut [f64],
    hess: &mut [f64],
) -> Result<()> {
    if !kind.is_lambda() {
        squared_error_into(scores, &flat.labels, grad, hess);
        return Ok(());
    }
    // carve g/h into disjoint per-group slices so groups can run in parallel
    let mut slices = Vec::with_capacity(flat.spans.len());
    let (mut g_rest, mut h_rest) = (grad, hess);
    for span in &flat.spans {
        let (g_head, g_tail) = g_rest.split_at_mut(span.len());
        let (h_head, h_tail) = h_rest.split_at_mut(span.len());
        slices.push((g_head, h_head));
        g_rest = g_tail;
        h_rest = h_tail;
    }
    slices.into_par_iter().enumerate().try_for_each(|(k, (g, h))| {
        let span = flat.spans[k].clone();
        match &lambda_groups[k] {
            Some(lg) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((round as u64) << 32) | k as u64);
                lg.accumulate(&scores[span], kind, &objective.config, &mut rng, g, h)
            }
            None => {
                g.fill(0.0);
                h.fill(objective.config.hessian_floor);
                Ok(())
            }
        }
    })
}

fn sample_rows(flat: &FlatSet, kind: ObjectiveKind, subsample: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let n_rows = flat.labels.len();
    if subsample >= 1.0 {
        return (0..n_rows as u32).collect();
    }
    if kind.is_lambda() {
        // whole groups only: pairwise gradients need intact groups
        let m = flat.spans.len();
        let keep = ((subsample * m as f64).round() as usize).clamp(1, m);
        let mut picked = sample(rng, m, keep).into_vec();
        picked.sort_unstable();
        picked.into_iter().flat_map(|k| flat.spans[k].clone().map(|i| i as u32)).collect()
    } else {
        let keep = ((subsample * n_rows as f64).round() as usize).clamp(1, n_rows);
        let mut picked: Vec<u32> = sample(rng, n_rows, keep).into_iter().map(|i| i as u32).collect();
        picked.sort_unstable();
        picked
    }
}

fn sample_features(d: usize, colsample: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if colsample >= 1.0 {
        return (0..d).collect();
    }
    let keep = ((colsample * d as f64).round() as usize).clamp(1, d);
    let mut picked = sample(rng, d, keep).into_vec();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_dataset() -> GroupedDataset {
        // label is a step function of feature 0; feature 1 is noise
        let groups = (0..5)
            .map(|g| {
                let n = 40;
                let mut x = Vec::new();
                let mut y = Vec::new();
                for i in 0..n {
                    let v = (i as f64 + g as f64 * 0.37) / n as f64;
                    x.push(v);
                    x.push(((i * 17 + g * 5) % 13) as f64);
                    y.push(if v < 0.3 {
                        -1.0
                    } else if v < 0.7 {
                        0.5
                    } else {
                        2.0
                    });
                }
                Group::new(g.to_string(), 2, x, y, None).unwrap()
            })
            .collect();
        GroupedDataset::new(groups, None).unwrap()
    }

    #[test]
    fn mse_fits_step_function() {
        let ds = step_dataset();
        let cfg = TrainConfig {
            max_depth: 2,
            learning_rate: 0.3,
            num_rounds: 50,
            min_child_weight: 0.0,
            eval_metrics: vec![EvalMetric::Rmse],
            ..Default::default()
        };
        let (_, history) = fit(&ds, &Objective::new(ObjectiveKind::SquaredError), &cfg, &[]).unwrap();
        let series = history.series("train", EvalMetric::Rmse);
        assert!(series.last().unwrap().1 < 1e-3, "final rmse {:?}", series.last());
        for w in series.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn zero_rounds_gives_empty_forest() {
        let ds = step_dataset();
        let cfg = TrainConfig { num_rounds: 0, ..Default::default() };
        let (forest, history) = fit(&ds, &Objective::default(), &cfg, &[]).unwrap();
        assert!(forest.trees.is_empty());
        assert!(history.records.is_empty());
        let p = predict_group(&forest, &ds.groups()[0]).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cached_scores_equal_predictions() {
        let ds = step_dataset();
        for kind in ObjectiveKind::ALL {
            let cfg = TrainConfig {
                max_depth: 3,
                num_rounds: 15,
                subsample: 0.6,
                colsample_bytree: 0.5,
                ..Default::default()
            };
            let out = fit_with_scores(&ds, &Objective::new(kind), &cfg, &[]).unwrap();
            let predicted: Vec<f64> = predict_dataset(&out.forest, &ds).unwrap().concat();
            for (a, b) in predicted.iter().zip(&out.train_scores) {
                assert!((a - b).abs() < 1e-9);
            }
            for t in &out.forest.trees {
                assert!(t.depth() <= 3);
            }
        }
    }

    #[test]
    fn rank_ic_objective_learns_ordering() {
        let ds = step_dataset();
        let cfg = TrainConfig { max_depth: 3, num_rounds: 30, ..Default::default() };
        let (_, history) = fit(&ds, &Objective::new(ObjectiveKind::LambdaRankIc), &cfg, &[("self", &ds)]).unwrap();
        let (_, ic) = history.peak("self", EvalMetric::MeanRankIc).unwrap();
        assert!(ic > 0.8, "peak IC {ic}");
    }

    #[test]
    fn identical_seeds_give_identical_forests() {
        let ds = step_dataset();
        let cfg = TrainConfig { num_rounds: 10, subsample: 0.5, colsample_bytree: 0.5, seed: 42, ..Default::default() };
        let a = fit(&ds, &Objective::default(), &cfg, &[]).unwrap().0;
        let b = fit(&ds, &Objective::default(), &cfg, &[]).unwrap().0;
        assert_eq!(a, b);
        let c = fit(&ds, &Objective::default(), &TrainConfig { seed: 43, ..cfg }, &[]).unwrap().0;
        assert_ne!(a, c);
    }

    #[test]
    fn multithreaded_fit_matches_single_thread() {
        let ds = step_dataset();
        let cfg = TrainConfig { num_rounds: 8, ..Default::default() };
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| fit(&ds, &Objective::default(), &cfg, &[("self", &ds)]).unwrap())
        };
        let (fa, ha) = run(1);
        let (fb, hb) = run(3);
        assert_eq!(fa, fb);
        for (a, b) in ha.records.iter().zip(&hb.records) {
            assert!((a.value - b.value).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_config_and_mismatched_eval_sets() {
        let ds = step_dataset();
        let bad = TrainConfig { subsample: 0.0, ..Default::default() };
        assert!(fit(&ds, &Objective::default(), &bad, &[]).is_err());
        let other =
            GroupedDataset::new(vec![Group::new("x", 1, vec![1.0, 2.0], vec![0.0, 1.0], None).unwrap()], None).unwrap();
        assert!(fit(&ds, &Objective::default(), &TrainConfig::default(), &[("o", &other)]).is_err());
        let forest = Forest::empty(2, 0.1, ObjectiveKind::LambdaRankIc);
        assert!(matches!(predict(&forest, &[1.0, 2.0, 3.0], 3), Err(Error::FeatureMismatch { .. })));
    }

    #[test]
    fn single_item_groups_are_skipped() {
        let mut groups: Vec<Group> = step_dataset().groups().to_vec();
        groups.push(Group::new("lonely", 2, vec![0.5, 1.0], vec![3.0], None).unwrap());
        let ds = GroupedDataset::new(groups, None).unwrap();
        let cfg = TrainConfig { num_rounds: 3, ..Default::default() };
        assert_eq!(fit(&ds, &Objective::default(), &cfg, &[]).unwrap().0.trees.len(), 3);
    }
}
