//! Per-item gradient and hessian statistics for the boosting loop.
//!
//! The lambda objectives share one pairwise kernel. For every pair of items with
//! distinct label ranks, the more relevant item `hi` and the less relevant item
//! `lo` get
//!
//! ```text
//! p      = 1 / (1 + exp(-sigma (s_hi - s_lo)))
//! lambda = sigma (1 - p) |delta|           g_hi -= lambda, g_lo += lambda
//! hess   = 2 sigma^2 p (1 - p) |delta|     h_hi += hess,   h_lo += hess
//! ```
//!
//! where `delta` is 1 (pairwise), the NDCG swap delta, or the Rank IC swap delta.
//! With the tree learner's leaf value `-sum(g) / (sum(h) + lambda)`, negative
//! gradients raise scores, so relevant items move up.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Group, LabelRanks};
use crate::error::{Error, Result};
use crate::rankcore::{descending_ranks, discount, gain, rank_ic_scale, SigmoidShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ObjectiveKind {
    #[serde(rename = "mse")]
    SquaredError,
    #[serde(rename = "pairwise")]
    LambdaPairwise,
    #[serde(rename = "ndcg")]
    LambdaNdcg,
    #[serde(rename = "rankic")]
    #[default]
    LambdaRankIc,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] = [
        ObjectiveKind::SquaredError,
        ObjectiveKind::LambdaPairwise,
        ObjectiveKind::LambdaNdcg,
        ObjectiveKind::LambdaRankIc,
    ];

    pub fn is_lambda(self) -> bool {
        !matches!(self, ObjectiveKind::SquaredError)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::SquaredError => "mse",
            ObjectiveKind::LambdaPairwise => "pairwise",
            ObjectiveKind::LambdaNdcg => "ndcg",
            ObjectiveKind::LambdaRankIc => "rankic",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective {s:?}; expected mse, pairwise, ndcg or rankic")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    pub sigma: SigmoidShape,
    /// Maximum sampled pairs per group; `None` enumerates all pairs.
    pub pair_budget: Option<usize>,
    pub hessian_floor: f64,
    /// Number of relevance grades used by the NDCG objective and NDCG@k metric.
    pub ndcg_relevance_grades: u32,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            sigma: SigmoidShape::default(),
            pair_budget: None,
            hessian_floor: 1e-16,
            ndcg_relevance_grades: 32,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pair_budget == Some(0) {
            return Err(Error::Config("pair_budget must be at least 1".into()));
        }
        if !(self.hessian_floor > 0.0) || !self.hessian_floor.is_finite() {
            return Err(Error::Config("hessian_floor must be a positive real".into()));
        }
        if self.ndcg_relevance_grades < 2 {
            return Err(Error::Config("ndcg_relevance_grades must be at least 2".into()));
        }
        // 2^G must stay exact and finite in f64
        if self.ndcg_relevance_grades > 64 {
            return Err(Error::Config("ndcg_relevance_grades must be at most 64".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradHessVector {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl GradHessVector {
    pub fn zeros(n: usize) -> Self {
        GradHessVector { g: vec![0.0; n], h: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

pub fn grad_hess_squared_error(scores: &[f64], labels: &[f64]) -> Result<GradHessVector> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), got: scores.len() });
    }
    let mut out = GradHessVector::zeros(scores.len());
    squared_error_into(scores, labels, &mut out.g, &mut out.h);
    Ok(out)
}

pub(crate) fn squared_error_into(scores: &[f64], labels: &[f64], g: &mut [f64], h: &mut [f64]) {
    for i in 0..scores.len() {
        g[i] = scores[i] - labels[i];
        h[i] = 1.0;
    }
}

/// Bucket label-rank percentiles into `grades` levels; the top-labelled item gets `grades - 1`.
pub fn labels_to_relevance_grades(group: &Group, grades: u32) -> Result<Vec<u32>> {
    if grades < 2 {
        return Err(Error::Domain(format!("need at least 2 relevance grades, got {grades}")));
    }
    Ok(grades_from_ranks(&group.label_ranks(), grades))
}

pub(crate) fn grades_from_ranks(ranks: &[u32], grades: u32) -> Vec<u32> {
    let n = ranks.len() as u64;
    ranks.iter().map(|&r| ((grades as u64 * (n - r as u64)) / n) as u32).collect()
}

/// Per-pair diagnostic record; `hi` is the more relevant item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLambda {
    pub hi: usize,
    pub lo: usize,
    pub delta: f64,
    pub lambda: f64,
    pub hessian: f64,
}

/// Label-side quantities of one group that stay fixed across boosting rounds.
#[derive(Debug, Clone)]
pub(crate) struct LambdaGroup {
    /// Item positions from most to least relevant.
    order: Vec<usize>,
    item_index: Vec<usize>,
    /// `2^grade` per label-rank position (NDCG only).
    exp_grades: Vec<f64>,
    idcg: f64,
}

impl LambdaGroup {
    pub(crate) fn new(group: &Group, ranks: &LabelRanks, cfg: &ObjectiveConfig) -> Self {
        let n = ranks.len();
        let mut order = vec![0usize; n];
        for (i, &r) in ranks.iter().enumerate() {
            order[r as usize - 1] = i;
        }
        let grades = grades_from_ranks(ranks, cfg.ndcg_relevance_grades);
        let exp_grades = order.iter().map(|&i| (grades[i] as f64).exp2()).collect();
        let mut sorted = grades;
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let idcg = sorted.iter().enumerate().map(|(p, &g)| gain(g) * discount(p as u32 + 1)).sum();
        LambdaGroup { order, item_index: group.item_index().to_vec(), exp_grades, idcg }
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    /// Accumulate lambda gradients for this group into `g` and `h` (overwritten).
    pub(crate) fn accumulate<R: Rng>(
        &self,
        scores: &[f64],
        kind: ObjectiveKind,
        cfg: &ObjectiveConfig,
        rng: &mut R,
        g: &mut [f64],
        h: &mut [f64],
    ) -> Result<()> {
        let n = self.len();
        if n < 2 {
            return Err(Error::Domain(format!("lambda objectives need groups of at least 2 items, got {n}")));
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore(pos));
        }
        let pairs = self.select_pairs(cfg.pair_budget, rng);
        let mut sink = Accumulator { g_sorted: vec![0.0; n], h_sorted: vec![0.0; n] };
        self.visit_pairs(scores, kind, cfg.sigma.value(), pairs.as_deref(), &mut sink);
        for (k, &i) in self.order.iter().enumerate() {
            g[i] = sink.g_sorted[k];
            h[i] = sink.h_sorted[k].max(cfg.hessian_floor);
        }
        Ok(())
    }

    /// Sorted pair indices into the upper triangle, or `None` for all pairs.
    fn select_pairs<R: Rng>(&self, budget: Option<usize>, rng: &mut R) -> Option<Vec<usize>> {
        let n = self.len();
        let total = n * (n - 1) / 2;
        let budget = budget.filter(|&b| b < total)?;
        let mut picked = rand::seq::index::sample(rng, total, budget).into_vec();
        picked.sort_unstable();
        Some(picked)
    }

    fn visit_pairs(
        &self,
        scores: &[f64],
        kind: ObjectiveKind,
        sigma: f64,
        pairs: Option<&[usize]>,
        sink: &mut impl PairSink,
    ) {
        let n = self.len();
        let s: Vec<f64> = self.order.iter().map(|&i| scores[i]).collect();
        let predicted = descending_ranks(scores, &self.item_index);
        let r: Vec<f64> = self.order.iter().map(|&i| predicted[i] as f64).collect();
        let s_max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // p = e_hi / (e_hi + e_lo) with e = exp(sigma (s - s_max)) avoids one exp per pair
        let e: Vec<f64> = s.iter().map(|&v| (sigma * (v - s_max)).exp()).collect();
        match kind {
            ObjectiveKind::SquaredError => unreachable!("squared error is not a pairwise objective"),
            ObjectiveKind::LambdaPairwise => pair_loop(n, &s, &e, sigma, pairs, sink, |_, _| 1.0),
            ObjectiveKind::LambdaRankIc => {
                let scale = rank_ic_scale(n);
                pair_loop(n, &s, &e, sigma, pairs, sink, |a, b| scale * (r[a] - r[b]).abs() * (b - a) as f64)
            }
            ObjectiveKind::LambdaNdcg => {
                let disc: Vec<f64> = r.iter().map(|&p| discount(p as u32)).collect();
                let idcg = self.idcg;
                let eg = &self.exp_grades;
                pair_loop(n, &s, &e, sigma, pairs, sink, |a, b| {
                    if idcg > 0.0 {
                        (eg[a] - eg[b]).abs() / idcg * (disc[a] - disc[b]).abs()
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    fn pair_records(&self, scores: &[f64], kind: ObjectiveKind, sigma: f64) -> Vec<PairLambda> {
        let mut sink = Recorder { order: &self.order, records: Vec::new() };
        self.visit_pairs(scores, kind, sigma, None, &mut sink);
        sink.records
    }
}

trait PairSink {
    fn pair(&mut self, a: usize, b: usize, delta: f64, lambda: f64, hessian: f64);
}

struct Accumulator {
    g_sorted: Vec<f64>,
    h_sorted: Vec<f64>,
}

impl PairSink for Accumulator {
    #[inline]
    fn pair(&mut self, a: usize, b: usize, _delta: f64, lambda: f64, hessian: f64) {
        self.g_sorted[a] -= lambda;
        self.g_sorted[b] += lambda;
        self.h_sorted[a] += hessian;
        self.h_sorted[b] += hessian;
    }
}

struct Recorder<'a> {
    order: &'a [usize],
    records: Vec<PairLambda>,
}

impl PairSink for Recorder<'_> {
    fn pair(&mut self, a: usize, b: usize, delta: f64, lambda: f64, hessian: f64) {
        self.records.push(PairLambda { hi: self.order[a], lo: self.order[b], delta, lambda, hessian });
    }
}

/// Walk pairs `(a, b)`, `a < b`, in label-rank coordinates.
#[inline(always)]
fn pair_loop(
    n: usize,
    s: &[f64],
    e: &[f64],
    sigma: f64,
    pairs: Option<&[usize]>,
    sink: &mut impl PairSink,
    delta: impl Fn(usize, usize) -> f64,
) {
    let two_sigma_sq = 2.0 * sigma * sigma;
    let mut visit = |a: usize, b: usize| {
        let d = delta(a, b);
        let denom = e[a] + e[b];
        let (p, q) = if denom > 0.0 {
            (e[a] / denom, e[b] / denom)
        } else {
            let x = sigma * (s[a] - s[b]);
            (1.0 / (1.0 + (-x).exp()), 1.0 / (1.0 + x.exp()))
        };
        sink.pair(a, b, d, sigma * q * d, two_sigma_sq * p * q * d);
    };
    match pairs {
        None => {
            for a in 0..n {
                for b in a + 1..n {
                    visit(a, b);
                }
            }
        }
        Some(list) => {
            // decode sorted upper-triangle indices row by row
            let mut row = 0;
            let mut row_start = 0;
            for &k in list {
                while k >= row_start + (n - 1 - row) {
                    row_start += n - 1 - row;
                    row += 1;
                }
                visit(row, row + 1 + (k - row_start));
            }
        }
    }
}

/// Lambda gradients and hessians for one group.
///
/// `rng` is only consulted when `cfg.pair_budget` limits the number of pairs.
pub fn grad_hess_lambda<R: Rng>(
    group: &Group,
    label_ranks: &LabelRanks,
    scores: &[f64],
    kind: ObjectiveKind,
    cfg: &ObjectiveConfig,
    rng: &mut R,
) -> Result<GradHessVector> {
    if !kind.is_lambda() {
        return Err(Error::Domain(format!("{kind} is not a lambda objective")));
    }
    let n = group.len();
    if scores.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: scores.len() });
    }
    if label_ranks.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: label_ranks.len() });
    }
    cfg.validate()?;
    let prepared = LambdaGroup::new(group, label_ranks, cfg);
    let mut out = GradHessVector::zeros(n);
    prepared.accumulate(scores, kind, cfg, rng, &mut out.g, &mut out.h)?;
    Ok(out)
}

/// Every pair's delta, lambda and hessian over all pairs, in label-rank order.
pub fn lambda_pairs(
    group: &Group,
    label_ranks: &LabelRanks,
    scores: &[f64],
    kind: ObjectiveKind,
    cfg: &ObjectiveConfig,
) -> Result<Vec<PairLambda>> {
    if !kind.is_lambda() {
        return Err(Error::Domain(format!("{kind} is not a lambda objective")));
    }
    if scores.len() != group.len() {
        return Err(Error::LengthMismatch { expected: group.len(), got: scores.len() });
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(pos));
    }
    let prepared = LambdaGroup::new(group, label_ranks, cfg);
    Ok(prepared.pair_records(scores, kind, cfg.sigma.value()))
}
