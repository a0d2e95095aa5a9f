//! Closed-form ranking mathematics.
//!
//! Everything here works on integer rank vectors: rank 1 is the largest value and
//! ties are broken by ascending item index. Spearman's rho between two such
//! permutations reduces to a scaled dot product, which makes the swap delta
//! `12 |r_j - r_i| |y_i - y_j| / (n (n^2 - 1))` exact.

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_permutation, LabelRanks};
use crate::error::{Error, Result};

/// Ranks of `values` in descending order, 1-based. Equal values are ordered by
/// ascending `item_index`. Callers must reject NaN beforehand.
pub(crate) fn descending_ranks(values: &[f64], item_index: &[usize]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| descending_cmp(values, item_index, a, b));
    let mut ranks = vec![0u32; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos as u32 + 1;
    }
    ranks
}

fn descending_cmp(values: &[f64], item_index: &[usize], a: usize, b: usize) -> Ordering {
    values[b].total_cmp(&values[a]).then(item_index[a].cmp(&item_index[b]))
}

/// Predicted ranks from model scores; 1 is the highest score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedRanks(Vec<u32>);

impl PredictedRanks {
    pub fn from_permutation(ranks: Vec<u32>) -> Result<Self> {
        check_permutation(&ranks)?;
        Ok(PredictedRanks(ranks))
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

impl Deref for PredictedRanks {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

/// Steepness of the pairwise logistic link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SigmoidShape(f64);

impl SigmoidShape {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(SigmoidShape(sigma))
        } else {
            Err(Error::Domain(format!("sigma must be a positive finite real, got {sigma}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for SigmoidShape {
    fn default() -> Self {
        SigmoidShape(1.0)
    }
}

impl TryFrom<f64> for SigmoidShape {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        SigmoidShape::new(v)
    }
}

impl From<SigmoidShape> for f64 {
    fn from(s: SigmoidShape) -> f64 {
        s.0
    }
}

pub fn predicted_ranks(scores: &[f64], item_index: &[usize]) -> Result<PredictedRanks> {
    if scores.is_empty() {
        return Err(Error::Domain("cannot rank an empty score vector".into()));
    }
    if item_index.len() != scores.len() {
        return Err(Error::LengthMismatch { expected: scores.len(), got: item_index.len() });
    }
    if let Some(pos) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFiniteScore(pos));
    }
    Ok(PredictedRanks(descending_ranks(scores, item_index)))
}

/// Population variance of `1..=n`.
pub fn rank_variance(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("rank variance needs n >= 2, got {n}")));
    }
    let n = n as f64;
    Ok((n * n - 1.0) / 12.0)
}

/// `12 / (n (n^2 - 1))`, the common normaliser of rho and its pair decompositions.
pub fn rank_ic_scale(n: usize) -> f64 {
    let n = n as f64;
    12.0 / (n * (n * n - 1.0))
}

pub fn spearman_rho(predicted: &PredictedRanks, labels: &LabelRanks) -> Result<f64> {
    rho_from_ranks(predicted, labels)
}

pub(crate) fn rho_from_ranks(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Domain(format!("spearman rho needs n >= 2, got {n}")));
    }
    let dot: i128 = a.iter().zip(b).map(|(&x, &y)| x as i128 * y as i128).sum();
    let n_i = n as i128;
    // 12 (D - n ((n+1)/2)^2) / (n (n^2-1)), scaled by 4 to stay integral
    let num = 4 * dot - n_i * (n_i + 1) * (n_i + 1);
    let den = n_i * (n_i * n_i - 1);
    Ok(3.0 * num as f64 / den as f64)
}

/// Absolute change in rho when items i and j swap predicted positions.
pub fn delta_rank_ic(pred_i: u32, pred_j: u32, label_i: u32, label_j: u32, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("delta rank IC needs n >= 2, got {n}")));
    }
    let pred_gap = (pred_j as i64 - pred_i as i64).unsigned_abs() as f64;
    let label_gap = (label_i as i64 - label_j as i64).unsigned_abs() as f64;
    Ok(rank_ic_scale(n) * pred_gap * label_gap)
}

/// Absolute change in NDCG when the items at positions `pos_i` and `pos_j` swap.
pub fn delta_ndcg(grade_i: f64, grade_j: f64, pos_i: u32, pos_j: u32, idcg: f64) -> Result<f64> {
    if !(idcg > 0.0) {
        return Err(Error::Domain(format!("idcg must be positive, got {idcg}")));
    }
    if pos_i == 0 || pos_j == 0 {
        return Err(Error::Domain("positions are 1-based".into()));
    }
    let gain = (grade_i.exp2() - grade_j.exp2()).abs() / idcg;
    Ok(gain * (discount(pos_i) - discount(pos_j)).abs())
}

/// `1 / log2(1 + position)` for a 1-based position.
#[inline]
pub(crate) fn discount(pos: u32) -> f64 {
    1.0 / (1.0 + pos as f64).log2()
}

#[inline]
pub(crate) fn gain(grade: u32) -> f64 {
    (grade as f64).exp2() - 1.0
}

/// DCG@k of the grades in the order given by `order`.
fn dcg_in_order(grades: &[u32], order: &[usize], k: usize) -> f64 {
    order.iter().take(k).enumerate().map(|(p, &i)| gain(grades[i]) * discount(p as u32 + 1)).sum()
}

/// Ideal DCG@k: grades sorted descending.
pub fn ideal_dcg(grades: &[u32], k: usize) -> f64 {
    let mut sorted = grades.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted.iter().take(k).enumerate().map(|(p, &g)| gain(g) * discount(p as u32 + 1)).sum()
}

/// NDCG@k with gain `2^g - 1`. Score ties are ordered by position. Returns 1.0
/// when the ideal DCG is zero.
pub fn ndcg_at_k(scores: &[f64], grades: &[u32], k: usize) -> Result<f64> {
    if scores.len() != grades.len() {
        return Err(Error::LengthMismatch { expected: scores.len(), got: grades.len() });
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let idcg = ideal_dcg(grades, k);
    if idcg == 0.0 {
        return Ok(1.0);
    }
    let index: Vec<usize> = (0..scores.len()).collect();
    let mut order = index.clone();
    order.sort_by(|&a, &b| descending_cmp(scores, &index, a, b));
    Ok(dcg_in_order(grades, &order, k) / idcg)
}

/// `log2(1 + exp(-x))` without overflow.
#[inline]
pub(crate) fn log2_logistic_loss(x: f64) -> f64 {
    let z = -x;
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus / std::f64::consts::LN_2
}

fn check_scores(scores: &[f64], labels: &LabelRanks) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), got: scores.len() });
    }
    if scores.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 items, got {}", scores.len())));
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(pos));
    }
    Ok(())
}

/// Items listed from most to least relevant (label rank 1 first).
fn by_label_rank(labels: &LabelRanks) -> Vec<usize> {
    let mut order = vec![0usize; labels.len()];
    for (i, &r) in labels.iter().enumerate() {
        order[r as usize - 1] = i;
    }
    order
}

/// `1 - rho` written as a weighted count of discordant pairs. Requires tie-free scores.
pub fn rank_ic_loss(scores: &[f64], labels: &LabelRanks) -> Result<f64> {
    check_scores(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    if let Some(w) = idx.windows(2).find(|w| scores[w[0]] == scores[w[1]]) {
        return Err(Error::ScoreTies(w[0].min(w[1]), w[0].max(w[1])));
    }
    let order = by_label_rank(labels);
    let n = order.len();
    let mut discordant: u128 = 0;
    for a in 0..n {
        let s_hi = scores[order[a]];
        for (b, &lo) in order.iter().enumerate().skip(a + 1) {
            if s_hi < scores[lo] {
                discordant += (b - a) as u128;
            }
        }
    }
    Ok(rank_ic_scale(n) * discordant as f64)
}

/// Logistic surrogate of `1 - rho`: each discordance indicator is replaced by
/// `log2(1 + exp(-sigma (s_i - s_j)))`.
pub fn logistic_surrogate_loss(scores: &[f64], labels: &LabelRanks, sigma: SigmoidShape) -> Result<f64> {
    check_scores(scores, labels)?;
    let order = by_label_rank(labels);
    let n = order.len();
    let sigma = sigma.value();
    let mut total = 0.0;
    for a in 0..n {
        let s_hi = scores[order[a]];
        for (b, &lo) in order.iter().enumerate().skip(a + 1) {
            total += (b - a) as f64 * log2_logistic_loss(sigma * (s_hi - scores[lo]));
        }
    }
    Ok(rank_ic_scale(n) * total)
}

/// Pairwise logistic loss weighted by the swap delta of rho at the current predicted ranks.
pub fn lambda_rank_ic_loss(scores: &[f64], labels: &LabelRanks, sigma: SigmoidShape) -> Result<f64> {
    check_scores(scores, labels)?;
    let n = scores.len();
    let index: Vec<usize> = (0..n).collect();
    let predicted = predicted_ranks(scores, &index)?;
    Ok(weighted_logistic_loss(scores, labels, &predicted, sigma))
}

/// The LambdaRankIC loss with the swap weights taken from `weight_ranks` instead of
/// the ranks implied by `scores`.
pub fn weighted_logistic_loss(
    scores: &[f64],
    labels: &LabelRanks,
    weight_ranks: &PredictedRanks,
    sigma: SigmoidShape,
) -> f64 {
    let order = by_label_rank(labels);
    let n = order.len();
    let sigma = sigma.value();
    let mut total = 0.0;
    for a in 0..n {
        let hi = order[a];
        for (b, &lo) in order.iter().enumerate().skip(a + 1) {
            let pred_gap = (weight_ranks[hi] as i64 - weight_ranks[lo] as i64).unsigned_abs();
            let w = (pred_gap * (b - a) as u64) as f64;
            total += w * log2_logistic_loss(sigma * (scores[hi] - scores[lo]));
        }
    }
    rank_ic_scale(n) * total
}
