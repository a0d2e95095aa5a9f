use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use crate::error::{Error, Result};

/// One tree node. Rows with `x[feature] <= threshold` go left. Split fields are
/// zero on leaves and `leaf_value` is zero on splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub leaf_value: f64,
    pub is_leaf: bool,
}

impl Node {
    fn leaf(value: f64) -> Self {
        Node { feature: 0, threshold: 0.0, left: 0, right: 0, leaf_value: value, is_leaf: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn single_leaf(value: f64) -> Self {
        Tree { nodes: vec![Node::leaf(value)] }
    }

    /// Index of the leaf that `row` lands in.
    #[inline]
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            if node.is_leaf {
                return i;
            }
            i = if row[node.feature] <= node.threshold { node.left } else { node.right };
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].leaf_value
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf).count()
    }

    /// Depth of the deepest leaf (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            let n = &self.nodes[i];
            if n.is_leaf {
                max = max.max(d);
            } else {
                stack.push((n.left, d + 1));
                stack.push((n.right, d + 1));
            }
        }
        max
    }

    /// Structural audit: single root, binary splits, every node reached exactly once,
    /// finite values and in-range feature indices.
    pub fn validate(&self, feature_count: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(format!("malformed tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if visited[i] {
                return bad(format!("node {i} reached twice"));
            }
            visited[i] = true;
            let n = &self.nodes[i];
            if n.is_leaf {
                if !n.leaf_value.is_finite() {
                    return bad(format!("leaf {i} has non-finite value"));
                }
                continue;
            }
            if n.feature >= feature_count || !n.threshold.is_finite() {
                return bad(format!("node {i} has invalid split"));
            }
            for child in [n.left, n.right] {
                if child >= self.nodes.len() || child == 0 {
                    return bad(format!("node {i} has out-of-range child {child}"));
                }
                stack.push(child);
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return bad(format!("node {i} is unreachable"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub reg_lambda: f64,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    bin: u16,
}

struct Pending {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
}

fn sums(rows: &[u32], grad: &[f64], hess: &[f64]) -> (f64, f64) {
    rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + grad[r as usize], h + hess[r as usize]))
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Best split of one feature, scanning bins left to right.
fn best_for_feature(
    bm: &BinnedMatrix,
    feature: usize,
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    total: (f64, f64),
    params: &GrowParams,
) -> Option<Split> {
    let bins = bm.cuts[feature].num_bins();
    if bins < 2 {
        return None;
    }
    let col = &bm.columns[feature];
    let mut hist = vec![[0.0f64; 2]; bins];
    for &r in rows {
        let r = r as usize;
        let slot = &mut hist[col[r] as usize];
        slot[0] += grad[r];
        slot[1] += hess[r];
    }
    let (g_total, h_total) = total;
    let parent = score(g_total, h_total, params.reg_lambda);
    let mut best: Option<Split> = None;
    let (mut gl, mut hl) = (0.0, 0.0);
    for (b, slot) in hist.iter().enumerate().take(bins - 1) {
        gl += slot[0];
        hl += slot[1];
        let (gr, hr) = (g_total - gl, h_total - hl);
        if hl < params.min_child_weight || hr < params.min_child_weight {
            continue;
        }
        let gain = 0.5 * (score(gl, hl, params.reg_lambda) + score(gr, hr, params.reg_lambda) - parent);
        if gain > 0.0 && best.is_none_or(|s| gain > s.gain) {
            best = Some(Split { gain, feature, bin: b as u16 });
        }
    }
    best
}

/// Grow one tree depth-wise on the binned rows in `rows`, considering only `features`.
pub(crate) fn grow_tree(
    bm: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<u32>,
    features: &[usize],
    params: &GrowParams,
) -> Tree {
    let mut nodes = vec![Node::leaf(0.0)];
    let mut queue = VecDeque::from([Pending { node: 0, rows, depth: 0 }]);
    while let Some(Pending { node, rows, depth }) = queue.pop_front() {
        let total = sums(&rows, grad, hess);
        let split = if depth < params.max_depth && rows.len() >= 2 {
            features
                .par_iter()
                .map(|&f| best_for_feature(bm, f, &rows, grad, hess, total, params))
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .fold(None, |acc: Option<Split>, s| match acc {
                    Some(a) if a.gain >= s.gain => Some(a),
                    _ => Some(s),
                })
        } else {
            None
        };
        let Some(split) = split else {
            nodes[node] = Node::leaf(-total.0 / (total.1 + params.reg_lambda));
            continue;
        };
        let col = &bm.columns[split.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| col[r as usize] <= split.bin);
        let left = nodes.len();
        nodes.push(Node::leaf(0.0));
        nodes.push(Node::leaf(0.0));
        nodes[node] = Node {
            feature: split.feature,
            threshold: bm.cuts[split.feature].cuts[split.bin as usize],
            left,
            right: left + 1,
            leaf_value: 0.0,
            is_leaf: false,
        };
        queue.push_back(Pending { node: left, rows: left_rows, depth: depth + 1 });
        queue.push_back(Pending { node: left + 1, rows: right_rows, depth: depth + 1 });
    }
    Tree { nodes }
}
