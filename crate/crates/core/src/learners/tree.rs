//! CART regression trees grown greedily on squared error.
//!
//! Each feature is sorted once at the root. Children inherit their sorted
//! orders through a stable partition, so a split search is a single linear
//! scan per feature. Candidate thresholds are midpoints between
//! consecutive distinct values; among equal gains the lowest feature index
//! and then the lowest threshold win.

use ndarray::ArrayView2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::TreeParams;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flattened tree; node 0 is the root. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Column-major copy of the training rows with per-feature sorted orders.
pub(crate) struct Presorted {
    pub cols: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    /// `rows` may repeat indices (bootstrap resamples). Ties on a feature
    /// are ordered by `tie_break` and then by position.
    pub fn new(x: ArrayView2<f64>, rows: &[usize], tie_break: &[f64]) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.ncols())
            .map(|j| rows.iter().map(|&i| x[[i, j]]).collect())
            .collect();
        let order = cols
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..rows.len() as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .total_cmp(&col[b as usize])
                        .then(tie_break[a as usize].total_cmp(&tie_break[b as usize]))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { cols, order }
    }

    pub fn n(&self) -> usize {
        self.order.first().map_or(0, Vec::len)
    }
}

pub(crate) struct TreeGrower<'a> {
    pub data: &'a Presorted,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Number of candidate features drawn per node; `None` tries all.
    pub max_features: Option<usize>,
    /// L2 penalty on leaf values: a leaf predicts `sum / (count + l2)` and
    /// split gains use the same shrunken sums.
    pub l2: f64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    left_count: usize,
}

impl TreeGrower<'_> {
    pub fn grow(&self, targets: &[f64], rng: Option<&mut Rng>) -> RegressionTree {
        let mut nodes = Vec::new();
        let mut rng = rng;
        let mut scratch = vec![false; self.data.n()];
        self.grow_node(self.data.order.clone(), targets, 0, &mut nodes, &mut rng, &mut scratch);
        RegressionTree { nodes }
    }

    fn grow_node(
        &self,
        lists: Vec<Vec<u32>>,
        targets: &[f64],
        depth: usize,
        nodes: &mut Vec<Node>,
        rng: &mut Option<&mut Rng>,
        goes_left: &mut [bool],
    ) -> usize {
        let id = nodes.len();
        let n = lists[0].len();
        let sum: f64 = lists[0].iter().map(|&p| targets[p as usize]).sum();
        let mean = sum / n as f64;
        let value = if self.l2 > 0.0 { sum / (n as f64 + self.l2) } else { mean };
        nodes.push(Node::Leaf { value, samples: n });

        let depth_ok = self.max_depth.is_none_or(|m| depth < m);
        if !depth_ok || n < 2 * self.min_samples_leaf {
            return id;
        }
        let sse: f64 = lists[0]
            .iter()
            .map(|&p| (targets[p as usize] - mean).powi(2))
            .sum();
        if !(sse > 0.0) {
            return id;
        }
        let Some(best) = self.best_split(&lists, targets, sum, rng) else {
            return id;
        };
        if !(best.gain > 1e-12 * sse) {
            return id;
        }

        let sorted = &lists[best.feature];
        for &p in &sorted[..best.left_count] {
            goes_left[p as usize] = true;
        }
        for &p in &sorted[best.left_count..] {
            goes_left[p as usize] = false;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in &lists {
            let mut l = Vec::with_capacity(best.left_count);
            let mut r = Vec::with_capacity(n - best.left_count);
            for &p in list {
                if goes_left[p as usize] {
                    l.push(p);
                } else {
                    r.push(p);
                }
            }
            left_lists.push(l);
            right_lists.push(r);
        }
        drop(lists);

        let left = self.grow_node(left_lists, targets, depth + 1, nodes, rng, goes_left);
        let right = self.grow_node(right_lists, targets, depth + 1, nodes, rng, goes_left);
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(
        &self,
        lists: &[Vec<u32>],
        targets: &[f64],
        total: f64,
        rng: &mut Option<&mut Rng>,
    ) -> Option<BestSplit> {
        let d = lists.len();
        match (self.max_features, rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut drawn: Vec<usize> = index::sample(rng, d, m).into_vec();
                drawn.sort_unstable();
                if let Some(best) = self.scan_features(&drawn, lists, targets, total) {
                    return Some(best);
                }
                // No valid split among the drawn features: keep looking.
                let rest: Vec<usize> = (0..d).filter(|j| !drawn.contains(j)).collect();
                self.scan_features(&rest, lists, targets, total)
            }
            _ => {
                let all: Vec<usize> = (0..d).collect();
                self.scan_features(&all, lists, targets, total)
            }
        }
    }

    fn scan_features(&self, features: &[usize], lists: &[Vec<u32>], targets: &[f64], total: f64) -> Option<BestSplit> {
        let n = lists[0].len();
        let min_leaf = self.min_samples_leaf;
        let mut best: Option<BestSplit> = None;
        for &f in features {
            let col = &self.data.cols[f];
            let list = &lists[f];
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                let p = list[k] as usize;
                left_sum += targets[p];
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf {
                    continue;
                }
                if nr < min_leaf {
                    break;
                }
                let here = col[p];
                let next = col[list[k + 1] as usize];
                if next <= here {
                    continue;
                }
                let gain = if self.l2 > 0.0 {
                    let right_sum = total - left_sum;
                    left_sum * left_sum / (nl as f64 + self.l2) + right_sum * right_sum / (nr as f64 + self.l2)
                        - total * total / (n as f64 + self.l2)
                } else {
                    let ml = left_sum / nl as f64;
                    let mr = (total - left_sum) / nr as f64;
                    (nl as f64 * nr as f64 / n as f64) * (ml - mr) * (ml - mr)
                };
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = here + (next - here) / 2.0;
                    if threshold >= next {
                        threshold = here;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                        left_count: nl,
                    });
                }
            }
        }
        best
    }
}

pub(super) fn fit_single(x: ArrayView2<f64>, y: &[f64], params: &TreeParams) -> RegressionTree {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let data = Presorted::new(x, &rows, y);
    TreeGrower {
        data: &data,
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
        l2: 0.0,
    }
    .grow(y, None)
}
