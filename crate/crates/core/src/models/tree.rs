//! Binary regression/classification trees over per-row statistic pairs.
//!
//! A split criterion is a score `f(a, b)` of the summed statistics of a
//! node; the gain of a split is `f(left) + f(right) - f(parent)`.
//! Weighted Gini uses `a = sum w`, `b = sum w y`, `f = (b^2 + (a-b)^2) / a`
//! (the negated weighted Gini impurity plus a constant). Second-order
//! boosting uses `a = sum h`, `b = sum g`, `f = b^2 / (a + l2)`.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::Rng as SeededRng;

const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Criterion {
    Gini,
    Newton { l2: f64 },
}

impl Criterion {
    fn score(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => {
                if a > 0.0 {
                    (b * b + (a - b) * (a - b)) / a
                } else {
                    0.0
                }
            }
            Criterion::Newton { l2 } => {
                if a + l2 > 0.0 {
                    b * b / (a + l2)
                } else {
                    0.0
                }
            }
        }
    }

    fn leaf(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => {
                if a > 0.0 {
                    b / a
                } else {
                    0.0
                }
            }
            Criterion::Newton { l2 } => {
                if a + l2 > 0.0 {
                    -b / (a + l2)
                } else {
                    0.0
                }
            }
        }
    }
}

pub(crate) struct TreeBuilder<'a> {
    pub ds: &'a Dataset,
    /// Per-row statistics, parallel to `ds` rows.
    pub stats: &'a [(f64, f64)],
    pub criterion: Criterion,
    pub max_depth: usize,
    /// Number of features examined at each split.
    pub features_per_split: usize,
}

impl TreeBuilder<'_> {
    /// Grows a tree over `rows` (indices may repeat, as in a bootstrap).
    pub fn grow(&self, rows: &mut [usize], rng: &mut SeededRng) -> Node {
        self.grow_node(rows, 0, rng)
    }

    fn totals(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.stats[i].0, b + self.stats[i].1))
    }

    fn grow_node(&self, rows: &mut [usize], depth: usize, rng: &mut SeededRng) -> Node {
        let (a, b) = self.totals(rows);
        let leaf = Node::Leaf {
            value: self.criterion.leaf(a, b),
        };
        if depth >= self.max_depth || rows.len() < 2 {
            return leaf;
        }
        let parent = self.criterion.score(a, b);
        let d = self.ds.n_features();
        let m = self.features_per_split.clamp(1, d.max(1));
        let candidates: Vec<usize> = if m >= d {
            (0..d).collect()
        } else {
            let mut picked = sample(rng, d, m).into_vec();
            picked.sort_unstable();
            picked
        };

        let mut best: Option<(f64, usize, f64)> = None;
        for &feature in &candidates {
            rows.sort_by(|&p, &q| self.ds.value(p, feature).total_cmp(&self.ds.value(q, feature)));
            let (mut la, mut lb) = (0.0, 0.0);
            for pos in 0..rows.len() - 1 {
                let i = rows[pos];
                la += self.stats[i].0;
                lb += self.stats[i].1;
                let here = self.ds.value(i, feature);
                let next = self.ds.value(rows[pos + 1], feature);
                if here == next {
                    continue;
                }
                let gain = self.criterion.score(la, lb) + self.criterion.score(a - la, b - lb) - parent;
                if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, feature, here + (next - here) / 2.0));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return leaf;
        };
        let split = partition_in_place(rows, |&i| self.ds.value(i, feature) <= threshold);
        let (left, right) = rows.split_at_mut(split);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow_node(left, depth + 1, rng)),
            right: Box::new(self.grow_node(right, depth + 1, rng)),
        }
    }
}

/// In-place partition; returns the number of elements satisfying `pred`,
/// which are moved to the front.
fn partition_in_place(rows: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let mut front = 0;
    for i in 0..rows.len() {
        if pred(&rows[i]) {
            rows.swap(front, i);
            front += 1;
        }
    }
    front
}
