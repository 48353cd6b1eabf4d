use serde::{Deserialize, Serialize};

use super::linear::sigmoid;
use super::tree::{Criterion, Node, TreeBuilder};
use crate::data::Dataset;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2: f64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 2,
            l2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub n_features: usize,
    pub base_margin: f64,
    pub learning_rate: f64,
    pub trees: Vec<Node>,
}

impl Boosted {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_margin + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Logistic-loss gradient boosting with Newton leaf values.
pub(crate) fn fit(params: &BoostingParams, ds: &Dataset, seed: u64) -> Boosted {
    let total_w = ds.total_weight();
    let positive_w: f64 = ds.w().iter().zip(ds.y()).filter(|(_, &y)| y == 1).map(|(w, _)| w).sum();
    let p0 = (positive_w / total_w).clamp(1e-6, 1.0 - 1e-6);
    let base_margin = (p0 / (1.0 - p0)).ln();
    let mut margins = vec![base_margin; ds.n_rows()];
    let mut rng = seed::rng(seed::derive(seed, &[&"boosting"]));
    let mut trees = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        let stats: Vec<(f64, f64)> = margins
            .iter()
            .zip(ds.y())
            .zip(ds.w())
            .map(|((&m, &y), &w)| {
                let p = sigmoid(m);
                (w * p * (1.0 - p), w * (p - f64::from(y)))
            })
            .collect();
        let builder = TreeBuilder {
            ds,
            stats: &stats,
            criterion: Criterion::Newton { l2: params.l2 },
            max_depth: params.max_depth,
            features_per_split: ds.n_features(),
        };
        let mut rows: Vec<usize> = (0..ds.n_rows()).collect();
        let tree = builder.grow(&mut rows, &mut rng);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += params.learning_rate * tree.predict(ds.row(i));
        }
        trees.push(tree);
    }
    Boosted {
        n_features: ds.n_features(),
        base_margin,
        learning_rate: params.learning_rate,
        trees,
    }
}
