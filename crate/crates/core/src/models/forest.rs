use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Node, TreeBuilder};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    /// Fraction of features examined per split; `None` means `sqrt(d)`.
    pub feature_fraction: Option<f64>,
    /// Weighted bootstrap per tree. When false every tree sees every row
    /// with its instance weight.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 8,
            feature_fraction: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub trees: Vec<Node>,
}

impl Forest {
    /// Mean leaf positive fraction over trees.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub(crate) fn fit(params: &ForestParams, ds: &Dataset, seed: u64) -> Result<Forest> {
    let d = ds.n_features();
    let per_split = match params.feature_fraction {
        Some(f) => ((f * d as f64).round() as usize).max(1),
        None => ((d as f64).sqrt() as usize).max(1),
    };
    let n = ds.n_rows();
    let sampler = WeightedIndex::new(ds.w()).map_err(|e| Error::Numeric(format!("bootstrap weights: {e}")))?;
    let stats: Vec<(f64, f64)> = if params.bootstrap {
        // sampling already reflects the weights
        ds.y().iter().map(|&y| (1.0, f64::from(y))).collect()
    } else {
        ds.y().iter().zip(ds.w()).map(|(&y, &w)| (w, w * f64::from(y))).collect()
    };
    let builder = TreeBuilder {
        ds,
        stats: &stats,
        criterion: Criterion::Gini,
        max_depth: params.max_depth,
        features_per_split: per_split,
    };
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, &[&"tree", &t]));
            let mut rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| sampler.sample(&mut rng)).collect()
            } else {
                (0..n).collect()
            };
            builder.grow(&mut rows, &mut rng)
        })
        .collect();
    Ok(Forest { n_features: d, trees })
}
