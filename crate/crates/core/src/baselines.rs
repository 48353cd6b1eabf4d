//! Pre-processing bias mitigation techniques used as comparison arms:
//! reweighing, subgroup-balancing SMOTE, and the disparate impact remover.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::transforms::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    FairSmote,
    Reweighing,
    Dir,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::FairSmote, Baseline::Reweighing, Baseline::Dir];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::FairSmote => "fairsmote",
            Baseline::Reweighing => "reweighing",
            Baseline::Dir => "dir",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown baseline `{s}` (expected fairsmote, reweighing or dir)")))
    }
}

/// Repair amount of the disparate impact remover, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RepairLevel(f64);

impl RepairLevel {
    pub const FULL: RepairLevel = RepairLevel(1.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!("repair level {lambda} outside [0, 1]")));
        }
        Ok(Self(lambda))
    }

    pub fn lambda(self) -> f64 {
        self.0
    }
}

impl Default for RepairLevel {
    fn default() -> Self {
        Self::FULL
    }
}

impl TryFrom<f64> for RepairLevel {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        RepairLevel::new(v)
    }
}

impl From<RepairLevel> for f64 {
    fn from(r: RepairLevel) -> f64 {
        r.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self { k_neighbors: 5, seed: 0 }
    }
}

/// Parameters of all three techniques, as read from experiment configs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub k_neighbors: Option<usize>,
    pub repair_level: RepairLevel,
}

/// Applies `baseline` to a train/test split. Only the disparate impact
/// remover changes the test split.
pub fn apply(baseline: Baseline, params: &BaselineParams, train: &Dataset, test: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    match baseline {
        Baseline::Reweighing => Ok((reweighing(train)?, test.clone())),
        Baseline::FairSmote => {
            let p = SmoteParams {
                k_neighbors: params.k_neighbors.unwrap_or(SmoteParams::default().k_neighbors),
                seed,
            };
            Ok((fair_smote(train, &p)?, test.clone()))
        }
        Baseline::Dir => disparate_impact_remover(train, test, params.repair_level),
    }
}

/// Replaces every weight in cell `(a, y)` by `n_a n_y / (n n_ay)`, making
/// group and label independent under the new weights.
pub fn reweighing(train: &Dataset) -> Result<Dataset> {
    let counts = train.cell_counts();
    for (y, row) in counts.iter().enumerate() {
        for (a, &c) in row.iter().enumerate() {
            if c == 0 {
                return Err(Error::DegenerateGroup(format!("no rows with y={y}, a={a}")));
            }
        }
    }
    let n = train.n_rows() as f64;
    let n_y = [counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]];
    let n_a = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
    let cell_weight = |y: usize, a: usize| (n_a[a] * n_y[y]) as f64 / (n * counts[y][a] as f64);
    let w = train
        .y()
        .iter()
        .zip(train.a())
        .map(|(&y, &a)| cell_weight(usize::from(y), usize::from(a)))
        .collect();
    train.with_weights(w)
}

/// Raises every `(a, y)` cell to the largest cell count with synthetic
/// rows interpolated between a random cell member and one of its
/// `k_neighbors` nearest same-cell neighbors (Euclidean, all encoded
/// features). Numeric features are interpolated; each one-hot group is
/// copied whole from one of the two parents. Synthetic rows take the
/// first parent's weight and are appended after the originals.
pub fn fair_smote(train: &Dataset, params: &SmoteParams) -> Result<Dataset> {
    if params.k_neighbors < 1 {
        return Err(Error::InvalidConfig("k_neighbors must be at least 1".into()));
    }
    let cells = train.cell_indices();
    for (y, row) in cells.iter().enumerate() {
        for (a, members) in row.iter().enumerate() {
            if members.len() < 2 {
                return Err(Error::DegenerateGroup(format!(
                    "cell y={y}, a={a} has {} rows, SMOTE needs 2",
                    members.len()
                )));
            }
        }
    }
    let target = cells.iter().flatten().map(Vec::len).max().unwrap_or(0);
    let numeric = train.numeric_columns();
    let groups = train.one_hot_groups();
    let mut rng = seed::rng(seed::derive(params.seed, &[&"fairsmote"]));
    let mut synthetic = Vec::new();

    for (y, row) in cells.iter().enumerate() {
        for (a, members) in row.iter().enumerate() {
            let k = params.k_neighbors.min(members.len() - 1);
            for _ in members.len()..target {
                let i = members[rng.random_range(0..members.len())];
                let mut by_distance: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (squared_distance(train.row(i), train.row(j)), j))
                    .collect();
                by_distance.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
                let j = by_distance[rng.random_range(0..k)].1;
                let (x, xn) = (train.row(i), train.row(j));
                let u: f64 = rng.random();
                let mut values = x.to_vec();
                for &c in &numeric {
                    values[c] = x[c] + u * (xn[c] - x[c]);
                }
                for group in &groups {
                    if rng.random_bool(0.5) {
                        for &c in group {
                            values[c] = xn[c];
                        }
                    }
                }
                synthetic.push((values, y as u8, a as u8, train.w()[i]));
            }
        }
    }
    train.with_appended_rows(synthetic)
}

/// Per-group quantile maps of one numeric feature, fitted on training data.
#[derive(Debug, Clone, PartialEq)]
struct QuantileRepair {
    sorted: [Vec<f64>; 2],
}

impl QuantileRepair {
    /// Mid-rank quantile of `v` within group `g`.
    fn quantile(&self, g: usize, v: f64) -> f64 {
        let s = &self.sorted[g];
        let below = s.partition_point(|&x| x < v);
        let at_most = s.partition_point(|&x| x <= v);
        (below + at_most) as f64 / (2 * s.len()) as f64
    }

    /// Median over groups of each group's value at quantile `q`.
    fn target(&self, q: f64) -> f64 {
        let at = |s: &Vec<f64>| s[((q * s.len() as f64).floor() as usize).min(s.len() - 1)];
        // the median of two values is their mean
        (at(&self.sorted[0]) + at(&self.sorted[1])) / 2.0
    }

    fn repair(&self, g: usize, v: f64, lambda: f64) -> f64 {
        (1.0 - lambda) * v + lambda * self.target(self.quantile(g, v))
    }
}

/// Moves each numeric feature of both splits toward the per-rank median
/// of the training groups' distributions, by `level`. Maps are fitted on
/// `train`; test rows are repaired through the training quantiles of
/// their group. One-hot features are left alone.
pub fn disparate_impact_remover(train: &Dataset, test: &Dataset, level: RepairLevel) -> Result<(Dataset, Dataset)> {
    let [g0, g1] = train.group_indices();
    if g0.is_empty() || g1.is_empty() {
        return Err(Error::DegenerateGroup("disparate impact remover needs both groups in training data".into()));
    }
    if test.n_features() != train.n_features() {
        return Err(Error::Shape {
            expected: train.n_features(),
            got: test.n_features(),
        });
    }
    let lambda = level.lambda();
    let mut x_train = train.x().to_vec();
    let mut x_test = test.x().to_vec();
    let d = train.n_features();
    for c in train.numeric_columns() {
        let mut sorted = [
            g0.iter().map(|&i| train.value(i, c)).collect::<Vec<_>>(),
            g1.iter().map(|&i| train.value(i, c)).collect::<Vec<_>>(),
        ];
        for s in &mut sorted {
            s.sort_by(f64::total_cmp);
        }
        let repair = QuantileRepair { sorted };
        for (i, &g) in train.a().iter().enumerate() {
            x_train[i * d + c] = repair.repair(usize::from(g), train.value(i, c), lambda);
        }
        for (i, &g) in test.a().iter().enumerate() {
            x_test[i * d + c] = repair.repair(usize::from(g), test.value(i, c), lambda);
        }
    }
    Ok((train.with_features(x_train)?, test.with_features(x_test)?))
}
