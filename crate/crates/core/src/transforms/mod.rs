//! Fairness-aware data-preparation practices and pipelines of them.
//!
//! Every practice is fitted on the training split only. Scalers rewrite the
//! numeric feature columns of both splits with training statistics; the
//! resampling, clustering and matching practices change the rows of the
//! training split; weighting changes training weights. The test split's
//! rows, labels and groups never change.

mod cluster;
mod matching;
mod resample;
mod scale;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use cluster::kmeans;
pub use scale::AffineScaler;
pub(crate) use scale::squared_distance;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_K_CLUSTERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PracticeKind {
    StandardScale,
    MinMaxScale,
    ResampleOver,
    ResampleUnder,
    ResampleStratified,
    ClusterRebalance,
    IPWeight,
    Match,
}

impl PracticeKind {
    pub const ALL: [PracticeKind; 8] = [
        PracticeKind::StandardScale,
        PracticeKind::MinMaxScale,
        PracticeKind::ResampleOver,
        PracticeKind::ResampleUnder,
        PracticeKind::ResampleStratified,
        PracticeKind::ClusterRebalance,
        PracticeKind::IPWeight,
        PracticeKind::Match,
    ];

    /// Kinds that add, drop or duplicate training rows.
    pub fn alters_rows(self) -> bool {
        matches!(
            self,
            PracticeKind::ResampleOver
                | PracticeKind::ResampleUnder
                | PracticeKind::ResampleStratified
                | PracticeKind::ClusterRebalance
                | PracticeKind::Match
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            PracticeKind::StandardScale => "StandardScale",
            PracticeKind::MinMaxScale => "MinMaxScale",
            PracticeKind::ResampleOver => "ResampleOver",
            PracticeKind::ResampleUnder => "ResampleUnder",
            PracticeKind::ResampleStratified => "ResampleStratified",
            PracticeKind::ClusterRebalance => "ClusterRebalance",
            PracticeKind::IPWeight => "IPWeight",
            PracticeKind::Match => "Match",
        }
    }
}

impl fmt::Display for PracticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PracticeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<f64>,
}

/// One data-preparation step: a kind plus its parameters.
///
/// Serialized as `{"kind": ..., "params": {...}}`; a bare kind name such as
/// `"StandardScale"` is also accepted on input. `ClusterRebalance` always
/// carries `k_clusters` (default 5); `Match` may carry `max_distance`; other
/// kinds take no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPractice")]
pub struct Practice {
    pub kind: PracticeKind,
    pub params: PracticeParams,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPractice {
    Kind(PracticeKind),
    Full(FullPractice),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FullPractice {
    kind: PracticeKind,
    #[serde(default)]
    params: PracticeParams,
}

impl TryFrom<RawPractice> for Practice {
    type Error = Error;

    fn try_from(raw: RawPractice) -> Result<Self> {
        let (kind, params) = match raw {
            RawPractice::Kind(kind) => (kind, PracticeParams::default()),
            RawPractice::Full(f) => (f.kind, f.params),
        };
        let mut practice = Practice { kind, params };
        if practice.kind == PracticeKind::ClusterRebalance && practice.params.k_clusters.is_none() {
            practice.params.k_clusters = Some(DEFAULT_K_CLUSTERS);
        }
        practice.validate()?;
        Ok(practice)
    }
}

impl Practice {
    pub fn new(kind: PracticeKind) -> Self {
        let params = PracticeParams {
            k_clusters: (kind == PracticeKind::ClusterRebalance).then_some(DEFAULT_K_CLUSTERS),
            max_distance: None,
        };
        Self { kind, params }
    }

    pub fn cluster_rebalance(k_clusters: usize) -> Self {
        Self {
            kind: PracticeKind::ClusterRebalance,
            params: PracticeParams {
                k_clusters: Some(k_clusters),
                max_distance: None,
            },
        }
    }

    pub fn matching(max_distance: Option<f64>) -> Self {
        Self {
            kind: PracticeKind::Match,
            params: PracticeParams {
                k_clusters: None,
                max_distance,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        match self.kind {
            PracticeKind::ClusterRebalance => {
                if p.k_clusters.is_none_or(|k| k < 1) {
                    return Err(Error::InvalidConfig("ClusterRebalance needs k_clusters >= 1".into()));
                }
                if p.max_distance.is_some() {
                    return Err(Error::InvalidConfig("ClusterRebalance takes no max_distance".into()));
                }
            }
            PracticeKind::Match => {
                if p.max_distance.is_some_and(|d| !(d > 0.0)) {
                    return Err(Error::InvalidConfig("Match max_distance must be positive".into()));
                }
                if p.k_clusters.is_some() {
                    return Err(Error::InvalidConfig("Match takes no k_clusters".into()));
                }
            }
            kind => {
                if p != &PracticeParams::default() {
                    return Err(Error::InvalidConfig(format!("{kind} takes no parameters")));
                }
            }
        }
        Ok(())
    }
}

impl From<PracticeKind> for Practice {
    fn from(kind: PracticeKind) -> Self {
        Practice::new(kind)
    }
}

/// An ordered, nonempty sequence of practices with pairwise distinct kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Practice>", into = "Vec<Practice>")]
pub struct Pipeline {
    steps: Vec<Practice>,
}

impl Pipeline {
    pub fn new(steps: Vec<Practice>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidConfig("a pipeline needs at least one step".into()));
        }
        for (i, step) in steps.iter().enumerate() {
            step.validate()?;
            if steps[..i].iter().any(|s| s.kind == step.kind) {
                return Err(Error::InvalidConfig(format!("practice {} appears twice", step.kind)));
            }
        }
        Ok(Self { steps })
    }

    pub fn from_kinds(kinds: &[PracticeKind]) -> Result<Self> {
        Self::new(kinds.iter().copied().map(Practice::new).collect())
    }

    pub fn steps(&self) -> &[Practice] {
        &self.steps
    }

    pub fn kinds(&self) -> Vec<PracticeKind> {
        self.steps.iter().map(|s| s.kind).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn contains(&self, kind: PracticeKind) -> bool {
        self.steps.iter().any(|s| s.kind == kind)
    }

    /// Canonical JSON serialization; identifies the pipeline for memoization,
    /// tie-breaking and seed derivation.
    pub fn key(&self) -> String {
        serde_json::to_string(&self.steps).expect("practices serialize")
    }
}

impl TryFrom<Vec<Practice>> for Pipeline {
    type Error = Error;

    fn try_from(steps: Vec<Practice>) -> Result<Self> {
        Pipeline::new(steps)
    }
}

impl From<Pipeline> for Vec<Practice> {
    fn from(p: Pipeline) -> Self {
        p.steps
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" > ")?;
            }
            write!(f, "{}", step.kind)?;
        }
        Ok(())
    }
}

/// Parameters learned from a training split.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum FittedTransform {
    Scale(AffineScaler),
    /// Row-altering practices leave the test split untouched.
    Rows { practice: PracticeKind },
    Cluster { centroids: Vec<Vec<f64>> },
    /// Multiplicative weight factor per protected group.
    GroupWeights { factors: [f64; 2] },
    Match { pairs: Vec<(usize, usize)> },
}

impl FittedTransform {
    pub fn transform_test(&self, test: &Dataset) -> Result<Dataset> {
        match self {
            FittedTransform::Scale(scaler) => scaler.apply(test),
            _ => Ok(test.clone()),
        }
    }
}

/// Fits `practice` on `train`, returning the fitted parameters and the
/// prepared training split.
pub fn fit(practice: &Practice, train: &Dataset, seed: u64) -> Result<(FittedTransform, Dataset)> {
    practice.validate()?;
    if practice.kind.alters_rows() {
        require_all_cells(train)?;
    }
    let mut rng = seed::rng(seed);
    match practice.kind {
        PracticeKind::StandardScale => {
            let scaler = AffineScaler::standard(train);
            let out = scaler.apply(train)?;
            Ok((FittedTransform::Scale(scaler), out))
        }
        PracticeKind::MinMaxScale => {
            let scaler = AffineScaler::min_max(train);
            let out = scaler.apply(train)?;
            Ok((FittedTransform::Scale(scaler), out))
        }
        PracticeKind::ResampleOver => rows(practice.kind, resample::oversample(train, &mut rng)?),
        PracticeKind::ResampleUnder => rows(practice.kind, resample::undersample(train, &mut rng)?),
        PracticeKind::ResampleStratified => rows(practice.kind, resample::stratified_bootstrap(train, &mut rng)?),
        PracticeKind::ClusterRebalance => {
            let k = practice.params.k_clusters.unwrap_or(DEFAULT_K_CLUSTERS);
            let (centroids, out) = cluster::rebalance(train, k, &mut rng)?;
            Ok((FittedTransform::Cluster { centroids }, out))
        }
        PracticeKind::IPWeight => {
            let factors = group_weight_factors(train)?;
            let w = train
                .w()
                .iter()
                .zip(train.a())
                .map(|(&w, &a)| w * factors[a as usize])
                .collect();
            Ok((FittedTransform::GroupWeights { factors }, train.with_weights(w)?))
        }
        PracticeKind::Match => {
            let pairs = matching::greedy_pairs(train, practice.params.max_distance);
            if pairs.is_empty() {
                return Err(Error::DegenerateGroup("matching produced no pairs".into()));
            }
            let order: Vec<usize> = pairs.iter().flat_map(|&(s, t)| [s, t]).collect();
            let out = train.select_rows(&order)?;
            Ok((FittedTransform::Match { pairs }, out))
        }
    }
}

fn rows(practice: PracticeKind, out: Dataset) -> Result<(FittedTransform, Dataset)> {
    Ok((FittedTransform::Rows { practice }, out))
}

/// Applies one practice: fit on `train`, transform both splits.
pub fn fit_apply(practice: &Practice, train: &Dataset, test: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    if train.n_features() != test.n_features() {
        return Err(Error::Shape {
            expected: train.n_features(),
            got: test.n_features(),
        });
    }
    let (fitted, train_out) = fit(practice, train, seed)?;
    let test_out = fitted.transform_test(test)?;
    Ok((train_out, test_out))
}

/// Applies the steps left to right, each consuming the previous step's
/// output. Step `i` (0-based) draws its randomness from a seed derived from
/// `seed` and `i`.
pub fn apply_pipeline(pipeline: &Pipeline, train: &Dataset, test: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    apply_steps(pipeline.steps(), train, test, seed)
}

/// Like [`apply_pipeline`] but accepts any step list, including an empty one
/// (the no-preparation baseline).
pub fn apply_steps(steps: &[Practice], train: &Dataset, test: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut current = (train.clone(), test.clone());
    for (i, step) in steps.iter().enumerate() {
        let step_seed = seed::derive(seed, &[&"step", &i]);
        current = fit_apply(step, &current.0, &current.1, step_seed).map_err(|e| Error::Step {
            step: i + 1,
            source: Box::new(e),
        })?;
    }
    Ok(current)
}

fn require_all_cells(ds: &Dataset) -> Result<()> {
    let counts = ds.cell_counts();
    for (y, row) in counts.iter().enumerate() {
        for (a, &c) in row.iter().enumerate() {
            if c == 0 {
                return Err(Error::DegenerateGroup(format!("training cell (y={y}, a={a}) is empty")));
            }
        }
    }
    Ok(())
}

/// Factors `W / (2 W_a)` over weighted group masses. With unit weights this
/// is `n / (2 n_a)`; the total weight is preserved and both groups end up
/// with equal mass.
fn group_weight_factors(ds: &Dataset) -> Result<[f64; 2]> {
    let mut mass = [0.0f64; 2];
    for (&w, &a) in ds.w().iter().zip(ds.a()) {
        mass[a as usize] += w;
    }
    if mass.iter().any(|&m| m <= 0.0) {
        return Err(Error::DegenerateGroup("inverse probability weighting needs both groups".into()));
    }
    let total = mass[0] + mass[1];
    Ok([total / (2.0 * mass[0]), total / (2.0 * mass[1])])
}
