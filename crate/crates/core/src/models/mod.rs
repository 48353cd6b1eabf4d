//! Binary classifiers that honor instance weights and emit scores in [0, 1].

mod boosting;
mod forest;
pub mod linear;
mod tree;

use serde::{Deserialize, Serialize};

pub use boosting::{Boosted, BoostingParams};
pub use forest::{Forest, ForestParams};
pub use linear::{LinearModel, LinearParams};
pub use tree::Node;

use crate::data::Dataset;
use crate::error::{Error, Result};
use linear::{sigmoid, LinearLoss};

/// Threshold applied to scores wherever hard labels are needed.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Deserializes from `{"family": ..., "hyperparams": {...}}`; omitted
/// hyperparameters take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "hyperparams", try_from = "RawModelParams")]
pub enum ModelParams {
    LogisticRegression(LinearParams),
    #[serde(rename = "LinearSVC")]
    LinearSvc(LinearParams),
    RandomForest(ForestParams),
    GradientBoosting(BoostingParams),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelParams {
    family: String,
    #[serde(default)]
    hyperparams: Option<serde_json::Value>,
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = String;

    fn try_from(raw: RawModelParams) -> std::result::Result<Self, String> {
        fn params<T: serde::de::DeserializeOwned + Default>(v: Option<serde_json::Value>) -> std::result::Result<T, String> {
            v.map_or_else(|| Ok(T::default()), |v| serde_json::from_value(v).map_err(|e| e.to_string()))
        }
        Ok(match raw.family.as_str() {
            "LogisticRegression" => ModelParams::LogisticRegression(params(raw.hyperparams)?),
            "LinearSVC" => ModelParams::LinearSvc(params(raw.hyperparams)?),
            "RandomForest" => ModelParams::RandomForest(params(raw.hyperparams)?),
            "GradientBoosting" => ModelParams::GradientBoosting(params(raw.hyperparams)?),
            other => return Err(format!("unknown model family `{other}`")),
        })
    }
}

impl ModelParams {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelParams::LogisticRegression(_) => "LogisticRegression",
            ModelParams::LinearSvc(_) => "LinearSVC",
            ModelParams::RandomForest(_) => "RandomForest",
            ModelParams::GradientBoosting(_) => "GradientBoosting",
        }
    }
}

/// A model family with its hyperparameters and training seed.
///
/// JSON form: `{"family": "LogisticRegression", "hyperparams": {...}, "seed": 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub params: ModelParams,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn logistic_regression() -> Self {
        Self {
            params: ModelParams::LogisticRegression(LinearParams::default()),
            seed: 0,
        }
    }

    pub fn linear_svc() -> Self {
        Self {
            params: ModelParams::LinearSvc(LinearParams::default()),
            seed: 0,
        }
    }

    pub fn random_forest() -> Self {
        Self {
            params: ModelParams::RandomForest(ForestParams::default()),
            seed: 0,
        }
    }

    pub fn gradient_boosting() -> Self {
        Self {
            params: ModelParams::GradientBoosting(BoostingParams::default()),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn family_name(&self) -> &'static str {
        self.params.family_name()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{}: {msg}", self.family_name())));
        match &self.params {
            ModelParams::LogisticRegression(p) | ModelParams::LinearSvc(p) => {
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                    return bad("learning_rate must be positive");
                }
                if !(p.l2 >= 0.0 && p.l2.is_finite()) {
                    return bad("l2 must be non-negative");
                }
            }
            ModelParams::RandomForest(p) => {
                if p.trees == 0 {
                    return bad("trees must be at least 1");
                }
                if p.feature_fraction.is_some_and(|f| !(f > 0.0 && f <= 1.0)) {
                    return bad("feature_fraction must lie in (0, 1]");
                }
            }
            ModelParams::GradientBoosting(p) => {
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                    return bad("learning_rate must be positive");
                }
                if !(p.l2 >= 0.0 && p.l2.is_finite()) {
                    return bad("l2 must be non-negative");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum TrainedModel {
    LogisticRegression(LinearModel),
    #[serde(rename = "LinearSVC")]
    LinearSvc(LinearModel),
    RandomForest(Forest),
    GradientBoosting(Boosted),
}

/// Trains `spec` on `ds`. Both labels must be present and every feature
/// value finite.
pub fn train(spec: &ClassifierSpec, ds: &Dataset) -> Result<TrainedModel> {
    spec.validate()?;
    if ds.n_features() == 0 {
        return Err(Error::InvalidConfig("training data has no features".into()));
    }
    let counts = ds.cell_counts();
    if counts[0][0] + counts[0][1] == 0 || counts[1][0] + counts[1][1] == 0 {
        return Err(Error::SingleClass);
    }
    if let Some(pos) = ds.x().iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "feature `{}` of row {} is {}",
            ds.feature_names()[pos % ds.n_features()],
            pos / ds.n_features(),
            ds.x()[pos]
        )));
    }
    Ok(match &spec.params {
        ModelParams::LogisticRegression(p) => TrainedModel::LogisticRegression(linear::fit(LinearLoss::Logistic, p, ds)),
        ModelParams::LinearSvc(p) => TrainedModel::LinearSvc(linear::fit(LinearLoss::Hinge, p, ds)),
        ModelParams::RandomForest(p) => TrainedModel::RandomForest(forest::fit(p, ds, spec.seed)?),
        ModelParams::GradientBoosting(p) => TrainedModel::GradientBoosting(boosting::fit(p, ds, spec.seed)),
    })
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::LogisticRegression(m) | TrainedModel::LinearSvc(m) => m.weights.len(),
            TrainedModel::RandomForest(f) => f.n_features,
            TrainedModel::GradientBoosting(b) => b.n_features,
        }
    }

    fn score_row(&self, x: &[f64]) -> f64 {
        match self {
            TrainedModel::LogisticRegression(m) | TrainedModel::LinearSvc(m) => sigmoid(m.margin(x)),
            TrainedModel::RandomForest(f) => f.score(x),
            TrainedModel::GradientBoosting(b) => sigmoid(b.margin(x)),
        }
    }

    /// Ranking scores in [0, 1]: sigmoid probabilities for logistic
    /// regression and boosting, sigmoid of the margin for the SVC, mean
    /// leaf positive fraction for the forest.
    pub fn predict_scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.n_features() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                got: ds.n_features(),
            });
        }
        Ok(ds.rows().map(|x| self.score_row(x)).collect())
    }

    /// `1` where the score is at least `threshold`.
    pub fn predict_labels(&self, ds: &Dataset, threshold: f64) -> Result<Vec<u8>> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {threshold} outside (0, 1)")));
        }
        Ok(threshold_scores(&self.predict_scores(ds)?, threshold))
    }
}

pub fn threshold_scores(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}
