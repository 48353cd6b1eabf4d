use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::data::{stratified_kfold, Dataset, FoldPlan};
use crate::error::Result;
use crate::metrics::{EvalReport, FitnessWeights, FoldMetrics};
use crate::models::{self, ClassifierSpec, DEFAULT_THRESHOLD};
use crate::seed;
use crate::transforms::{apply_steps, Pipeline, Practice};

use super::GAConfig;

/// The fold plan a run with `cfg` uses on `ds`.
pub fn fold_plan(ds: &Dataset, cfg: &GAConfig) -> Result<FoldPlan> {
    stratified_kfold(ds, cfg.k_folds, seed::derive(cfg.seed, &[&"folds"]))
}

/// Cross-validates `spec` over `plan`, preparing each fold with `prepare`.
///
/// `prepare` receives the fold index and the raw train and test splits and
/// returns the prepared pair. The model for fold `f` is trained with seed
/// `derive(spec.seed, ["fold", f])`.
pub fn cross_validate<F>(ds: &Dataset, plan: &FoldPlan, spec: &ClassifierSpec, weights: FitnessWeights, prepare: F) -> Result<EvalReport>
where
    F: Fn(usize, &Dataset, &Dataset) -> Result<(Dataset, Dataset)>,
{
    cross_validate_timed(ds, plan, spec, weights, prepare).map(|(r, _)| r)
}

/// As [`cross_validate`], also returning the time spent in `prepare` and
/// in training, summed over folds.
pub fn cross_validate_timed<F>(
    ds: &Dataset,
    plan: &FoldPlan,
    spec: &ClassifierSpec,
    weights: FitnessWeights,
    prepare: F,
) -> Result<(EvalReport, Duration)>
where
    F: Fn(usize, &Dataset, &Dataset) -> Result<(Dataset, Dataset)>,
{
    let mut folds = Vec::with_capacity(plan.k);
    let mut spent = Duration::ZERO;
    for f in 0..plan.k {
        let (train_idx, test_idx) = plan.split(f);
        let train = ds.select_rows(&train_idx)?;
        let test = ds.select_rows(&test_idx)?;
        let started = Instant::now();
        let (train, test) = prepare(f, &train, &test)?;
        let fold_spec = ClassifierSpec {
            params: spec.params.clone(),
            seed: seed::derive(spec.seed, &[&"fold", &f]),
        };
        let model = models::train(&fold_spec, &train)?;
        spent += started.elapsed();
        let scores = model.predict_scores(&test)?;
        folds.push(FoldMetrics::compute(&scores, test.y(), test.a(), DEFAULT_THRESHOLD)?);
    }
    Ok((EvalReport::from_folds(folds, weights)?, spent))
}

/// Scores pipelines on fixed folds, remembering every result by pipeline key.
///
/// Preparation of fold `f` under a pipeline with key `k` is seeded with
/// `derive(seed, ["prep", k, f])`, so a pipeline's report does not depend
/// on when or where it is evaluated.
pub struct Evaluator<'a> {
    ds: &'a Dataset,
    spec: ClassifierSpec,
    plan: FoldPlan,
    weights: FitnessWeights,
    seed: u64,
    memo: Mutex<HashMap<String, EvalReport>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(ds: &'a Dataset, spec: &ClassifierSpec, plan: FoldPlan, weights: FitnessWeights, seed: u64) -> Result<Self> {
        spec.validate()?;
        weights.validate()?;
        if plan.assignments.len() != ds.n_rows() {
            return Err(crate::Error::InvalidConfig(format!(
                "fold plan covers {} rows, dataset has {}",
                plan.assignments.len(),
                ds.n_rows()
            )));
        }
        Ok(Self {
            ds,
            spec: spec.clone(),
            plan,
            weights,
            seed,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn plan(&self) -> &FoldPlan {
        &self.plan
    }

    pub fn weights(&self) -> FitnessWeights {
        self.weights
    }

    pub fn memo_len(&self) -> usize {
        self.memo.lock().unwrap().len()
    }

    pub fn is_memoized(&self, pipeline: &Pipeline) -> bool {
        self.memo.lock().unwrap().contains_key(&pipeline.key())
    }

    /// Memoized report of `pipeline`. A failure on any fold disqualifies it.
    pub fn evaluate(&self, pipeline: &Pipeline) -> EvalReport {
        let key = pipeline.key();
        if let Some(r) = self.memo.lock().unwrap().get(&key) {
            return r.clone();
        }
        let report = self.evaluate_steps_keyed(pipeline.steps(), &key);
        self.memo.lock().unwrap().entry(key).or_insert(report).clone()
    }

    /// Report of an arbitrary step list (possibly empty), without memoizing.
    pub fn evaluate_steps(&self, steps: &[Practice]) -> EvalReport {
        let key = serde_json::to_string(steps).expect("practices serialize");
        self.evaluate_steps_keyed(steps, &key)
    }

    /// As [`Evaluator::evaluate_steps`], with the preparation and training time.
    pub fn evaluate_steps_timed(&self, steps: &[Practice]) -> (EvalReport, Duration) {
        let key = serde_json::to_string(steps).expect("practices serialize");
        self.run_folds(steps, &key)
    }

    fn evaluate_steps_keyed(&self, steps: &[Practice], key: &str) -> EvalReport {
        self.run_folds(steps, key).0
    }

    fn run_folds(&self, steps: &[Practice], key: &str) -> (EvalReport, Duration) {
        let outcome = cross_validate_timed(self.ds, &self.plan, &self.spec, self.weights, |f, train, test| {
            apply_steps(steps, train, test, seed::derive(self.seed, &[&"prep", &key, &f]))
        });
        outcome.unwrap_or_else(|e| (EvalReport::disqualified(e.to_string(), self.weights), Duration::ZERO))
    }
}

/// Evaluates one pipeline on the folds `cfg` prescribes for `ds`.
pub fn evaluate_fitness(pipeline: &Pipeline, ds: &Dataset, spec: &ClassifierSpec, cfg: &GAConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let evaluator = Evaluator::new(ds, spec, fold_plan(ds, cfg)?, cfg.fitness_weights, cfg.seed)?;
    Ok(evaluator.evaluate(pipeline))
}
