//! The evolutionary search over data-preparation pipelines.
//!
//! Each generation evaluates every individual by K-fold cross-validation,
//! keeps the best half as the mating pool, refills the population with
//! crossed-over and mutated offspring, and carries the best individual
//! over unchanged.

mod evaluate;
mod operators;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use evaluate::{cross_validate, cross_validate_timed, evaluate_fitness, fold_plan, Evaluator};
pub use operators::{crossover, crossover_at, initialize_population, mutate, select_mating_pool};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{EvalReport, FitnessWeights};
use crate::models::ClassifierSpec;
use crate::seed;
use crate::transforms::{Pipeline, Practice, PracticeKind};

/// Name of the unprepared reference evaluation in [`RunResult::baseline_reports`].
pub const NO_PREP: &str = "no_prep";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GAConfig {
    pub generations: usize,
    pub population: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub l_max: usize,
    pub fitness_weights: FitnessWeights,
    pub k_folds: usize,
    pub seed: u64,
    pub practice_catalog: Vec<Practice>,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            generations: 10,
            population: 5,
            crossover_rate: 0.25,
            mutation_rate: 0.25,
            l_max: 4,
            fitness_weights: FitnessWeights::default(),
            k_folds: 5,
            seed: 0,
            practice_catalog: PracticeKind::ALL.iter().copied().map(Practice::new).collect(),
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.generations < 1 {
            return bad("generations must be at least 1".into());
        }
        if self.population < 2 {
            return bad("population must be at least 2".into());
        }
        if self.l_max < 1 {
            return bad("l_max must be at least 1".into());
        }
        if self.k_folds < 2 {
            return bad("k_folds must be at least 2".into());
        }
        for (name, rate) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        if self.practice_catalog.is_empty() {
            return bad("practice catalog is empty".into());
        }
        for (i, p) in self.practice_catalog.iter().enumerate() {
            p.validate()?;
            if self.practice_catalog[..i].iter().any(|q| q.kind == p.kind) {
                return bad(format!("practice {} listed twice in the catalog", p.kind));
            }
        }
        self.fitness_weights.validate()
    }
}

/// A pipeline with its cached evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub pipeline: Pipeline,
    /// Negative infinity marks a disqualified individual.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "optional_fitness")]
    pub fitness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
}

impl Individual {
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            pipeline,
            fitness: None,
            report: None,
        }
    }

    pub fn with_report(pipeline: Pipeline, report: EvalReport) -> Self {
        Self {
            pipeline,
            fitness: Some(report.fitness),
            report: Some(report),
        }
    }

    fn fs(&self) -> f64 {
        self.report.as_ref().map_or(f64::NAN, |r| r.fs)
    }
}

/// Best first: higher fitness, then lower fairness score, then pipeline key.
/// Unevaluated individuals and NaN scores sort last.
pub fn rank_order(a: &Individual, b: &Individual) -> Ordering {
    let fit = |i: &Individual| i.fitness.unwrap_or(f64::NEG_INFINITY);
    let fs = |i: &Individual| {
        let v = i.fs();
        if v.is_nan() { f64::INFINITY } else { v }
    };
    fit(b)
        .total_cmp(&fit(a))
        .then(fs(a).total_cmp(&fs(b)))
        .then_with(|| a.pipeline.key().cmp(&b.pipeline.key()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    /// Mean over individuals that were not disqualified.
    pub mean_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: Individual,
    pub history: Vec<GenerationStats>,
    pub baseline_reports: Vec<(String, EvalReport)>,
    /// Distinct pipelines evaluated during the run.
    pub evaluations: usize,
    /// Not serialized, so that identical runs produce identical JSON.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunResult {
    pub fn baseline(&self, name: &str) -> Option<&EvalReport> {
        self.baseline_reports.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    /// Writes `generation,best_fitness,mean_fitness` rows.
    pub fn write_history_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for h in &self.history {
            w.serialize(h)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the search on `ds` with classifier `spec`.
///
/// Fitness evaluations run on the current rayon pool; the result does not
/// depend on its size.
pub fn run(cfg: &GAConfig, ds: &Dataset, spec: &ClassifierSpec) -> Result<RunResult> {
    cfg.validate()?;
    let plan = fold_plan(ds, cfg)?;
    let evaluator = Evaluator::new(ds, spec, plan, cfg.fitness_weights, cfg.seed)?;
    run_with(cfg, &evaluator)
}

/// Runs the search with a prepared evaluator, sharing its folds and memo.
/// Several runs may share one evaluator, concurrently or not, without
/// changing any run's result.
pub fn run_with(cfg: &GAConfig, evaluator: &Evaluator) -> Result<RunResult> {
    cfg.validate()?;
    if evaluator.weights() != cfg.fitness_weights {
        return Err(Error::InvalidConfig("evaluator and run use different fitness weights".into()));
    }
    let start = Instant::now();
    let mut rng = seed::rng(seed::derive(cfg.seed, &[&"ga"]));
    let mut population = initialize_population(cfg, &mut rng);
    let mut history = Vec::with_capacity(cfg.generations);
    let mut seen = BTreeSet::new();

    for generation in 0..cfg.generations {
        seen.extend(population.iter().map(|i| i.pipeline.key()));
        evaluate_population(evaluator, &mut population);
        if population.iter().all(|i| i.fitness == Some(f64::NEG_INFINITY)) {
            let why = population[0]
                .report
                .as_ref()
                .and_then(|r| r.error.clone())
                .unwrap_or_default();
            return Err(Error::AllDisqualified(format!("generation {}: {why}", generation + 1)));
        }
        population.sort_by(rank_order);
        let qualified: Vec<f64> = population
            .iter()
            .filter_map(|i| i.fitness)
            .filter(|f| f.is_finite())
            .collect();
        history.push(GenerationStats {
            generation: generation + 1,
            best_fitness: population[0].fitness.expect("evaluated"),
            mean_fitness: qualified.iter().sum::<f64>() / qualified.len() as f64,
        });
        if generation + 1 == cfg.generations {
            break;
        }
        population = next_generation(cfg, &population, &mut rng);
    }

    let best = population[0].clone();
    let no_prep = evaluator.evaluate_steps(&[]);
    Ok(RunResult {
        best,
        history,
        baseline_reports: vec![(NO_PREP.to_string(), no_prep)],
        evaluations: seen.len(),
        wall_time: start.elapsed(),
    })
}

fn evaluate_population(evaluator: &Evaluator, population: &mut [Individual]) {
    population.par_iter_mut().for_each(|ind| {
        let report = evaluator.evaluate(&ind.pipeline);
        ind.fitness = Some(report.fitness);
        ind.report = Some(report);
    });
}

/// `population` must be sorted best first.
fn next_generation(cfg: &GAConfig, population: &[Individual], rng: &mut seed::Rng) -> Vec<Individual> {
    let pool = select_mating_pool(population);
    let mut next = Vec::with_capacity(cfg.population);
    next.push(population[0].clone());
    let mut i = 0;
    while next.len() < cfg.population {
        let p1 = &pool[i % pool.len()].pipeline;
        let p2 = &pool[(i + 1) % pool.len()].pipeline;
        let (o1, o2) = crossover(p1, p2, cfg.crossover_rate, cfg.l_max, rng);
        for child in [o1, o2] {
            let child = mutate(&child, cfg.mutation_rate, &cfg.practice_catalog, rng);
            if next.len() < cfg.population {
                next.push(Individual::new(child));
            }
        }
        i += 1;
    }
    next
}

mod optional_fitness {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        // only reached for Some; non-finite values become null
        v.filter(|f| f.is_finite()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Some(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY)))
    }
}
