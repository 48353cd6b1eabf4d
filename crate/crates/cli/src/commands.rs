//! The subcommands, as library functions.
//!
//! Work is split into (dataset, model, repetition) cells. Repetition `r`
//! uses seed `seed + r` for its folds, its search and its preparation
//! steps, and every arm of a cell shares one fold plan. Cells run on the
//! current rayon pool; rows are gathered in cell order and written by the
//! calling thread once all cells are done.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use fate::baselines::{self, Baseline};
use fate::data::Dataset;
use fate::ga::{self, cross_validate_timed, fold_plan, Evaluator, GAConfig, GenerationStats, RunResult, NO_PREP};
use fate::metrics::{EvalReport, FitnessWeights, FoldMetrics};
use fate::models::ClassifierSpec;
use fate::seed;
use fate::stats::{self, ALPHA};
use fate::transforms::{Pipeline, Practice};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Experiment, ModelEntry};
use crate::records::{metric_values, ComparisonRecord, ComparisonRow, CsvSink, Row, StatsRow, SweepRow, FATE_ARM, METRIC_NAMES};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// The classifier of `entry` as trained in the repetition seeded `seed`.
pub fn model_spec(entry: &ModelEntry, seed: u64) -> ClassifierSpec {
    entry.spec.clone().with_seed(seed::derive(entry.spec.seed, &[&"repetition", &seed]))
}

/// The search settings of the repetition seeded `seed`.
pub fn cell_config(exp: &Experiment, seed: u64) -> GAConfig {
    GAConfig {
        seed,
        ..exp.config.ga.clone()
    }
}

/// Seed of fold `fold` of a baseline arm.
pub fn baseline_seed(seed: u64, baseline: Baseline, fold: usize) -> u64 {
    seed::derive(seed, &[&"baseline", &baseline.name(), &fold])
}

#[derive(Debug, Clone, Copy)]
struct Cell<'a> {
    dataset: &'a str,
    ds: &'a Dataset,
    model: &'a ModelEntry,
    repetition: usize,
    seed: u64,
}

impl<'a> Cell<'a> {
    fn evaluator(&self, cfg: &GAConfig) -> fate::Result<Evaluator<'a>> {
        let plan = fold_plan(self.ds, cfg)?;
        Evaluator::new(self.ds, &model_spec(self.model, self.seed), plan, cfg.fitness_weights, self.seed)
    }
}

fn cells(exp: &Experiment) -> Vec<Cell<'_>> {
    let mut out = Vec::new();
    for (name, ds) in &exp.datasets {
        for model in &exp.config.classifiers {
            for r in 0..exp.config.repetitions {
                out.push(Cell {
                    dataset: name,
                    ds,
                    model,
                    repetition: r,
                    seed: exp.repetition_seed(r),
                });
            }
        }
    }
    out
}

fn pick_cell<'a>(exp: &'a Experiment, dataset: Option<&str>, model: Option<&str>) -> anyhow::Result<Cell<'a>> {
    let (name, ds) = match dataset {
        None => &exp.datasets[0],
        Some(d) => exp
            .datasets
            .iter()
            .find(|(n, _)| n == d)
            .ok_or_else(|| invalid(format!("no dataset named `{d}`")))?,
    };
    let model = match model {
        None => &exp.config.classifiers[0],
        Some(m) => exp.model(m).ok_or_else(|| invalid(format!("no classifier named `{m}`")))?,
    };
    Ok(Cell {
        dataset: name,
        ds,
        model,
        repetition: 0,
        seed: exp.repetition_seed(0),
    })
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// What `optimize` writes to report.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub pipeline: Pipeline,
    pub report: EvalReport,
    pub history: Vec<GenerationStats>,
    pub baseline_reports: Vec<(String, EvalReport)>,
    pub evaluations: usize,
}

/// Runs one search and writes best_pipeline.json, report.json,
/// history.csv and run.log. Defaults to the first dataset and classifier.
pub fn cmd_optimize(exp: &Experiment, dataset: Option<&str>, model: Option<&str>) -> anyhow::Result<RunResult> {
    let cell = pick_cell(exp, dataset, model)?;
    let cfg = cell_config(exp, cell.seed);
    let evaluator = cell.evaluator(&cfg)?;
    let result = ga::run_with(&cfg, &evaluator)?;

    let report = OptimizeReport {
        dataset: cell.dataset.to_string(),
        model: cell.model.label(),
        seed: cell.seed,
        config_hash: exp.config_hash.clone(),
        pipeline: result.best.pipeline.clone(),
        report: result.best.report.clone().expect("best is evaluated"),
        history: result.history.clone(),
        baseline_reports: result.baseline_reports.clone(),
        evaluations: result.evaluations,
    };
    let mut log = String::new();
    writeln!(log, "optimize dataset={} model={} seed={} config={}", report.dataset, report.model, cell.seed, exp.config_hash)?;
    for h in &result.history {
        writeln!(log, "generation {} best={} mean={}", h.generation, h.best_fitness, h.mean_fitness)?;
    }
    writeln!(log, "best {}", report.pipeline.key())?;
    writeln!(log, "evaluations {}", result.evaluations)?;
    writeln!(log, "wall time {:.3}s", result.wall_time.as_secs_f64())?;

    let dir = &exp.output_dir;
    create_dir(dir)?;
    write_json(&dir.join("best_pipeline.json"), &report.pipeline)?;
    write_json(&dir.join("report.json"), &report)?;
    result.write_history_csv(fs::File::create(dir.join("history.csv"))?)?;
    fs::write(dir.join("run.log"), log)?;
    Ok(result)
}

fn sweep_row(cell: &Cell, exp: &Experiment, arm: &str) -> SweepRow {
    SweepRow {
        schema: SweepRow::SCHEMA.into(),
        dataset: cell.dataset.to_string(),
        model: cell.model.label(),
        repetition: cell.repetition,
        seed: cell.seed,
        config_hash: exp.config_hash.clone(),
        arm: arm.to_string(),
        ..Default::default()
    }
}

fn sweep_cell(exp: &Experiment, cell: &Cell) -> Vec<SweepRow> {
    let points = exp.config.sweep.points();
    let evaluator = match cell.evaluator(&cell_config(exp, cell.seed)) {
        Ok(e) => e,
        Err(e) => {
            let mut row = sweep_row(cell, exp, FATE_ARM);
            row.error = e.to_string();
            return vec![row];
        }
    };
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(n, g, c, m)| {
            let mut row = sweep_row(cell, exp, FATE_ARM);
            row.population = Some(n);
            row.generations = Some(g);
            row.crossover_rate = Some(c);
            row.mutation_rate = Some(m);
            match ga::run_with(&exp.config.ga_at(n, g, c, m, cell.seed), &evaluator) {
                Ok(result) => {
                    row.pipeline = result.best.pipeline.key();
                    row.evaluations = Some(result.evaluations);
                    row.elapsed_seconds = result.wall_time.as_secs_f64();
                    row.set_report(result.best.report.as_ref().expect("best is evaluated"));
                }
                Err(e) => row.error = e.to_string(),
            }
            row
        })
        .collect();

    let mut references: Vec<(String, Vec<Practice>)> = vec![(NO_PREP.to_string(), Vec::new())];
    references.extend(exp.config.ga.practice_catalog.iter().map(|p| (p.kind.name().to_string(), vec![p.clone()])));
    rows.extend(references.par_iter().map(|(arm, steps)| {
        let mut row = sweep_row(cell, exp, arm);
        let (report, spent) = evaluator.evaluate_steps_timed(steps);
        row.pipeline = serde_json::to_string(steps).expect("practices serialize");
        row.elapsed_seconds = spent.as_secs_f64();
        row.set_report(&report);
        row
    }).collect::<Vec<_>>());
    rows
}

/// Runs every sweep grid point on every cell, plus the no-prep and
/// single-practice reference arms, and appends the rows to results.csv.
pub fn cmd_sweep(exp: &Experiment) -> anyhow::Result<Vec<SweepRow>> {
    exp.config.validate_sweep()?;
    let started = Instant::now();
    let rows: Vec<SweepRow> = cells(exp).par_iter().flat_map_iter(|cell| sweep_cell(exp, cell)).collect();

    let dir = &exp.output_dir;
    create_dir(dir)?;
    let mut sink = CsvSink::open(&dir.join("results.csv"))?;
    for row in &rows {
        sink.write(row)?;
    }
    sink.finish()?;
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    fs::write(
        dir.join("run.log"),
        format!(
            "sweep config={} rows={} failed={} wall time {:.3}s\n",
            exp.config_hash,
            rows.len(),
            failed,
            started.elapsed().as_secs_f64()
        ),
    )?;
    Ok(rows)
}

fn record(cell: &Cell, exp: &Experiment, arm: &str, report: EvalReport, spent: Duration) -> ComparisonRecord {
    ComparisonRecord {
        arm: arm.to_string(),
        dataset: cell.dataset.to_string(),
        model: cell.model.label(),
        repetition: cell.repetition,
        seed: cell.seed,
        config_hash: exp.config_hash.clone(),
        pipeline: None,
        execution_time_seconds: spent.as_secs_f64(),
        search_time_seconds: None,
        report,
    }
}

fn baseline_arm(exp: &Experiment, cell: &Cell, evaluator: &Evaluator, baseline: Baseline) -> (EvalReport, Duration) {
    let spec = model_spec(cell.model, cell.seed);
    let weights = evaluator.weights();
    let params = exp.config.baseline_params;
    cross_validate_timed(cell.ds, evaluator.plan(), &spec, weights, |f, train, test| {
        baselines::apply(baseline, &params, train, test, baseline_seed(cell.seed, baseline, f))
    })
    .unwrap_or_else(|e| (EvalReport::disqualified(e.to_string(), weights), Duration::ZERO))
}

fn compare_cell(exp: &Experiment, cell: &Cell, arms: &[Baseline]) -> Vec<ComparisonRecord> {
    let cfg = cell_config(exp, cell.seed);
    let evaluator = match cell.evaluator(&cfg) {
        Ok(e) => e,
        Err(e) => {
            let names = std::iter::once(FATE_ARM).chain(arms.iter().map(|b| b.name()));
            return names
                .map(|arm| record(cell, exp, arm, EvalReport::disqualified(e.to_string(), cfg.fitness_weights), Duration::ZERO))
                .collect();
        }
    };
    let mut out = Vec::with_capacity(arms.len() + 1);
    out.push(match ga::run_with(&cfg, &evaluator) {
        Ok(result) => {
            // the search's own cost is kept apart from preparing and training
            let (report, spent) = evaluator.evaluate_steps_timed(result.best.pipeline.steps());
            let mut r = record(cell, exp, FATE_ARM, report, spent);
            r.pipeline = Some(result.best.pipeline);
            r.search_time_seconds = Some(result.wall_time.as_secs_f64());
            r
        }
        Err(e) => record(cell, exp, FATE_ARM, EvalReport::disqualified(e.to_string(), cfg.fitness_weights), Duration::ZERO),
    });
    for &b in arms {
        let (report, spent) = baseline_arm(exp, cell, &evaluator, b);
        out.push(record(cell, exp, b.name(), report, spent));
    }
    out
}

/// Summary written to stats.json next to stats.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub schema: String,
    pub alpha: f64,
    /// Number of hypotheses tested; no multiple-comparison correction is applied.
    pub hypotheses: usize,
    pub correction: String,
    pub sample_unit: String,
    pub rows: Vec<StatsRow>,
}

/// Metrics compared between arms, with their hypothesis family.
pub const TESTED_METRICS: [(&str, &str); 3] = [("H1", "fs"), ("H2", "ps"), ("H3", "execution_time_seconds")];

fn observed(r: &ComparisonRecord, metric: &str) -> f64 {
    match metric {
        "fs" => r.report.fs,
        "ps" => r.report.ps,
        _ => r.execution_time_seconds,
    }
}

/// FATE against each baseline on each tested metric. Each completed
/// record contributes one observation; failed records are left out.
pub fn hypothesis_tests(records: &[ComparisonRecord], arms: &[Baseline]) -> Vec<StatsRow> {
    let sample = |arm: &str, metric: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.arm == arm && r.completed())
            .map(|r| observed(r, metric))
            .collect()
    };
    let mut rows = Vec::new();
    for (family, metric) in TESTED_METRICS {
        let x = sample(FATE_ARM, metric);
        for &b in arms {
            let letter = (b'a' + Baseline::ALL.iter().position(|&a| a == b).expect("known baseline") as u8) as char;
            let y = sample(b.name(), metric);
            let mut row = StatsRow {
                schema: StatsRow::SCHEMA.into(),
                hypothesis: format!("{family}{letter}"),
                metric: metric.to_string(),
                arm_x: FATE_ARM.into(),
                arm_y: b.name().into(),
                n_x: x.len(),
                n_y: y.len(),
                ..Default::default()
            };
            match stats::wilcoxon_rank_sum(&x, &y) {
                Ok(t) => {
                    row.u = Some(t.u_statistic);
                    row.p = Some(t.p_value);
                    row.a12 = Some(t.a12);
                    row.magnitude = label(&t.magnitude);
                    row.direction = label(&t.direction);
                    row.method = label(&t.method);
                    row.reject = Some(t.rejects_null());
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
    }
    rows
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

pub struct CompareOutput {
    pub records: Vec<ComparisonRecord>,
    pub stats: Vec<StatsRow>,
}

/// Runs FATE and each baseline on every cell and tests FATE against each
/// baseline. `arms` overrides the configured baselines when nonempty.
///
/// Appends to comparison.csv and stats.csv and writes stats.json and
/// run.log.
pub fn cmd_compare(exp: &Experiment, arms: &[Baseline]) -> anyhow::Result<CompareOutput> {
    let mut chosen: Vec<Baseline> = if arms.is_empty() { exp.config.baselines.clone() } else { arms.to_vec() };
    let mut seen = Vec::new();
    chosen.retain(|b| {
        let fresh = !seen.contains(b);
        seen.push(*b);
        fresh
    });
    if chosen.is_empty() {
        return Err(invalid("compare needs at least one baseline"));
    }
    let started = Instant::now();
    let records: Vec<ComparisonRecord> = cells(exp).par_iter().flat_map_iter(|cell| compare_cell(exp, cell, &chosen)).collect();
    let stats_rows = hypothesis_tests(&records, &chosen);

    let dir = &exp.output_dir;
    create_dir(dir)?;
    let mut sink = CsvSink::open(&dir.join("comparison.csv"))?;
    for r in &records {
        sink.write(&r.to_row())?;
    }
    sink.finish()?;
    let mut sink = CsvSink::open(&dir.join("stats.csv"))?;
    for r in &stats_rows {
        sink.write(r)?;
    }
    sink.finish()?;
    write_json(
        &dir.join("stats.json"),
        &StatsReport {
            schema: StatsRow::SCHEMA.into(),
            alpha: ALPHA,
            hypotheses: stats_rows.len(),
            correction: "none".into(),
            sample_unit: "one observation per (dataset, model, repetition) cell".into(),
            rows: stats_rows.clone(),
        },
    )?;
    let failed = records.iter().filter(|r| !r.completed()).count();
    fs::write(
        dir.join("run.log"),
        format!(
            "compare config={} records={} failed={} hypotheses={} wall time {:.3}s\n",
            exp.config_hash,
            records.len(),
            failed,
            stats_rows.len(),
            started.elapsed().as_secs_f64()
        ),
    )?;
    Ok(CompareOutput {
        records,
        stats: stats_rows,
    })
}

/// What `baseline` writes to baseline_report.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub baseline: Baseline,
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub execution_time_seconds: f64,
    pub report: EvalReport,
}

/// Cross-validates one baseline on the folds a search with the same seed
/// would use.
pub fn cmd_baseline(exp: &Experiment, baseline: Baseline, dataset: Option<&str>, model: Option<&str>) -> anyhow::Result<BaselineReport> {
    let cell = pick_cell(exp, dataset, model)?;
    let evaluator = cell.evaluator(&cell_config(exp, cell.seed))?;
    let (report, spent) = baseline_arm(exp, &cell, &evaluator, baseline);
    if let Some(e) = &report.error {
        bail!("{baseline}: {e}");
    }
    let out = BaselineReport {
        baseline,
        dataset: cell.dataset.to_string(),
        model: cell.model.label(),
        seed: cell.seed,
        config_hash: exp.config_hash.clone(),
        execution_time_seconds: spent.as_secs_f64(),
        report,
    };
    create_dir(&exp.output_dir)?;
    write_json(&exp.output_dir.join("baseline_report.json"), &out)?;
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct Prediction {
    score: f64,
    label: u8,
    protected: u8,
}

/// Scores a predictions CSV with columns `score`, `label`, `protected`.
pub fn cmd_metrics(predictions: &Path, threshold: f64, weights: FitnessWeights) -> anyhow::Result<EvalReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    weights.validate().map_err(|e| invalid(crate::config::message(&e)))?;
    if !predictions.is_file() {
        return Err(invalid(format!("no predictions file at {}", predictions.display())));
    }
    let mut reader = csv::Reader::from_path(predictions)?;
    let (mut scores, mut labels, mut groups) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in reader.deserialize::<Prediction>().enumerate() {
        let p = row.with_context(|| format!("{} record {}", predictions.display(), i + 1))?;
        if p.label > 1 || p.protected > 1 || !p.score.is_finite() {
            bail!("{} record {}: label and protected must be 0 or 1 and score finite", predictions.display(), i + 1);
        }
        scores.push(p.score);
        labels.push(p.label);
        groups.push(p.protected);
    }
    let fold = FoldMetrics::compute(&scores, &labels, &groups, threshold)?;
    Ok(EvalReport::from_folds(vec![fold], weights)?)
}

fn same_metrics(recorded: [Option<f64>; 9], replayed: &EvalReport) -> anyhow::Result<()> {
    let again = metric_values(replayed);
    for (i, (a, b)) in recorded.iter().zip(again).enumerate() {
        if a.map(f64::to_bits) != b.map(f64::to_bits) {
            bail!("{} differs on replay: recorded {a:?}, replayed {b:?}", METRIC_NAMES[i]);
        }
    }
    Ok(())
}

fn replay_cell<'a>(exp: &'a Experiment, dataset: &str, model: &str, repetition: usize, seed: u64, hash: &str) -> anyhow::Result<Cell<'a>> {
    if hash != exp.config_hash {
        bail!("row was produced by config {hash}, this config is {}", exp.config_hash);
    }
    let cell = pick_cell(exp, Some(dataset), Some(model))?;
    Ok(Cell { repetition, seed, ..cell })
}

fn parse_steps(json: &str) -> anyhow::Result<Vec<Practice>> {
    serde_json::from_str(json).map_err(|e| anyhow!("unreadable pipeline {json:?}: {e}"))
}

/// Recomputes one comparison row from its seed, repeating the search for
/// the FATE arm, and checks every metric is bit-for-bit the same.
pub fn replay_comparison(exp: &Experiment, row: &ComparisonRow) -> anyhow::Result<()> {
    let cell = replay_cell(exp, &row.dataset, &row.model, row.repetition, row.seed, &row.config_hash)?;
    let cfg = cell_config(exp, cell.seed);
    let evaluator = cell.evaluator(&cfg)?;
    let report = if row.arm == FATE_ARM {
        let result = ga::run_with(&cfg, &evaluator)?;
        if result.best.pipeline.key() != row.pipeline {
            bail!("search selected {} on replay, row has {}", result.best.pipeline.key(), row.pipeline);
        }
        evaluator.evaluate_steps(result.best.pipeline.steps())
    } else if row.arm == NO_PREP {
        evaluator.evaluate_steps(&[])
    } else {
        let baseline: Baseline = row.arm.parse()?;
        baseline_arm(exp, &cell, &evaluator, baseline).0
    };
    same_metrics(row.metrics(), &report)
}

/// As [`replay_comparison`], for a sweep row.
pub fn replay_sweep(exp: &Experiment, row: &SweepRow) -> anyhow::Result<()> {
    let cell = replay_cell(exp, &row.dataset, &row.model, row.repetition, row.seed, &row.config_hash)?;
    let evaluator = cell.evaluator(&cell_config(exp, cell.seed))?;
    let report = if row.arm == FATE_ARM {
        let (Some(n), Some(g), Some(c), Some(m)) = (row.population, row.generations, row.crossover_rate, row.mutation_rate) else {
            bail!("FATE row without a grid point");
        };
        let result = ga::run_with(&exp.config.ga_at(n, g, c, m, cell.seed), &evaluator)?;
        if result.best.pipeline.key() != row.pipeline {
            bail!("search selected {} on replay, row has {}", result.best.pipeline.key(), row.pipeline);
        }
        result.best.report.expect("best is evaluated")
    } else {
        evaluator.evaluate_steps(&parse_steps(&row.pipeline)?)
    };
    same_metrics(row.metrics(), &report)
}
