//! Result rows and the versioned CSV sink that writes them.
//!
//! Every row type starts with a `schema` column naming its layout. Appending
//! to an existing file checks both the header and that schema value, so
//! rows of different layouts never end up in one file.

use std::fs::{File, OpenOptions};
use std::marker::PhantomData;
use std::path::Path;

use anyhow::{bail, Context};
use fate::metrics::EvalReport;
use fate::transforms::Pipeline;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const FATE_ARM: &str = "fate";

/// A CSV row layout.
pub trait Row: Serialize + DeserializeOwned + Default {
    const SCHEMA: &'static str;

    /// Column names, in order.
    fn header() -> csv::StringRecord {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(Self::default()).expect("default row serializes");
        let bytes = w.into_inner().expect("in-memory writer");
        csv::Reader::from_reader(bytes.as_slice()).headers().expect("header row").clone()
    }
}

/// Appends rows of one layout to a CSV file.
pub struct CsvSink<R> {
    writer: csv::Writer<File>,
    _row: PhantomData<R>,
}

impl<R: Row> CsvSink<R> {
    /// Opens `path` for appending, writing the header if the file is new or
    /// empty. An existing file with another layout is an error.
    pub fn open(path: &Path) -> anyhow::Result<Self> {
        let header = R::header();
        let existing = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
        let writer = if existing {
            check_layout::<R>(path, &header)?;
            let file = OpenOptions::new().append(true).open(path)?;
            csv::WriterBuilder::new().has_headers(false).from_writer(file)
        } else {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
            w.write_record(&header)?;
            w
        };
        Ok(Self {
            writer,
            _row: PhantomData,
        })
    }

    pub fn write(&mut self, row: &R) -> anyhow::Result<()> {
        self.writer.serialize(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn check_layout<R: Row>(path: &Path, header: &csv::StringRecord) -> anyhow::Result<()> {
    let mut reader = csv::Reader::from_path(path)?;
    let found = reader.headers()?.clone();
    if &found != header {
        bail!("{}: existing header does not match layout {}", path.display(), R::SCHEMA);
    }
    if let Some(first) = reader.records().next() {
        let first = first?;
        if first.get(0) != Some(R::SCHEMA) {
            bail!(
                "{}: existing rows have layout {:?}, expected {}",
                path.display(),
                first.get(0).unwrap_or_default(),
                R::SCHEMA
            );
        }
    }
    Ok(())
}

/// Reads every row of a file written by [`CsvSink`].
pub fn read_rows<R: Row>(path: &Path) -> anyhow::Result<Vec<R>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if reader.headers()? != &R::header() {
        bail!("{}: header does not match layout {}", path.display(), R::SCHEMA);
    }
    let rows: Vec<R> = reader.deserialize().collect::<Result<_, _>>()?;
    if let Some(r) = rows.iter().position(|r| schema_of(r) != R::SCHEMA) {
        bail!("{}: row {} has another layout", path.display(), r + 1);
    }
    Ok(rows)
}

fn schema_of<R: Serialize>(row: &R) -> String {
    serde_json::to_value(row)
        .ok()
        .and_then(|v| v.get("schema").and_then(|s| s.as_str()).map(str::to_string))
        .unwrap_or_default()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// The nine reported metrics of a report, with non-finite values as `None`.
pub fn metric_values(report: &EvalReport) -> [Option<f64>; 9] {
    [
        report.precision,
        report.recall,
        report.pr_auc,
        report.spd,
        report.eod,
        report.di,
        report.ps,
        report.fs,
        report.fitness,
    ]
    .map(finite)
}

pub const METRIC_NAMES: [&str; 9] = ["precision", "recall", "pr_auc", "spd", "eod", "di", "ps", "fs", "fitness"];

/// One arm of one (dataset, model, repetition) cell of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    /// `fate`, a baseline name, or `no_prep`.
    pub arm: String,
    pub dataset: String,
    pub model: String,
    pub repetition: usize,
    pub seed: u64,
    pub config_hash: String,
    /// The pipeline the FATE arm selected.
    pub pipeline: Option<Pipeline>,
    /// Preparation plus training, summed over folds.
    pub execution_time_seconds: f64,
    /// Wall time of the search itself, FATE arm only.
    pub search_time_seconds: Option<f64>,
    pub report: EvalReport,
}

impl ComparisonRecord {
    pub fn completed(&self) -> bool {
        !self.report.is_disqualified()
    }

    pub fn to_row(&self) -> ComparisonRow {
        let [precision, recall, pr_auc, spd, eod, di, ps, fs, fitness] = metric_values(&self.report);
        ComparisonRow {
            schema: ComparisonRow::SCHEMA.into(),
            dataset: self.dataset.clone(),
            model: self.model.clone(),
            repetition: self.repetition,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            arm: self.arm.clone(),
            pipeline: self.pipeline.as_ref().map(Pipeline::key).unwrap_or_default(),
            execution_time_seconds: self.execution_time_seconds,
            search_time_seconds: self.search_time_seconds,
            precision,
            recall,
            pr_auc,
            spd,
            eod,
            di,
            ps,
            fs,
            fitness,
            fs_mode: self.report.weights.fs_mode.to_string(),
            w_perf: self.report.weights.w_perf,
            w_fair: self.report.weights.w_fair,
            error: self.report.error.clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub schema: String,
    pub dataset: String,
    pub model: String,
    pub repetition: usize,
    pub seed: u64,
    pub config_hash: String,
    pub arm: String,
    /// JSON step list; empty for baseline arms.
    pub pipeline: String,
    pub execution_time_seconds: f64,
    pub search_time_seconds: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub pr_auc: Option<f64>,
    pub spd: Option<f64>,
    pub eod: Option<f64>,
    pub di: Option<f64>,
    pub ps: Option<f64>,
    pub fs: Option<f64>,
    pub fitness: Option<f64>,
    pub fs_mode: String,
    pub w_perf: f64,
    pub w_fair: f64,
    pub error: String,
}

impl Row for ComparisonRow {
    const SCHEMA: &'static str = "comparison/1";
}

impl ComparisonRow {
    pub fn metrics(&self) -> [Option<f64>; 9] {
        [
            self.precision,
            self.recall,
            self.pr_auc,
            self.spd,
            self.eod,
            self.di,
            self.ps,
            self.fs,
            self.fitness,
        ]
    }
}

/// One cell of a parameter sweep: a FATE run at one grid point, or a
/// reference arm (`no_prep`, or a single practice named by its kind).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub schema: String,
    pub dataset: String,
    pub model: String,
    pub repetition: usize,
    pub seed: u64,
    pub config_hash: String,
    pub arm: String,
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
    pub pipeline: String,
    /// Distinct pipelines the search evaluated.
    pub evaluations: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub pr_auc: Option<f64>,
    pub spd: Option<f64>,
    pub eod: Option<f64>,
    pub di: Option<f64>,
    pub ps: Option<f64>,
    pub fs: Option<f64>,
    pub fitness: Option<f64>,
    /// Search time for FATE rows, preparation plus training otherwise.
    pub elapsed_seconds: f64,
    pub error: String,
}

impl Row for SweepRow {
    const SCHEMA: &'static str = "sweep/1";
}

impl SweepRow {
    pub fn set_report(&mut self, report: &EvalReport) {
        let [precision, recall, pr_auc, spd, eod, di, ps, fs, fitness] = metric_values(report);
        self.precision = precision;
        self.recall = recall;
        self.pr_auc = pr_auc;
        self.spd = spd;
        self.eod = eod;
        self.di = di;
        self.ps = ps;
        self.fs = fs;
        self.fitness = fitness;
        if let Some(e) = &report.error {
            self.error = e.clone();
        }
    }

    pub fn metrics(&self) -> [Option<f64>; 9] {
        [
            self.precision,
            self.recall,
            self.pr_auc,
            self.spd,
            self.eod,
            self.di,
            self.ps,
            self.fs,
            self.fitness,
        ]
    }
}

/// One hypothesis test: FATE against one baseline on one metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub schema: String,
    pub hypothesis: String,
    pub metric: String,
    pub arm_x: String,
    pub arm_y: String,
    pub n_x: usize,
    pub n_y: usize,
    pub u: Option<f64>,
    pub p: Option<f64>,
    pub a12: Option<f64>,
    pub magnitude: String,
    pub direction: String,
    pub method: String,
    pub reject: Option<bool>,
    pub error: String,
}

impl Row for StatsRow {
    const SCHEMA: &'static str = "stats/1";
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_start_with_schema() {
        for h in [ComparisonRow::header(), SweepRow::header(), StatsRow::header()] {
            assert_eq!(h.get(0), Some("schema"));
        }
        assert_eq!(ComparisonRow::header().len(), 23);
    }

    #[test]
    fn append_checks_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let row = StatsRow {
            schema: StatsRow::SCHEMA.into(),
            hypothesis: "H1a".into(),
            ..Default::default()
        };
        for _ in 0..2 {
            let mut sink = CsvSink::<StatsRow>::open(&path).unwrap();
            sink.write(&row).unwrap();
            sink.finish().unwrap();
        }
        assert_eq!(read_rows::<StatsRow>(&path).unwrap(), vec![row.clone(), row]);
        assert!(CsvSink::<SweepRow>::open(&path).is_err());

        std::fs::write(&path, std::fs::read_to_string(&path).unwrap().replace("stats/1", "stats/0")).unwrap();
        assert!(CsvSink::<StatsRow>::open(&path).is_err());
    }

    #[test]
    fn optional_floats_round_trip_exactly() {
        let row = ComparisonRow {
            schema: ComparisonRow::SCHEMA.into(),
            pipeline: r#"[{"kind":"StandardScale"}]"#.into(),
            fs: Some(0.1 + 0.2),
            spd: Some(-1.0 / 3.0),
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let mut sink = CsvSink::open(&path).unwrap();
        sink.write(&row).unwrap();
        sink.finish().unwrap();
        assert_eq!(read_rows::<ComparisonRow>(&path).unwrap(), vec![row]);
    }
}
