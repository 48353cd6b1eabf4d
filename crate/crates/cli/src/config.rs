//! Experiment configuration files.
//!
//! A config is one JSON document. Relative paths inside it (datasets,
//! schemas, the output directory) are resolved against the directory
//! holding the config file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use fate::baselines::{Baseline, BaselineParams};
use fate::data::{load_csv, synthetic_biased, Dataset, DatasetSchema};
use fate::ga::GAConfig;
use fate::metrics::FsMode;
use fate::models::ClassifierSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// An invalid or unloadable configuration; the binary exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// The message of a core error, without the prefix `ConfigError` adds again.
pub(crate) fn message(e: &fate::Error) -> String {
    match e {
        fate::Error::InvalidConfig(m) => m.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaRef {
    Path(PathBuf),
    Inline(DatasetSchema),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub n: usize,
    pub label_bias: f64,
    #[serde(default)]
    pub seed: u64,
}

/// A CSV file with its schema, or a generated synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    /// Label used in output rows; defaults to the family name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: ClassifierSpec,
}

impl ModelEntry {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.spec.family_name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub population: Vec<usize>,
    pub generations: Vec<usize>,
    pub crossover_rate: Vec<f64>,
    pub mutation_rate: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            population: vec![25, 50],
            generations: vec![25, 50],
            crossover_rate: vec![0.25, 0.75],
            mutation_rate: vec![0.25, 0.75],
        }
    }
}

impl SweepGrid {
    /// Grid points in row-major order (population slowest).
    pub fn points(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for &n in &self.population {
            for &g in &self.generations {
                for &c in &self.crossover_rate {
                    for &m in &self.mutation_rate {
                        out.push((n, g, c, m));
                    }
                }
            }
        }
        out
    }
}

fn default_repetitions() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_models")]
    pub classifiers: Vec<ModelEntry>,
    #[serde(default)]
    pub ga: GAConfig,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub baselines: Vec<Baseline>,
    #[serde(default)]
    pub baseline_params: BaselineParams,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_models() -> Vec<ModelEntry> {
    vec![ModelEntry {
        name: None,
        spec: ClassifierSpec::logistic_regression(),
    }]
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub fs_mode: Option<FsMode>,
}

/// A validated config with its datasets loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub datasets: Vec<(String, Dataset)>,
    pub output_dir: PathBuf,
    pub config_hash: String,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.datasets.is_empty() {
            return Err(invalid("no datasets"));
        }
        if self.classifiers.is_empty() {
            return Err(invalid("no classifiers"));
        }
        if self.repetitions < 1 {
            return Err(invalid("repetitions must be at least 1"));
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return Err(invalid(format!("dataset name `{}` used twice", d.name)));
            }
            match (&d.path, &d.schema, &d.synthetic) {
                (Some(_), Some(_), None) | (None, None, Some(_)) => {}
                _ => {
                    return Err(invalid(format!(
                        "dataset `{}` needs either `path` and `schema`, or `synthetic`",
                        d.name
                    )))
                }
            }
        }
        let mut labels = BTreeSet::new();
        for m in &self.classifiers {
            m.spec.validate().map_err(|e| invalid(message(&e)))?;
            if !labels.insert(m.label()) {
                return Err(invalid(format!("classifier name `{}` used twice", m.label())));
            }
        }
        self.ga.validate().map_err(|e| invalid(message(&e)))?;
        let mut seen = BTreeSet::new();
        if let Some(b) = self.baselines.iter().find(|b| !seen.insert(**b)) {
            return Err(invalid(format!("baseline {b} listed twice")));
        }
        if self.baseline_params.k_neighbors == Some(0) {
            return Err(invalid("k_neighbors must be at least 1"));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> anyhow::Result<()> {
        let g = &self.sweep;
        if g.population.is_empty() || g.generations.is_empty() || g.crossover_rate.is_empty() || g.mutation_rate.is_empty() {
            return Err(invalid("every sweep grid list must be nonempty"));
        }
        for (n, gens, c, m) in g.points() {
            self.ga_at(n, gens, c, m, self.ga.seed).validate().map_err(|e| invalid(format!("sweep grid: {}", message(&e))))?;
        }
        Ok(())
    }

    /// The GA settings of one sweep point.
    pub fn ga_at(&self, population: usize, generations: usize, crossover_rate: f64, mutation_rate: f64, seed: u64) -> GAConfig {
        GAConfig {
            population,
            generations,
            crossover_rate,
            mutation_rate,
            seed,
            ..self.ga.clone()
        }
    }

    /// Truncated SHA-256 of the canonical JSON of everything that affects
    /// results (the output directory is excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}

impl Experiment {
    /// Reads, overrides, validates and loads everything; nothing is written.
    pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let config = ExperimentConfig::from_file(path)?;
        Self::from_config(config, &base, overrides)
    }

    /// As [`Experiment::load`] with relative paths resolved against `base`.
    pub fn from_config(mut config: ExperimentConfig, base: &Path, overrides: &Overrides) -> anyhow::Result<Self> {
        if let Some(seed) = overrides.seed {
            config.ga.seed = seed;
        }
        if let Some(mode) = overrides.fs_mode {
            config.ga.fitness_weights.fs_mode = mode;
        }
        config.validate()?;
        let output_dir = match &overrides.out {
            Some(out) => out.clone(),
            None => base.join(&config.output_dir),
        };
        let mut datasets = Vec::with_capacity(config.datasets.len());
        for entry in &config.datasets {
            datasets.push((entry.name.clone(), load_entry(entry, base)?));
        }
        let config_hash = config.hash();
        Ok(Self {
            config,
            datasets,
            output_dir,
            config_hash,
        })
    }

    pub fn dataset(&self, name: &str) -> Option<&Dataset> {
        self.datasets.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn model(&self, label: &str) -> Option<&ModelEntry> {
        self.config.classifiers.iter().find(|m| m.label() == label)
    }

    /// Seed of repetition `r`.
    pub fn repetition_seed(&self, r: usize) -> u64 {
        self.config.ga.seed.wrapping_add(r as u64)
    }
}

fn load_entry(entry: &DatasetEntry, base: &Path) -> anyhow::Result<Dataset> {
    if let Some(s) = entry.synthetic {
        return synthetic_biased(s.n, s.label_bias, s.seed).map_err(|e| invalid(format!("dataset `{}`: {}", entry.name, message(&e))));
    }
    let path = base.join(entry.path.as_ref().expect("validated"));
    if !path.is_file() {
        return Err(invalid(format!("dataset `{}`: no file at {}", entry.name, path.display())));
    }
    let schema = match entry.schema.as_ref().expect("validated") {
        SchemaRef::Inline(s) => s.clone(),
        SchemaRef::Path(p) => DatasetSchema::from_json_file(base.join(p))
            .map_err(|e| invalid(format!("dataset `{}` schema {}: {e}", entry.name, p.display())))?,
    };
    schema.validate().map_err(|e| invalid(format!("dataset `{}`: {e}", entry.name)))?;
    load_csv(&path, &schema).map_err(|e| match e {
        fate::Error::Schema(_) | fate::Error::EmptyDataset => invalid(format!("dataset `{}`: {e}", entry.name)),
        other => anyhow::Error::new(other).context(format!("loading dataset `{}`", entry.name)),
    })
}
