use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fate::baselines::Baseline;
use fate::metrics::{FitnessWeights, FsMode};
use fate_cli::commands;
use fate_cli::{exit_code, with_jobs, Experiment, Overrides};

#[derive(Parser)]
#[command(name = "fate", version, about = "Search fairness-aware data-preparation pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides the config's
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_name = "deviation|literal")]
    fs_mode: Option<FsMode>,
}

impl Common {
    fn load(&self) -> anyhow::Result<Experiment> {
        Experiment::load(
            &self.config,
            &Overrides {
                seed: self.seed,
                out: self.out.clone(),
                fs_mode: self.fs_mode,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one search and write the best pipeline and its report
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Run the configured parameter grid with reference arms
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the search against bias-mitigation baselines
    Compare {
        #[command(flatten)]
        common: Common,
        /// Baselines to compare against; defaults to the config's list
        #[arg(long, value_name = "fairsmote|reweighing|dir")]
        baseline: Vec<Baseline>,
    },
    /// Cross-validate one baseline and report
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "fairsmote|reweighing|dir")]
        baseline: Baseline,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Score a predictions CSV (columns score, label, protected)
    Metrics {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = fate::models::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_name = "deviation|literal", default_value_t = FsMode::Deviation)]
        fs_mode: FsMode,
        /// Also write metrics.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Optimize { common, dataset, model } => {
            let exp = common.load()?;
            let result = with_jobs(common.jobs, || commands::cmd_optimize(&exp, dataset.as_deref(), model.as_deref()))??;
            println!("best {} fitness {}", result.best.pipeline.key(), result.best.fitness.unwrap_or(f64::NAN));
            println!("wrote {}", exp.output_dir.display());
        }
        Command::Sweep { common } => {
            let exp = common.load()?;
            let rows = with_jobs(common.jobs, || commands::cmd_sweep(&exp))??;
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            println!("{} rows ({failed} failed) in {}", rows.len(), exp.output_dir.join("results.csv").display());
        }
        Command::Compare { common, baseline } => {
            let exp = common.load()?;
            let out = with_jobs(common.jobs, || commands::cmd_compare(&exp, &baseline))??;
            println!("{} records, {} tests in {}", out.records.len(), out.stats.len(), exp.output_dir.display());
        }
        Command::Baseline {
            common,
            baseline,
            dataset,
            model,
        } => {
            let exp = common.load()?;
            let report = with_jobs(common.jobs, || commands::cmd_baseline(&exp, baseline, dataset.as_deref(), model.as_deref()))??;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Metrics {
            predictions,
            threshold,
            fs_mode,
            out,
        } => {
            let weights = FitnessWeights {
                fs_mode,
                ..FitnessWeights::default()
            };
            let report = commands::cmd_metrics(&predictions, threshold, weights)?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("metrics.json"), format!("{text}\n"))?;
            }
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
