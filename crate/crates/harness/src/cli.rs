//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use metroforge::baselines::BaselineKind;
use metroforge::noise::NoiseFlags;

use crate::config::ExperimentConfig;
use crate::experiments::{self, Ablation};
use crate::record::{persist, ResultRecord};
use crate::{preset, HarnessError, THREADS_ENV};

#[derive(Debug, Parser)]
#[command(name = "metroforge", version, about = "Noise-aware sensing-circuit search and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML); defaults to the full-noise preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to output.dir or results/<experiment>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Restrict to one register size.
    #[arg(long = "n")]
    pub n: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config file and print its hash.
    ValidateConfig { config: PathBuf },
    /// Evaluate one reference protocol.
    Baseline {
        #[arg(long)]
        kind: BaselineKind,
        #[command(flatten)]
        common: Common,
        /// Disable every noise source.
        #[arg(long)]
        noiseless: bool,
        /// Fixed interrogation time in seconds instead of a sweep.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Search circuits for each register size.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Tuned baselines and searched circuits across register sizes.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Scaling study under a modified noise model.
    Ablation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// remove-gate-noise, remove-readout-noise, suppress-t1t2-x10 or
        /// all; defaults to the config's `ablation`.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Per-stage information decomposition at a fixed time.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare searching on the actual versus a uniform angle distribution.
    SignalStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
}

fn load(common: &Common, seed: Option<u64>) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml(preset("full-noise").expect("bundled preset"))?,
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(n) = common.n {
        config.qubits = vec![n];
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| Path::new("results").join(config.experiment.replace('/', "-")))
}

fn print_record(record: &ResultRecord) {
    println!("{:<34} {:>2} {:<18} {:>10} {:>10} {:>10} {:>12}", "experiment", "N", "protocol", "cfi_phi", "qfi", "t*_us", "objective");
    for r in &record.rows {
        let qfi = r.qfi.map_or_else(|| "-".to_string(), |q| format!("{q:.4}"));
        println!(
            "{:<34} {:>2} {:<18} {:>10.4} {:>10} {:>10.3} {:>12.4e}",
            r.experiment,
            r.n,
            r.protocol,
            r.cfi_phi,
            qfi,
            r.t_star_s * 1e6,
            r.objective
        );
    }
    for f in &record.failures {
        eprintln!("failed: {} N={}: {}", f.experiment, f.n, f.error);
    }
}

fn finish(common: &Common, config: &ExperimentConfig, record: ResultRecord) -> Result<(), HarnessError> {
    print_record(&record);
    let written = persist(&out_dir(common, config), config, &record)?;
    println!("wrote {}", written.dir.display());
    if record.rows.is_empty() && !record.failures.is_empty() {
        return Err(HarnessError::Runtime("every register size failed".into()));
    }
    Ok(())
}

fn configure_threads() -> Result<(), HarnessError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| HarnessError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), HarnessError> {
    configure_threads()?;
    match cli.command {
        Command::ValidateConfig { config } => {
            let c = ExperimentConfig::load(&config)?;
            println!("ok {} sha256={}", c.experiment, c.hash());
            Ok(())
        }
        Command::Baseline { kind, common, noiseless, t } => {
            let mut config = load(&common, None)?;
            if noiseless {
                config.noise.enabled = NoiseFlags::NONE;
            }
            if let Some(t) = t {
                if !(t > 0.0) {
                    return Err(HarnessError::Config(format!("--t must be positive, got {t}")));
                }
            }
            let mut record = ResultRecord::new(&config);
            for &n in &config.qubits {
                record.merge(experiments::run_baseline(&config, kind, n, t)?);
            }
            finish(&common, &config, record)
        }
        Command::Optimize { common, seed } => {
            let config = load(&common, Some(seed))?;
            finish(&common, &config, experiments::run_optimize(&config))
        }
        Command::Scaling { common, seed } => {
            let config = load(&common, Some(seed))?;
            finish(&common, &config, experiments::run_scaling_study(&config))
        }
        Command::Ablation { common, seed, kind } => {
            let config = load(&common, Some(seed))?;
            let ablations = match kind.as_deref() {
                Some("all") => Ablation::ALL.to_vec(),
                Some(k) => vec![k.parse().map_err(HarnessError::Config)?],
                None => vec![config.ablation.ok_or_else(|| HarnessError::Config("no --kind given and the config has no ablation".into()))?],
            };
            let mut record = ResultRecord::new(&config);
            for a in ablations {
                record.merge(experiments::run_ablation_study(&config, a));
            }
            finish(&common, &config, record)
        }
        Command::Decompose { common, seed } => {
            let config = load(&common, seed)?;
            let record = experiments::run_decomposition(&config)?;
            finish(&common, &config, record)
        }
        Command::SignalStudy { common, seed } => {
            let config = load(&common, Some(seed))?;
            let record = experiments::run_signal_distribution_study(&config)?;
            finish(&common, &config, record)
        }
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
