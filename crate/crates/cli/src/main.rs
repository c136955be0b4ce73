//! `shockflow`: runs one experiment per invocation and writes CSV artifacts.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};
use shockflow_core::fixtures::catalog;

use config::{ConfigError, ExperimentConfig};
use output::Artifacts;

#[derive(Parser)]
#[command(name = "shockflow", version, about = "Hamilton-Jacobi shocks and their admissible particle flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Print the named initial data.
    ListFixtures,
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numerical(String),
}

impl Failure {
    pub fn core(stage: &str, e: shockflow_core::Error) -> Self {
        match e {
            shockflow_core::Error::Config { key, reason } => Failure::Config(ConfigError::new(key, reason)),
            other => Failure::Numerical(format!("{stage}: {other}")),
        }
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Numerical(_) => ExitCode::from(3),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e}"),
            Failure::Numerical(m) => write!(f, "numerical failure in {m}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(format!("output: {e:#}"))
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SHOCKFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Config(ConfigError::new("SHOCKFLOW_THREADS", format!("{raw:?} is not a positive integer")))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))
}

fn manifest(cfg: &ExperimentConfig, files: &[String], seconds: f64) -> Value {
    let echo: Map<String, Value> = cfg.raw.entries.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    json!({
        "experiment": cfg.experiment.name(),
        "fixture": cfg.fixture,
        "config": echo,
        "rng_seed": cfg.rng_seed,
        "threads": rayon::current_num_threads(),
        "versions": {
            "shockflow": env!("CARGO_PKG_VERSION"),
            "shockflow-core": shockflow_core::VERSION,
        },
        "wall_time_seconds": seconds,
        "outputs": files,
    })
}

fn run(path: &std::path::Path) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(path).map_err(Failure::Config)?;
    init_threads()?;
    let start = Instant::now();
    let mut out = Artifacts::create(&cfg.output).map_err(|e| {
        Failure::Config(ConfigError::new("output", format!("cannot create {}: {e}", cfg.output.display())))
    })?;
    experiments::run(&cfg, &mut out)?;
    let files = out.files.clone();
    out.json("manifest.json", &manifest(&cfg, &files, start.elapsed().as_secs_f64()))?;
    println!("{}: wrote {} files to {}", cfg.experiment.name(), files.len() + 1, out.dir().display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run(&config),
        Command::ListFixtures => {
            for f in catalog::<f64>() {
                println!("{:<16} {}D  {}", f.name, f.ic.dim(), f.description);
            }
            Ok(())
        }
        Command::Validate { config } => ExperimentConfig::load(&config).map_err(Failure::Config).map(|cfg| {
            println!("{}: ok ({} keys, output {})", cfg.experiment.name(), cfg.raw.entries.len(), cfg.output.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
