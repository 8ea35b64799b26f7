//! `plastopt` batch runner.
//!
//! Exit codes: 0 when every contract held, 1 on a contract violation,
//! 2 on a configuration error, 3 when a run fails.

mod config;
mod expr;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, StudyName};
use run::{ErrorReport, Invocation, Mode, RunError};

/// Environment variable that overrides the configured output directory.
const OUT_ENV: &str = "PLASTOPT_OUT";

#[derive(Debug, Parser)]
#[command(name = "plastopt", version, about = "Phase-field topology optimization of elastoplastic bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults describe the regression strip.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding PLASTOPT_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for assembly and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the state evolution for the configured design.
    Forward,
    /// Run descent with continuation over the gamma schedule.
    Optimize,
    /// Run one convergence study.
    Lab {
        #[arg(value_enum)]
        study: Option<StudyArg>,
    },
    /// Run the property suite on a small fixture.
    Check,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
enum StudyArg {
    GammaSweep,
    TimestepSweep,
    DeltaSweep,
    MmProfileCheck,
    AdjointBoundStudy,
    LipschitzInZStudy,
}

impl From<StudyArg> for StudyName {
    fn from(s: StudyArg) -> Self {
        match s {
            StudyArg::GammaSweep => Self::GammaSweep,
            StudyArg::TimestepSweep => Self::TimestepSweep,
            StudyArg::DeltaSweep => Self::DeltaSweep,
            StudyArg::MmProfileCheck => Self::MmProfileCheck,
            StudyArg::AdjointBoundStudy => Self::AdjointBoundStudy,
            StudyArg::LipschitzInZStudy => Self::LipschitzInZStudy,
        }
    }
}

fn invocation(cli: &Cli) -> Result<Invocation, RunError> {
    let (config, fields, config_text) = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let cfg = RunConfig::default();
            let fields = cfg.validate()?;
            let text = serde_json::to_string(&cfg).map_err(|e| RunError::Solve(e.to_string()))?;
            (cfg, fields, text)
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| config.output.clone());
    Ok(Invocation { config, fields, config_text, out })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            ErrorReport::new(&RunError::Solve(format!("thread pool: {e}"))).emit(None);
            return ExitCode::from(3);
        }
    }
    let mode = match &cli.command {
        Command::Forward => Mode::Forward,
        Command::Optimize => Mode::Optimize,
        Command::Lab { study } => Mode::Lab(study.map(StudyName::from)),
        Command::Check => Mode::Check,
    };
    let inv = match invocation(&cli) {
        Ok(inv) => inv,
        Err(e) => {
            ErrorReport::new(&e).emit(cli.out.as_deref());
            return ExitCode::from(e.exit_code());
        }
    };
    match run::run(mode, &inv) {
        Ok(manifest) => {
            for c in manifest.contracts.iter().filter(|c| !c.held) {
                eprintln!("contract violated: {} ({})", c.name, c.detail);
            }
            println!("{}", inv.out.join("manifest.json").display());
            ExitCode::from(if manifest.contracts_held() { 0 } else { 1 })
        }
        Err(e) => {
            ErrorReport::new(&e).emit(Some(&inv.out));
            ExitCode::from(e.exit_code())
        }
    }
}
