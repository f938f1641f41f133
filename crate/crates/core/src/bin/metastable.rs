use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metastable::harness::{run_command, Command, ExperimentConfig, RunOptions};
use metastable::Error;

#[derive(Parser)]
#[command(
    name = "metastable",
    about = "Slow internal-layer dynamics experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Include the slow small-ε table columns.
    #[arg(long, global = true)]
    long: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Full-model trajectories from the default initial data.
    Simulate,
    /// Layer positions for the viscous Burgers table.
    Table1,
    /// Layer positions for the Jin-Xin table.
    Table2,
    /// Leading eigenvalues against the asymptotic formula.
    Spectrum,
    /// Spectral hypothesis checks and rate constants.
    Hypotheses,
    /// Coupled layer/perturbation system.
    Coupled,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Table1 => Command::Table1,
            Sub::Table2 => Command::Table2,
            Sub::Spectrum => Command::Spectrum,
            Sub::Hypotheses => Command::Hypotheses,
            Sub::Coupled => Command::Coupled,
        }
    }
}

fn load(path: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config {
                key: "--config".into(),
                message: format!("cannot read {}: {e}", p.display()),
            })?;
            ExperimentConfig::parse(&text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(cli.config.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions {
        out_dir,
        jobs: cli.jobs,
        long: cli.long,
    };
    match run_command(cli.command.into(), &cfg, &opts) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if out.aborted.is_empty() {
                ExitCode::SUCCESS
            } else {
                for a in &out.aborted {
                    eprintln!("aborted: {a}");
                }
                ExitCode::from(2)
            }
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
