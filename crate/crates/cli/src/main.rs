mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pairevo::backend::BackendError;
use pairevo::pipeline::PipelineError;

use config::{BackendKind, BaselineMethod, CliConfig, Overrides};

#[derive(Parser)]
#[command(name = "pairevo", version, about = "Pairwise-judged evolutionary code selection")]
struct Cli {
    /// TOML config file. Defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Concurrent backend calls per round.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve and select a solution for a problem file, or for every file in
    /// a directory.
    Run { problem: PathBuf },
    /// Sweep the (budget, population) grid of the selection simulator.
    Simulate,
    /// Estimate an Elo rating from per-problem outcomes (CSV or JSONL).
    Elo { outcomes: PathBuf },
    /// Measure pairwise and pointwise judge accuracy on labeled pairs (JSONL).
    Diagnose { pairs: PathBuf },
    /// Run the pointwise or self-refine baseline on a problem file.
    Baseline {
        problem: PathBuf,
        #[arg(long, value_enum)]
        method: Option<BaselineMethod>,
    },
}

/// A failure reported as one JSON line on stderr.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn backend(e: &BackendError) -> Self {
        Self {
            kind: "backend",
            message: e.to_string(),
        }
    }

    pub fn from_core(e: pairevo::Error) -> Self {
        match e {
            pairevo::Error::InvalidInput(_) | pairevo::Error::InvalidConfig(_) => Self::config(e.to_string()),
            other => Self {
                kind: "internal",
                message: other.to_string(),
            },
        }
    }

    pub fn from_pipeline(e: &PipelineError) -> Self {
        match e {
            PipelineError::Config(inner) => Self::from_core(inner.clone()),
            PipelineError::Backend { .. } => Self {
                kind: "backend",
                message: e.to_string(),
            },
            PipelineError::Io(_) => Self {
                kind: "io",
                message: e.to_string(),
            },
            PipelineError::Internal(_) => Self {
                kind: "internal",
                message: e.to_string(),
            },
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            "config" => 2,
            "backend" => 3,
            "io" => 4,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = serde_json::json!({ "error": f.kind, "message": f.message });
            eprintln!("{line}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let overrides = Overrides {
        seed: cli.seed,
        backend: cli.backend,
        parallelism: cli.parallelism,
    };
    let mut config = CliConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Run { problem } => commands::run(&config, &problem, &cli.out),
        Command::Simulate => commands::simulate(&config, &cli.out),
        Command::Elo { outcomes } => commands::elo(&config, &outcomes, &cli.out),
        Command::Diagnose { pairs } => commands::diagnose(&config, &pairs, &cli.out),
        Command::Baseline { problem, method } => {
            if let Some(m) = method {
                config.baseline.method = m;
            }
            commands::baseline(&config, &problem, &cli.out)
        }
    }
}
