//! `fvx`: command-line front end for filtered point-vortex experiments.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use filtered_vortex::Error;

use crate::commands::{CheckFailed, Selection};
use crate::config::{Config, DiagnosticsSection};

#[derive(Parser)]
#[command(name = "fvx", version, about = "Filtered point-vortex simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (default: the config's run.out, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for pairwise sums.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized suites; recorded but unused by deterministic runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one point-vortex system and write trajectory and diagnostics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an eps-family convergence study.
    Converge {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a kernel (`blob`, `alpha`, `custom:<path>`) for admissibility.
    KernelCheck { kernel: String },
    /// Recompute diagnostics from a stored trajectory.
    Diagnose {
        trajectory: PathBuf,
        /// Comma-separated subset of conserved, vmf, decay, weak; or all.
        #[arg(long, default_value = "all")]
        select: String,
        /// Optional config whose [diagnostics] section sets radii and the test function.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn set_workers(n: Option<usize>) -> Result<(), Error> {
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
    }
    Ok(())
}

fn out_dir(cli: &Option<PathBuf>, cfg: Option<&Config>) -> PathBuf {
    cli.clone()
        .or_else(|| cfg.and_then(|c| c.run.out.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<Option<CheckFailed>, Error> {
    let load = |path: &Path| -> Result<Config, Error> { Config::load(path) };
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = load(config)?;
            set_workers(cli.workers.or(cfg.run.workers))?;
            if let Some(seed) = cli.seed.or(cfg.run.seed) {
                eprintln!("seed {seed}");
            }
            commands::simulate(&cfg, &out_dir(&cli.out, Some(&cfg)))?;
            Ok(None)
        }
        Command::Converge { config } => {
            let cfg = load(config)?;
            set_workers(cli.workers.or(cfg.run.workers))?;
            commands::converge(&cfg, &out_dir(&cli.out, Some(&cfg)))
        }
        Command::KernelCheck { kernel } => {
            set_workers(cli.workers)?;
            commands::kernel_check(kernel, cli.out.as_deref())
        }
        Command::Diagnose { trajectory, select, config } => {
            let cfg = config.as_deref().map(load).transpose()?;
            set_workers(cli.workers.or(cfg.as_ref().and_then(|c| c.run.workers)))?;
            let selection =
                if select.trim() == "all" { Selection::ALL.to_vec() } else { Selection::parse_list(select)? };
            let default = DiagnosticsSection::default();
            let settings = cfg.as_ref().map_or(&default, |c| &c.diagnostics);
            let written = commands::diagnose(trajectory, &selection, settings, &out_dir(&cli.out, cfg.as_ref()))?;
            for path in written {
                eprintln!("wrote {}", path.display());
            }
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(CheckFailed(why))) => {
            eprintln!("fvx: {why}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("fvx: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
