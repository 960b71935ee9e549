use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hartree_crystal::io::{load_config, run, Command};
use hartree_crystal::Error;

#[derive(Parser)]
#[command(
    version,
    about = "Plane-wave Hartree crystal: ground state, dielectric response and dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "config.toml")]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Self-consistent ground state (ground_state.json).
    Scf,
    /// Band energies on the q-grid (bands.csv).
    Bands,
    /// Matrix L and macroscopic dielectric tensor (dielectric.json).
    Dielectric,
    /// Screening of the configured defect charge (screening.csv).
    Defect,
    /// Hartree dynamics under the configured drive (trajectory.csv, epsM_omega.json).
    Dynamics,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not set thread count: {e}");
        }
    }
    let cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(Error::ConfigInvalid(issues)) => {
            eprintln!("invalid configuration {}:", cli.config.display());
            for i in issues {
                eprintln!("  {i}");
            }
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Cmd::Scf => Command::Scf,
        Cmd::Bands => Command::Bands,
        Cmd::Dielectric => Command::Dielectric,
        Cmd::Defect => Command::Defect,
        Cmd::Dynamics => Command::Dynamics,
    };
    let dir = cli.output.unwrap_or_else(|| cfg.output_dir.clone());
    match run(command, &cfg, &dir) {
        Ok(m) => {
            if m.checkpoint_reused {
                println!("reused ground-state checkpoint (0 SCF iterations)");
            } else {
                println!("SCF converged in {} iterations", m.scf_iterations);
            }
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            for f in &m.files {
                println!("wrote {}", dir.join(&f.name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
