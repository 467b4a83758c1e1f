use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frontwave_cli::config::{parse_config, Mode};
use frontwave_cli::run::{execute, resolve_workers};
use frontwave_cli::CliError;

#[derive(Parser)]
#[command(name = "frontwave", version, about = "Farmer/hunter-gatherer front simulations and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single radial simulation with audits, fits and a plot script
    Simulate(RunArgs),
    /// Cartesian parameter sweep, one subdirectory per entry
    Sweep(RunArgs),
    /// Reference verification suite
    Verify(RunArgs),
    /// Spatially homogeneous (C, H) trajectory with its Lyapunov function
    Ode(RunArgs),
    /// Linear drift equation against its leading-order asymptotics
    Dirichlet(RunArgs),
    /// Speed and log-drift fits of an existing fronts.csv
    Fit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (FRONTWAVE_WORKERS takes precedence)
    #[arg(long)]
    workers: Option<usize>,
}

fn run(mode: Mode, args: &RunArgs) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = parse_config(&text, mode)?;
    let workers = resolve_workers(args.workers)?;
    let config_dir = args.config.parent().unwrap_or(Path::new("."));
    let outcome = execute(&cfg, &text, config_dir, &args.out, workers)?;
    for line in &outcome.messages {
        println!("{line}");
    }
    for note in &outcome.manifest.audit.notes {
        eprintln!("audit: {note}");
    }
    println!(
        "{} files written to {} ({:.1}s)",
        outcome.manifest.files.len() + 1,
        args.out.display(),
        outcome.manifest.wall_time_s
    );
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Ode(a) => (Mode::Ode, a),
        Command::Dirichlet(a) => (Mode::Dirichlet, a),
        Command::Fit(a) => (Mode::Fit, a),
    };
    match run(mode, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit failures recorded; see manifest.json");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
