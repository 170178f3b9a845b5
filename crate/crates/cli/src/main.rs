use std::path::PathBuf;
use std::process::ExitCode;

use acmax_cli::{init_threads, run, CliError, Command, Overrides, RunConfig};
use clap::Parser;

/// Monge-Ampère solvers on model almost Hermitian tori.
#[derive(Parser, Debug)]
#[command(name = "acmax", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (TOML, or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `outputs.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points per axis (overrides `geometry.points_per_axis`).
    #[arg(long = "grid-N")]
    grid_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["2", "4"])]
    stencil_order: Option<String>,
}

fn execute(args: &Args) -> Result<bool, CliError> {
    init_threads(std::env::var("ACMAX_THREADS").ok().as_deref())?;
    let mut config = RunConfig::load(&args.config)?;
    let overrides = Overrides {
        out: args.out.clone(),
        grid_n: args.grid_n,
        seed: args.seed,
        stencil_order: args.stencil_order.as_deref().map(|s| s.parse().expect("validated by clap")),
    };
    overrides.apply(&mut config);
    let outcome = run(&config, args.command)?;
    for path in &outcome.artifacts {
        println!("{}", path.display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acmax: error [verify::IdentitySuiteFailed]: at least one identity check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("acmax: error [{}]: {e}", e.qualified_name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
