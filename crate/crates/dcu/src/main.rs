use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dcu::{compare, load_scenario, run, with_threads, Manifest, RunError};

#[derive(Parser)]
#[command(name = "dcu", version, about = "Dynamic concave utilities by regression Monte Carlo")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "DCU_THREADS")]
    threads: Option<usize>,
    /// Output directory, overriding the scenario's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write its reports.
    Run { config: PathBuf },
    /// Diff two run manifests.
    Compare { a: PathBuf, b: PathBuf },
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config } => {
            let scenario = load_scenario(&config, cli.out.as_deref())?;
            let outcome = with_threads(cli.threads, || run(&scenario))??;
            let h = &outcome.headline;
            println!("Y0 = {} ± {}", h.y0, h.y0_std_error);
            if let (Some(g), Some(se)) = (h.duality_gap, h.duality_std_error) {
                println!("duality gap = {g} (combined std error {se})");
            }
            if h.z_clips > 0 {
                eprintln!("warning: {} Z clips; acceptance status invalid", h.z_clips);
            }
            println!("wrote {}", scenario.out_dir.display());
            Ok(())
        }
        Command::Compare { a, b } => {
            let diff = compare(&Manifest::read(&a)?, &Manifest::read(&b)?);
            if let Some(w) = &diff.version_warning {
                eprintln!("warning: {w}");
            }
            if diff.is_empty() {
                println!("no differences");
            } else {
                print!("{diff}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
