use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use symdir_cli::report::EXIT_FAILURE;
use symdir_cli::{explain, run, RunOptions};

#[derive(Parser)]
#[command(
    name = "symdir",
    version,
    about = "Dirichlet operator extensions on truncated Fock spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a config and write report.json.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config, then $SYMDIR_OUT_DIR, then ".").
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a tolerance, e.g. `--tol-override duality=1e-6`.
        #[arg(long = "tol-override", value_name = "NAME=VALUE")]
        tol_override: Vec<String>,
    },
    /// Summarize a report without recomputing anything.
    Explain { report: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            tol_override,
        } => {
            let options = RunOptions {
                seed,
                out,
                tolerance_overrides: tol_override,
            };
            match run(&config, &options) {
                Ok(outcome) => {
                    let s = &outcome.report.summary;
                    println!("report written to {}", outcome.report_path.display());
                    for name in &s.hypotheses_failed {
                        eprintln!("hypothesis failed: {name}");
                    }
                    for name in &s.checks_failed {
                        eprintln!("check failed: {name}");
                    }
                    outcome.exit_status()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Command::Explain { report } => match explain::explain(&report) {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILURE
            }
        },
    };
    ExitCode::from(status as u8)
}
