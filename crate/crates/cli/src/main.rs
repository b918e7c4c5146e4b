use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use reconn_cli::verify::{self, Suite};
use reconn_cli::{config, configure_threads, singular, train};

#[derive(Parser)]
#[command(name = "reconn", version, about = "Regularity-conforming neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one experiment described by a JSON config.
    Run { config: PathBuf },
    /// Run a suite of invariant checks and print a JSON report.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Solve for the singular exponent at a four-material vertex.
    SingularSolve {
        /// Conductivities of the four quadrants, counter-clockwise from the first.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sigma: Vec<String>,
        #[arg(conflicts_with = "sigma")]
        values: Vec<String>,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let settings = config::load(&config)?;
            let summary = train::run(&settings)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::Verify { suite } => {
            let report = verify::run(suite)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed)
        }
        Command::SingularSolve { sigma, values } => {
            let parts = if sigma.is_empty() { values } else { sigma };
            let out = singular::solve(singular::parse_sigma(&parts)?)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
