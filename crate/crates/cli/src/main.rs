use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dirjump::estimators::ClaimId;

mod config;
mod runner;

#[derive(Parser)]
#[command(name = "dirjump", version, about = "Numerical verification runs for symmetric jump-diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model's standing assumptions and print the report.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run claims and write one JSON and one CSV report per claim.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated claim ids; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        claims: Option<Vec<ClaimId>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Report directory; defaults to the config's output_dir, then ./reports.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        skip_validate: bool,
    },
    /// Write the lattice generator of the config's grid as `row col value` triplets.
    ExportOperator {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List claim ids with a one-line description.
    ListClaims,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(runner::EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Validate { config, seed } => runner::validate(&config, seed),
        Command::Run { config, claims, seed, workers, out, skip_validate } => {
            runner::run(&runner::RunOptions { config, claims, seed, workers, out, skip_validate })
        }
        Command::ExportOperator { config, out } => runner::export_operator(&config, out.as_deref()),
        Command::ListClaims => {
            runner::list_claims();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.exit_code()
        }
    }
}
