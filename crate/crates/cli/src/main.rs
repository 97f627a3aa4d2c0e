use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddzo_cli::summary::format_summary;
use ddzo_cli::{run_experiment, summarize, validate, RunConfig};

#[derive(Parser)]
#[command(name = "ddzo", version, about = "Run zeroth-order optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method and seed in a config and write traces and a summary.
    Run { config: PathBuf },
    /// Check a config and print the resolved parameters without running.
    Validate { config: PathBuf },
    /// Rebuild summary.csv from the traces in an output directory.
    Summarize { output: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => RunConfig::load(&config).and_then(|cfg| {
            let outcome = run_experiment(&cfg)?;
            print!("{}", format_summary(&outcome.summary));
            for f in &outcome.failures {
                eprintln!("seed {} of {} on {} failed: {}", f.seed, f.label, f.instance, f.reason);
            }
            eprintln!("wrote {}", outcome.output.display());
            Ok(())
        }),
        Command::Validate { config } => RunConfig::load(&config).and_then(|cfg| {
            let (instances, plans) = validate(&cfg)?;
            for p in &plans {
                let inst = &instances[p.instance];
                println!(
                    "{} on {}: T = {}, queries = {}{}",
                    p.label,
                    inst.name,
                    p.run.horizon(),
                    p.run.predicted_queries(inst.dim()),
                    p.unclamped_queries.map(|q| format!(" (clamped from {q})")).unwrap_or_default()
                );
            }
            Ok(())
        }),
        Command::Summarize { output } => summarize(&output).map(|rows| print!("{}", format_summary(&rows))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
