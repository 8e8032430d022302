use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod scenarios;

/// Runs one simulation or analysis scenario from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "driftlock", version)]
struct Args {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = config::Overrides {
        seed: args.seed,
        scenario: args.scenario,
        out: args.out,
    };
    let cfg = match config::load_config(&args.config, &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = scenarios::run(&cfg).and_then(|outputs| {
        let dir = cfg.output_directory.clone();
        scenarios::write_outputs(&cfg, outputs, &dir).map(|files| (dir, files))
    });
    match result {
        Ok((dir, files)) => {
            println!("{}: wrote {} files to {}", cfg.scenario, files.len() + 1, dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e}", cfg.scenario);
            ExitCode::FAILURE
        }
    }
}
