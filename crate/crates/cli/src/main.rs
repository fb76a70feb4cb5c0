use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spdelab_cli::{init_workers, run, sweep, sweep_exit_code, ExperimentConfig, RunError, RunSummary};

/// Runs spectral SPDE experiments described by TOML configs.
#[derive(Parser)]
#[command(name = "spdelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report, tables and manifest.
    Run { config: PathBuf },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

fn print_summary(s: &RunSummary) {
    for (name, value) in &s.outcome.headline {
        println!("{name} = {value:.6e}");
    }
    println!("wrote {} file(s) to {}", s.manifest.files.len() + 1, s.output.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<i32, RunError> = init_workers().and_then(|()| match cli.command {
        Command::Run { config } => run(&config).map(|s| {
            print_summary(&s);
            sweep_exit_code(&s)
        }),
        Command::Sweep { config, param, values } => sweep(&config, &param, &values).map(|s| {
            print_summary(&s);
            sweep_exit_code(&s)
        }),
        Command::Validate { config } => ExperimentConfig::load(&config).and_then(|(cfg, _)| {
            cfg.validate()?;
            println!("{}: ok ({:?})", config.display(), cfg.kind);
            Ok(0)
        }),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
