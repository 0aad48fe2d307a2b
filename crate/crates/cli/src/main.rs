use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrt_cli::{compare_runs, inspect_file, run_experiment, ExperimentConfig, RunError, Stage};

#[derive(Parser)]
#[command(name = "lrt", version, about = "Learned low-rank transformations for classification")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "LRT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long, env = "LRT_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Print an accuracy table across reports (files or run directories).
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Describe a transform, model or dataset container.
    Inspect { file: PathBuf },
}

fn execute(cli: Cli) -> Result<(), RunError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::new(Stage::Config, e))?;
    }
    match cli.command {
        Command::Run { config, output_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let outcome = run_experiment(&cfg)?;
            print!("{}", outcome.report.summary());
            println!("\nwrote {} ({:.2} s)", outcome.output_dir.display(), outcome.timings.total_seconds);
        }
        Command::Compare { reports } => {
            let table = compare_runs(&reports)?;
            print!("{}", table.render());
        }
        Command::Inspect { file } => print!("{}", inspect_file(&file)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
