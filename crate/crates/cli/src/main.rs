//! `triangle-risk fit|simulate|report`.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, PChoice, RunConfig};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "triangle-risk", version, about = "Loss-triangle reserving and economic capital")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model per line and the copula tree.
    Fit(Common),
    /// Simulate completions of the lower triangles.
    Simulate(Common),
    /// Capital, allocation and risk-adjustment tables from a scenario file.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of scenarios.
    #[arg(long)]
    n: Option<usize>,
    /// Confidence level of the capital measure.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, env = "TRIANGLE_RISK_THREADS")]
    threads: Option<usize>,
    /// Tweedie index: `grid` or a value in [1.105, 1.9].
    #[arg(long)]
    p: Option<String>,
    /// Portfolio CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn run_config(&self) -> CliResult<RunConfig> {
        let overrides = Overrides {
            seed: self.seed,
            n: self.n,
            alpha: self.alpha,
            threads: self.threads,
            p: self.p.as_deref().map(PChoice::parse).transpose()?,
            input: self.input.clone(),
            output_dir: self.output_dir.clone(),
        };
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (Command::Fit(common) | Command::Simulate(common) | Command::Report(common)) = &cli.command;
    let config = common.run_config()?;
    if let Some(threads) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit(_) => {
            let report = commands::fit(&config)?;
            print!("{}", report.to_text());
            println!("models written to {}", config.models_dir().display());
        }
        Command::Simulate(_) => {
            let s = commands::simulate(&config)?;
            println!(
                "simulated {} scenarios in {:.2} s ({:.0} scenarios/s), written to {}",
                s.scenarios,
                s.seconds,
                s.scenarios as f64 / s.seconds.max(1e-9),
                s.path.display()
            );
        }
        Command::Report(_) => {
            let report = commands::report(&config)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("ERROR USAGE: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("ERROR {}: {msg}", e.code());
            ExitCode::from(2)
        }
    }
}
