use std::path::PathBuf;
use std::process::ExitCode;

use anisofield_cli::{exit_code, Run, RunConfig, EXIT_USAGE};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisofield", version, about = "Scaling limits of anisotropic long-range dependent random fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the output directory of the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Region, balance cell, permutation, limit family and H.
    Classify,
    /// All script-H exponents and normalizations.
    Exponents,
    /// Simulates a window of the field.
    Simulate,
    /// Exact (and optional Monte Carlo) variances of the normalized sums.
    Variance,
    /// Covariances of the limit field at the configured point pairs.
    LimitCov,
    /// Runs every check and exits with the aggregate verdict.
    Verify,
    /// Runs every check and writes the report and a CSV summary.
    Report,
}

fn run(cli: &Cli) -> anisofield::Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anisofield::Error::Config("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output.dir = o.clone();
    }
    let run = Run::new(config)?;
    let outcome = match cli.command {
        Command::Classify => run.classify(),
        Command::Exponents => run.exponents(),
        Command::Simulate => run.simulate(),
        Command::Variance => run.variance(),
        Command::LimitCov => run.limit_cov(),
        Command::Verify => run.verify(),
        Command::Report => run.report(),
    }?;
    println!("{}", outcome.text.trim_end());
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: cannot start {n} worker threads");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
