//! `besov-lab`: run an experiment described by a TOML config.
//!
//! Exit codes: 0 success, 1 configuration error, 2 verification failure,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use besov_lab::harness::{run, with_jobs, ExperimentConfig};
use besov_lab::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "besov-lab", version, about = "Rate experiments for anisotropic B-spline series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximation error of the adaptive approximant against N.
    ApproxRate(CommonArgs),
    /// Estimation risk against the sample size n.
    EstRate(CommonArgs),
    /// Paired risks of several estimators on shared datasets.
    Compare(CommonArgs),
    /// Build and verify a ReLU network with its budget certificate.
    NetSynth(CommonArgs),
    /// Closed-form rate exponents.
    Rates(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(name: &str, args: &CommonArgs) -> Result<String, Error> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if config.name() != name {
        return Err(Error::Config(format!(
            "config describes a `{}` experiment, not `{name}`",
            config.name()
        )));
    }
    if let Some(seed) = args.seed {
        config.set_seed(seed);
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let output = with_jobs(args.jobs, || run(&config, base))??;
    output.write(&args.out)?;
    Ok(output.summary)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, args) = match &cli.command {
        Command::ApproxRate(a) => ("approx-rate", a),
        Command::EstRate(a) => ("est-rate", a),
        Command::Compare(a) => ("compare", a),
        Command::NetSynth(a) => ("net-synth", a),
        Command::Rates(a) => ("rates", a),
    };
    match execute(name, args) {
        Ok(summary) => {
            println!("{summary}");
            println!("outputs written to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
