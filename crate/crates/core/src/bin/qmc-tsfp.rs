use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use qmc_tsfp::config::{ExperimentConfig, ExperimentKind};
use qmc_tsfp::harness::{default_output_name, run_experiment, RunOptions};
use qmc_tsfp::Result;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    ConvergeQmc,
    ConvergeMc,
    ConvergeTau,
    ConvergeH,
    ConvergeM,
    Simulate,
    ConstructCbc,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::ConvergeQmc => ExperimentKind::ConvergeQmc,
            Kind::ConvergeMc => ExperimentKind::ConvergeMc,
            Kind::ConvergeTau => ExperimentKind::ConvergeTau,
            Kind::ConvergeH => ExperimentKind::ConvergeH,
            Kind::ConvergeM => ExperimentKind::ConvergeM,
            Kind::Simulate => ExperimentKind::Simulate,
            Kind::ConstructCbc => ExperimentKind::ConstructCbc,
        }
    }
}

/// QMC time-splitting experiments for the NLS equation with a random potential.
#[derive(Debug, Parser)]
#[command(name = "qmc-tsfp", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path (defaults to the config's `output`, then `<kind>.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `sampling.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Allows configs flagged `expensive`.
    #[arg(long)]
    allow_expensive: bool,
}

fn run(cli: Cli) -> Result<()> {
    let kind = ExperimentKind::from(cli.kind);
    let mut config = ExperimentConfig::from_path(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.sampling.seed = seed;
    }
    let options = RunOptions {
        workers: cli.workers,
        allow_expensive: cli.allow_expensive,
    };
    let output = run_experiment(kind, &config, options)?;
    let path = cli
        .out
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default_output_name(kind)));
    for written in output.write(&path)? {
        println!("{}", written.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
