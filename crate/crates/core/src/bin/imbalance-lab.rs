use clap::{Parser, ValueEnum};
use imbalance_lab::experiments::{self, config::Config, Command};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Sweep,
    DimScan,
    RhoScan,
    CdtFailure,
    ImplicitBias,
    Kernel,
}

const AFTER_HELP: &str = "\
Output: <out>/results.csv with columns
  method          method label, e.g. ma or ma_rho=1 (kernel runs append @zeta=...)
  param           swept value: gamma/tau, d, rho, gamma or GD step depending on the command
  seed            training seed
  metric          worst_class_error, balanced_error, macro_f1, training_error,
                  class_<k>_error, cosine_to_reference, loss, worst_class_bound, ...
  value           empirical measurement (empty when none exists)
  analytic_value  analytic prediction for the same row (empty when none exists;
                  implicit-bias rows hold the exact margin solution's value)
plus one SVG per plotted metric.

Exit codes: 0 success, 2 configuration error, 3 infeasible margin problem,
4 numerical failure.";

/// Class-imbalance experiments: theory-vs-empirical sweeps for margin,
/// logit-adjusted and temperature-scaled linear classifiers.
#[derive(Parser, Debug)]
#[command(name = "imbalance-lab", version, after_help = AFTER_HELP)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output_dir in the config; default ./results)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, env = "IMBALANCE_LAB_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match Config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let cmd = match cli.command {
        Sub::Sweep => Command::Sweep,
        Sub::DimScan => Command::DimScan,
        Sub::RhoScan => Command::RhoScan,
        Sub::CdtFailure => Command::CdtFailure,
        Sub::ImplicitBias => Command::ImplicitBias,
        Sub::Kernel => Command::Kernel,
    };
    let out = cfg.output_dir(cli.out.as_deref());
    match experiments::run(cmd, &cfg, &out) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiments::exit_code(&e) as u8)
        }
    }
}
