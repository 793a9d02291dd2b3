mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "phaseret", version, about = "Fourier phase retrieval from intensity measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Augment a signal with a reference impulse and take its DFT intensities.
    Measure(MeasureArgs),
    /// Estimate the auto-correlation from a measurement file.
    Solve(SolveArgs),
    /// Recover a signal from a measurement file.
    Recover(RecoverArgs),
    /// Minimum-phase factor of an auto-correlation file.
    Factorize(FactorizeArgs),
    /// Run a Monte-Carlo experiment described by a JSON config.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Impulse {
    L1,
    ThreeSigma,
    /// No impulse: measure the signal directly.
    None,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SideArg {
    Prefix,
    Suffix,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Solver {
    Cork,
    PhaseliftSf,
    Fienup,
    Gs,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Signal file (.json or .csv).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// M divided by the length of the input signal.
    #[arg(long, default_value_t = 4.0)]
    oversampling: f64,
    #[arg(long, value_enum, default_value_t = Impulse::L1)]
    impulse: Impulse,
    /// Per-entry standard deviation for the three-sigma impulse.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Zeros between the impulse and the signal.
    #[arg(long, default_value_t = 0)]
    gap: usize,
    #[arg(long, value_enum, default_value_t = SideArg::Prefix)]
    side: SideArg,
    /// Variance of additive real Gaussian noise on each intensity.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mark the measured signal as real.
    #[arg(long)]
    real: bool,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// L = smallest power of two above l_factor * N.
    #[arg(long, default_value_t = 32)]
    l_factor: usize,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Force the real-signal constraint.
    #[arg(long)]
    real: bool,
    /// Seed of the random initialization of the iterative baselines.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    /// Correlation file to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Solver::Cork)]
    solver: Solver,
    /// Reference signal; its global-phase-aligned error is reported.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Where to write diagnostics JSON (stdout when omitted).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[command(flatten)]
    opts: SolverArgs,
}

#[derive(Args, Debug)]
struct FactorizeArgs {
    /// Correlation file (.json with "kind": "correlation", or .csv).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 32)]
    l_factor: usize,
    /// Factor by polynomial rooting (N <= 48).
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Output directory; overrides the config's "output".
    #[arg(long)]
    output: Option<PathBuf>,
    /// Master seed; overrides the config's "master_seed".
    #[arg(long)]
    seed: Option<u64>,
    /// Run trials one after another.
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Measure(a) => commands::measure(a),
        Command::Solve(a) => commands::solve(a),
        Command::Recover(a) => commands::recover(a),
        Command::Factorize(a) => commands::factorize(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            commands::exit_code(&e)
        }
    }
}
