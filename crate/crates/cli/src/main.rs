//! `bg-impulse`: simulate Bernoulli-Gaussian noise, detect impulses, and run
//! Monte-Carlo benchmarks.
//!
//! Exit status: 0 on success, 1 on domain, input or I/O errors, 2 on usage
//! errors.

mod commands;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use bg_impulse::bench::{Arm, BUILTIN_CONFIGS};
use bg_impulse::robust::DEFAULT_SSI_COEFFICIENT;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bg-impulse",
    version,
    about = "Bernoulli-Gaussian impulsive noise toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a Bernoulli-Gaussian noise sequence and its impulse labels.
    Gen(GenArgs),
    /// Label the impulses in a sample file.
    Detect(DetectArgs),
    /// Print robust scale, sparsity and threshold statistics of a sample file.
    Stats(StatsArgs),
    /// Run a Monte-Carlo grid and write a JSON report.
    Bench(BenchArgs),
    /// Compare a bench report against reference tables.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Impulse probability in [0, 1].
    #[arg(long, value_parser = parse::probability)]
    rho: f64,
    /// Background variance.
    #[arg(long, value_parser = parse::positive)]
    sigma1_sq: f64,
    /// Excess impulse variance.
    #[arg(long, value_parser = parse::positive)]
    sigma2_sq: f64,
    /// Number of samples.
    #[arg(long, value_parser = parse::positive_count)]
    n: usize,
    #[arg(long, value_parser = parse::count, default_value = "0")]
    seed: u64,
    /// Sample file; a `.f64` extension writes raw little-endian doubles.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Optional file for the true impulse labels.
    #[arg(long, value_name = "PATH")]
    truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Estimate every parameter from the data.
    Blind,
    /// Use the given variances.
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Iterative threshold shifting.
    Its,
    /// Single most likely replacement; O(N^2) per flip, for short inputs.
    Smlr,
    /// One-shot three-sigma thresholding.
    ThreeSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Estimator {
    /// Background variance from the MAD of the whole sequence.
    Robust,
    /// Background variance from the mean square of the background set.
    Ergodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Init {
    /// Sparsity-sensitive threshold.
    Ssi,
    /// 3 x 1.4826 x MAD.
    ThreeSigma,
    /// The value of --t0.
    Fixed,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Sample file (text, or raw doubles with a `.f64` extension).
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Blind)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Method::Its)]
    method: Method,
    /// Background variance (known mode).
    #[arg(long, value_parser = parse::positive, required_if_eq("mode", "known"))]
    sigma1_sq: Option<f64>,
    /// Excess impulse variance (known mode).
    #[arg(long, value_parser = parse::positive, required_if_eq("mode", "known"))]
    sigma2_sq: Option<f64>,
    /// Fixed impulse probability for the prior (known mode); re-estimated
    /// from each candidate when absent.
    #[arg(long, value_parser = parse::probability)]
    rho: Option<f64>,
    /// Background variance estimator (blind mode).
    #[arg(long, value_enum, default_value_t = Estimator::Robust)]
    estimator: Estimator,
    #[arg(long, value_enum, default_value_t = Init::Ssi)]
    init: Init,
    /// Initial threshold for `--init fixed`.
    #[arg(long, value_parser = parse::nonnegative, required_if_eq("init", "fixed"))]
    t0: Option<f64>,
    /// Multiplier of the sparsity-sensitive threshold.
    #[arg(long, value_parser = parse::positive, default_value_t = DEFAULT_SSI_COEFFICIENT)]
    ssi_coefficient: f64,
    /// Loop budget; defaults to N + 1.
    #[arg(long, value_parser = parse::positive_count)]
    max_loops: Option<usize>,
    /// Label file to write.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON report to write.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// True labels; adds Type I / Type II counts to the summary.
    #[arg(long, value_name = "PATH")]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Sample file (text, or raw doubles with a `.f64` extension).
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Multiplier of the sparsity-sensitive threshold.
    #[arg(long, value_parser = parse::positive, default_value_t = DEFAULT_SSI_COEFFICIENT)]
    ssi_coefficient: f64,
    /// Print JSON instead of aligned text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Built-in config name (`paper-grid`, `smoke`) or path to a config file.
    #[arg(long, value_name = "NAME|PATH")]
    config: String,
    /// Override the number of trials per cell.
    #[arg(long, value_parser = parse::positive_count)]
    trials: Option<usize>,
    /// Override the sequence length.
    #[arg(long, value_parser = parse::positive_count)]
    n: Option<usize>,
    /// Override the base seed.
    #[arg(long, value_parser = parse::count)]
    seed: Option<u64>,
    /// Override the arms, comma separated.
    #[arg(long, value_parser = parse::arm, value_delimiter = ',')]
    arms: Option<Vec<Arm>>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, value_parser = parse::positive_count)]
    workers: Option<usize>,
    /// JSON report to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Also write the cells as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Suppress progress lines on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// JSON report written by `bench`.
    #[arg(long, value_name = "PATH")]
    report: PathBuf,
    /// Reference table CSV; defaults to the shipped tables.
    #[arg(long, value_name = "PATH")]
    reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the comparison here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Type II relative tolerance.
    #[arg(long, value_parser = parse::nonnegative)]
    type2_relative: Option<f64>,
    /// Type II tolerance in binomial standard errors.
    #[arg(long, value_parser = parse::nonnegative)]
    type2_standard_errors: Option<f64>,
    /// Type I multiplicative tolerance.
    #[arg(long, value_parser = parse::positive)]
    type1_factor: Option<f64>,
    /// Loop-count multiplicative tolerance.
    #[arg(long, value_parser = parse::positive)]
    loops_factor: Option<f64>,
    /// Exit with status 1 when any cell is out of tolerance.
    #[arg(long)]
    strict: bool,
}

/// Cross-flag rules clap cannot express declaratively.
fn check_usage(cli: &Cli) -> Result<(), clap::Error> {
    let conflict = |msg: &str| Err(Cli::command().error(ErrorKind::ArgumentConflict, msg));
    if let Command::Detect(d) = &cli.command {
        if d.rho.is_some() && d.mode != Mode::Known {
            return conflict("--rho only applies to --mode known");
        }
        if d.t0.is_some() && d.init != Init::Fixed {
            return conflict("--t0 requires --init fixed");
        }
        if d.mode == Mode::Known && d.method == Method::ThreeSigma {
            return conflict("--method three-sigma does not use known variances");
        }
    }
    if let Command::Bench(b) = &cli.command {
        let builtin = BUILTIN_CONFIGS.iter().any(|(name, _)| *name == b.config);
        if !builtin && !std::path::Path::new(&b.config).exists() {
            let names: Vec<&str> = BUILTIN_CONFIGS.iter().map(|(n, _)| *n).collect();
            let msg = format!(
                "--config `{}` is neither a built-in config ({}) nor an existing file",
                b.config,
                names.join(", ")
            );
            return Err(Cli::command().error(ErrorKind::ValueValidation, msg));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = check_usage(&cli) {
        e.exit();
    }
    let result = match cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Detect(args) => commands::detect(args),
        Command::Stats(args) => commands::stats(args),
        Command::Bench(args) => commands::bench(args),
        Command::Compare(args) => commands::compare(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
