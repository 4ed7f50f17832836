//! `inarlab`: simulate, fit and bootstrap INAR(1)/INAR(2) count series.
//!
//! Exit codes: 0 success, 2 invalid flags, 3 invalid data or model,
//! 4 estimation failure, 5 too many failed bootstrap replicates.

mod commands;
mod input;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inarlab::{FamilyKind, InarError, ParametricFamily};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "inarlab", version, about = "Simulation, estimation and bootstrap for INAR count time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an INAR(p) series and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit an INAR(p) model to a CSV series.
    Fit(FitArgs),
    /// Model-based bootstrap of a fit.
    Boot(BootArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("innovation").required(true).args(["family", "pmf"])))]
pub struct SimulateArgs {
    /// Model order; must match the number of coefficients.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub p: Option<u8>,
    /// Thinning coefficients a1[,a2].
    #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    /// Innovation family: poisson:LAMBDA, geometric:PI or negbin:R,PI.
    #[arg(long, value_parser = parse_family_spec)]
    pub family: Option<ParametricFamily>,
    /// Innovation pmf on 0..M as a comma-separated list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub pmf: Option<Vec<f64>>,
    /// Length of the returned series.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = inarlab::sampling::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (standard output if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest path (standard error if absent).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Moments,
    Ml,
    Sp,
    SpPenal,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Moments => "moments",
            Method::Ml => "ml",
            Method::Sp => "sp",
            Method::SpPenal => "sp-penal",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyArg {
    Poisson,
    Geometric,
    Negbin,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poisson => FamilyKind::Poisson,
            FamilyArg::Geometric => FamilyKind::Geometric,
            FamilyArg::Negbin => FamilyKind::NegBin,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Input CSV: one nonnegative integer per line, optional header `x`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub p: u8,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Innovation family, required for `moments` and `ml`.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta2: Option<f64>,
    /// Choose (eta1, eta2) on a temporal validation split.
    #[arg(long)]
    pub validate: bool,
    /// Candidate penalty weights for both eta1 and eta2.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta_grid: Option<Vec<f64>>,
    /// Separate candidates for eta2 (defaults to --eta-grid).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta2_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = inarlab::PenaltyGrid::DEFAULT_SPLIT)]
    pub split_fraction: f64,
    /// Report path (standard output if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeArg {
    Parametric(FamilyKind),
    Semiparametric,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorArg {
    Moments,
    Ml,
    Sp,
}

#[derive(Args, Debug)]
pub struct BootArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub p: u8,
    /// `param:FAMILY` or `sp`.
    #[arg(long, value_parser = parse_mode)]
    pub mode: ModeArg,
    /// Replicate estimator (default: ml for parametric, sp for semiparametric).
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta2: Option<f64>,
    /// Number of bootstrap replicates.
    #[arg(long = "B", value_parser = clap::value_parser!(u64).range(1..))]
    pub replicates: u64,
    #[arg(long, default_value_t = inarlab::BootstrapSpec::DEFAULT_LEVEL, allow_negative_numbers = true)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dump raw replicate estimates as CSV.
    #[arg(long = "replicates")]
    pub replicates_out: Option<PathBuf>,
    /// Worker threads (falls back to INARLAB_THREADS, then all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

/// `poisson:2`, `geometric:0.4`, `negbin:3,0.5`.
fn parse_family_spec(s: &str) -> Result<ParametricFamily, String> {
    let (name, rest) = s.split_once(':').ok_or_else(|| format!("expected FAMILY:PARAMS, found `{s}`"))?;
    let kind: FamilyKind = name.parse().map_err(|_| format!("unknown family `{name}`"))?;
    let values = rest.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
    match (kind, values.as_slice()) {
        (FamilyKind::Poisson, &[lambda]) => Ok(ParametricFamily::Poisson { lambda }),
        (FamilyKind::Geometric, &[pi]) => Ok(ParametricFamily::Geometric { pi }),
        (FamilyKind::NegBin, &[r, pi]) => Ok(ParametricFamily::NegBin { r, pi }),
        _ => Err(format!("{} takes parameters {}", kind.name(), kind.parameter_names().join(","))),
    }
}

fn parse_mode(s: &str) -> Result<ModeArg, String> {
    if s == "sp" {
        return Ok(ModeArg::Semiparametric);
    }
    let family = s
        .strip_prefix("param:")
        .ok_or_else(|| format!("expected `param:FAMILY` or `sp`, found `{s}`"))?;
    let kind: FamilyKind = family.parse().map_err(|_| format!("unknown family `{family}`"))?;
    Ok(ModeArg::Parametric(kind))
}

/// Failure classes of the exit-code taxonomy.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Library(InarError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Library(e) => match e {
                InarError::TooManyFailures { .. } => 5,
                InarError::NonStationary { .. }
                | InarError::CoefficientOutOfRange { .. }
                | InarError::InvalidPmf(_)
                | InarError::UnsupportedOrder(_)
                | InarError::InvalidFamily(_)
                | InarError::TruncationLoss { .. }
                | InarError::InvalidConfig(_)
                | InarError::EmptyInput
                | InarError::NegativePenalty { .. }
                | InarError::EmptyGrid => 3,
                _ => 4,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m.clone(),
            CliError::Library(e) => format!("{}: {e}", e.name()),
        }
    }
}

impl From<InarError> for CliError {
    fn from(e: InarError) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Boot(args) => commands::boot(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_specs() {
        assert_eq!(parse_family_spec("poisson:2"), Ok(ParametricFamily::Poisson { lambda: 2.0 }));
        assert_eq!(parse_family_spec("negbin:3,0.5"), Ok(ParametricFamily::NegBin { r: 3.0, pi: 0.5 }));
        assert!(parse_family_spec("poisson").is_err());
        assert!(parse_family_spec("poisson:1,2").is_err());
        assert!(parse_family_spec("binomial:3").is_err());
        // out-of-range values parse; the model check rejects them later
        assert!(parse_family_spec("geometric:1.5").is_ok());
    }

    #[test]
    fn modes() {
        assert_eq!(parse_mode("sp"), Ok(ModeArg::Semiparametric));
        assert_eq!(parse_mode("param:negbin"), Ok(ModeArg::Parametric(FamilyKind::NegBin)));
        assert!(parse_mode("param").is_err());
    }

    #[test]
    fn exit_code_classes() {
        assert_eq!(CliError::from(InarError::NonStationary { sum: 1.1 }).exit_code(), 3);
        assert_eq!(CliError::from(InarError::DegenerateSeries).exit_code(), 4);
        assert_eq!(CliError::from(InarError::TooManyFailures { failed: 3, total: 4 }).exit_code(), 5);
        assert_eq!(CliError::Usage(String::new()).exit_code(), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
