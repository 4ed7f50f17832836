use thiserror::Error;

pub type Result<T> = std::result::Result<T, InarError>;

/// Errors raised by model construction, estimation and bootstrap.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InarError {
    #[error("non-stationary coefficients: sum of alpha = {sum} must be < 1")]
    NonStationary { sum: f64 },
    #[error("coefficient alpha_{index} = {value} is outside the open interval (0, 1)")]
    CoefficientOutOfRange { index: usize, value: f64 },
    #[error("invalid innovation pmf: {0}")]
    InvalidPmf(String),
    #[error("unsupported model order p = {0}; only p = 1 and p = 2 are supported")]
    UnsupportedOrder(usize),
    #[error("invalid innovation family parameter: {0}")]
    InvalidFamily(String),
    #[error("truncation at support_max = {support_max} leaves tail mass {tail:e}")]
    TruncationLoss { support_max: usize, tail: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("series of length {n} is too short (need at least {required})")]
    SeriesTooShort { n: usize, required: usize },
    #[error("series has zero sample variance")]
    DegenerateSeries,
    #[error("estimate out of range: {0}")]
    EstimateOutOfRange(String),
    #[error("negative binomial moment fit requires overdispersed innovations (implied variance {variance} <= mean {mean})")]
    OverdispersionRequired { mean: f64, variance: f64 },
    #[error("optimizer did not converge within {iterations} iterations")]
    OptimizerFailure { iterations: usize },
    #[error("objective is not finite at the starting point")]
    InvalidStart,
    #[error("series is identically zero; alpha is not identifiable (the fit is the point mass at 0)")]
    AllZeroSeries,
    #[error("penalty weights must be nonnegative and finite (eta1 = {eta1}, eta2 = {eta2})")]
    NegativePenalty { eta1: f64, eta2: f64 },
    #[error("penalty grid is empty")]
    EmptyGrid,
    #[error("input is empty")]
    EmptyInput,
    #[error("too many failed bootstrap replicates: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
}

impl InarError {
    /// Stable variant name, used in CLI diagnostics and reports.
    pub fn name(&self) -> &'static str {
        match self {
            InarError::NonStationary { .. } => "NonStationary",
            InarError::CoefficientOutOfRange { .. } => "CoefficientOutOfRange",
            InarError::InvalidPmf(_) => "InvalidPmf",
            InarError::UnsupportedOrder(_) => "UnsupportedOrder",
            InarError::InvalidFamily(_) => "InvalidFamily",
            InarError::TruncationLoss { .. } => "TruncationLoss",
            InarError::InvalidConfig(_) => "InvalidConfig",
            InarError::SeriesTooShort { .. } => "SeriesTooShort",
            InarError::DegenerateSeries => "DegenerateSeries",
            InarError::EstimateOutOfRange(_) => "EstimateOutOfRange",
            InarError::OverdispersionRequired { .. } => "OverdispersionRequired",
            InarError::OptimizerFailure { .. } => "OptimizerFailure",
            InarError::InvalidStart => "InvalidStart",
            InarError::AllZeroSeries => "AllZeroSeries",
            InarError::NegativePenalty { .. } => "NegativePenalty",
            InarError::EmptyGrid => "EmptyGrid",
            InarError::EmptyInput => "EmptyInput",
            InarError::TooManyFailures { .. } => "TooManyFailures",
        }
    }
}
