//! Domain types shared by every estimator: innovation pmfs, INAR
//! coefficients, parametric innovation families and observed count series.

use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{InarError, Result};

/// Accepted deviation of a user-supplied pmf from unit mass.
pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// Largest tail mass [`family_pmf`] tolerates when truncating a family.
pub const FAMILY_TAIL_TOLERANCE: f64 = 1e-8;

/// Tail mass used when a parametric family is truncated automatically
/// (simulation and likelihood evaluation).
pub const AUTO_TAIL_TOLERANCE: f64 = 1e-10;

/// Hard cap on automatically chosen supports.
pub const MAX_AUTO_SUPPORT: usize = 1_000_000;

/// A probability mass function on `{0, ..., support_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPmf {
    probs: Vec<f64>,
}

impl InnovationPmf {
    /// Validates and renormalizes `probs`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(InarError::InvalidPmf("pmf must have at least one cell".into()));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(InarError::InvalidPmf(format!("entry {k} = {p} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(InarError::InvalidPmf(format!("entries sum to {sum}, expected 1")));
        }
        Ok(Self::normalized(probs))
    }

    /// Point mass at `k`.
    pub fn point_mass(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs }
    }

    /// Uniform pmf on `{0, ..., support_max}`.
    pub fn uniform(support_max: usize) -> Self {
        let m = support_max + 1;
        Self { probs: vec![1.0 / m as f64; m] }
    }

    /// Divides by the total mass. Callers guarantee nonnegative finite
    /// entries with positive sum.
    pub(crate) fn normalized(mut probs: Vec<f64>) -> Self {
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `g(k)`, zero beyond the support.
    #[inline]
    pub fn prob(&self, k: u64) -> f64 {
        usize::try_from(k)
            .ok()
            .and_then(|k| self.probs.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum()
    }

    /// Same pmf with `extra` zero cells appended.
    pub fn padded(&self, extra: usize) -> Self {
        let mut probs = self.probs.clone();
        probs.extend(std::iter::repeat_n(0.0, extra));
        Self { probs }
    }

    /// Total-variation distance `0.5 * sum |g(k) - h(k)|` over the union of supports.
    pub fn total_variation(&self, other: &InnovationPmf) -> f64 {
        let m = self.probs.len().max(other.probs.len());
        0.5 * (0..m as u64)
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }
}

/// INAR coefficients `alpha_1, ..., alpha_p` with `p` in `{1, 2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InarCoefficients {
    alpha: Vec<f64>,
}

impl InarCoefficients {
    pub fn new(alpha: &[f64]) -> Result<Self> {
        if !matches!(alpha.len(), 1 | 2) {
            return Err(InarError::UnsupportedOrder(alpha.len()));
        }
        for (i, &a) in alpha.iter().enumerate() {
            // NaN fails both comparisons.
            if !(a > 0.0 && a < 1.0) {
                return Err(InarError::CoefficientOutOfRange { index: i + 1, value: a });
            }
        }
        let sum: f64 = alpha.iter().sum();
        if sum >= 1.0 {
            return Err(InarError::NonStationary { sum });
        }
        Ok(Self { alpha: alpha.to_vec() })
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sum(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Which parametric innovation family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Poisson,
    Geometric,
    NegBin,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Poisson => "poisson",
            FamilyKind::Geometric => "geometric",
            FamilyKind::NegBin => "negbin",
        }
    }

    /// Names of the family parameters, in the order of [`ParametricFamily::parameters`].
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            FamilyKind::Poisson => &["lambda"],
            FamilyKind::Geometric => &["pi"],
            FamilyKind::NegBin => &["r", "pi"],
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = InarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(FamilyKind::Poisson),
            "geometric" | "geom" => Ok(FamilyKind::Geometric),
            "negbin" | "nbinom" => Ok(FamilyKind::NegBin),
            other => Err(InarError::InvalidFamily(format!("unknown family `{other}`"))),
        }
    }
}

/// Parametric innovation distribution on `{0, 1, 2, ...}`.
///
/// Geometric has pmf `(1 - pi)^k pi`; NegBin has pmf
/// `C(k + r - 1, k) (1 - pi)^k pi^r` and mean `r (1 - pi) / pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParametricFamily {
    Poisson { lambda: f64 },
    Geometric { pi: f64 },
    NegBin { r: f64, pi: f64 },
}

impl ParametricFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            ParametricFamily::Poisson { .. } => FamilyKind::Poisson,
            ParametricFamily::Geometric { .. } => FamilyKind::Geometric,
            ParametricFamily::NegBin { .. } => FamilyKind::NegBin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let ok = match *self {
            ParametricFamily::Poisson { lambda } => positive(lambda),
            ParametricFamily::Geometric { pi } => open_unit(pi),
            ParametricFamily::NegBin { r, pi } => positive(r) && open_unit(pi),
        };
        if ok {
            Ok(())
        } else {
            Err(InarError::InvalidFamily(format!("{self:?} has parameters outside their open domain")))
        }
    }

    pub fn parameters(&self) -> Vec<f64> {
        match *self {
            ParametricFamily::Poisson { lambda } => vec![lambda],
            ParametricFamily::Geometric { pi } => vec![pi],
            ParametricFamily::NegBin { r, pi } => vec![r, pi],
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ParametricFamily::Poisson { lambda } => lambda,
            ParametricFamily::Geometric { pi } => (1.0 - pi) / pi,
            ParametricFamily::NegBin { r, pi } => r * (1.0 - pi) / pi,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ParametricFamily::Poisson { lambda } => lambda,
            ParametricFamily::Geometric { pi } => (1.0 - pi) / (pi * pi),
            ParametricFamily::NegBin { r, pi } => r * (1.0 - pi) / (pi * pi),
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            ParametricFamily::Poisson { lambda } => kf * lambda.ln() - lambda - ln_factorial(k),
            ParametricFamily::Geometric { pi } => pi.ln() + kf * (1.0 - pi).ln(),
            ParametricFamily::NegBin { r, pi } => {
                ln_gamma(kf + r) - ln_gamma(r) - ln_factorial(k) + r * pi.ln() + kf * (1.0 - pi).ln()
            }
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }
}

/// Innovation specification of a validated model.
#[derive(Debug, Clone, PartialEq)]
pub enum Innovations {
    Family(ParametricFamily),
    Pmf(InnovationPmf),
}

impl Innovations {
    pub fn mean(&self) -> f64 {
        match self {
            Innovations::Family(f) => f.mean(),
            Innovations::Pmf(g) => g.mean(),
        }
    }

    /// Finite-support pmf used for simulation; families are truncated at
    /// tail mass [`AUTO_TAIL_TOLERANCE`].
    pub fn to_pmf(&self) -> Result<InnovationPmf> {
        match self {
            Innovations::Family(f) => family_pmf_auto(f, AUTO_TAIL_TOLERANCE, 0),
            Innovations::Pmf(g) => Ok(g.clone()),
        }
    }
}

/// `X_t = alpha_1 o X_{t-1} + ... + alpha_p o X_{t-p} + eps_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct InarModel {
    coeffs: InarCoefficients,
    innovations: Innovations,
}

impl InarModel {
    pub fn new(alpha: &[f64], innovations: Innovations) -> Result<Self> {
        let coeffs = InarCoefficients::new(alpha)?;
        Self::from_parts(coeffs, innovations)
    }

    pub fn from_parts(coeffs: InarCoefficients, innovations: Innovations) -> Result<Self> {
        if let Innovations::Family(f) = &innovations {
            f.validate()?;
        }
        Ok(Self { coeffs, innovations })
    }

    pub fn coefficients(&self) -> &InarCoefficients {
        &self.coeffs
    }

    pub fn innovations(&self) -> &Innovations {
        &self.innovations
    }

    pub fn order(&self) -> usize {
        self.coeffs.order()
    }
}

/// Checks coefficients and innovations without keeping the model.
pub fn validate_model(alpha: &[f64], innovations: &Innovations) -> Result<()> {
    InarModel::new(alpha, innovations.clone()).map(drop)
}

/// Stationary marginal mean `mu_eps / (1 - sum alpha)`.
pub fn stationary_mean(model: &InarModel) -> f64 {
    model.innovations.mean() / (1.0 - model.coeffs.sum())
}

/// Evaluates `family` on `{0, ..., support_max}` and renormalizes.
///
/// Fails with [`InarError::TruncationLoss`] when the discarded tail mass is
/// at least [`FAMILY_TAIL_TOLERANCE`].
pub fn family_pmf(family: &ParametricFamily, support_max: usize) -> Result<InnovationPmf> {
    family.validate()?;
    let probs: Vec<f64> = (0..=support_max as u64).map(|k| family.pmf(k)).collect();
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    if tail >= FAMILY_TAIL_TOLERANCE {
        return Err(InarError::TruncationLoss { support_max, tail });
    }
    Ok(InnovationPmf::normalized(probs))
}

/// Smallest support `M >= min_support` whose tail mass is below `tail_tol`.
pub fn auto_support(family: &ParametricFamily, tail_tol: f64, min_support: usize) -> Result<usize> {
    family_pmf_auto(family, tail_tol, min_support).map(|g| g.support_max())
}

/// Truncates `family` at the smallest `M >= min_support` with tail mass
/// below `tail_tol`, then renormalizes.
pub fn family_pmf_auto(
    family: &ParametricFamily,
    tail_tol: f64,
    min_support: usize,
) -> Result<InnovationPmf> {
    family.validate()?;
    let mut probs = Vec::new();
    let mut cumulative = 0.0;
    for k in 0..=MAX_AUTO_SUPPORT {
        let p = family.pmf(k as u64);
        probs.push(p);
        cumulative += p;
        if k >= min_support && 1.0 - cumulative < tail_tol {
            return Ok(InnovationPmf::normalized(probs));
        }
    }
    Err(InarError::TruncationLoss {
        support_max: MAX_AUTO_SUPPORT,
        tail: (1.0 - cumulative).max(0.0),
    })
}

/// Observed count series `X_1, ..., X_n`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSeries {
    values: Vec<u64>,
}

impl CountSeries {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(InarError::EmptyInput);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> u64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&x| x as f64).sum::<f64>() / self.len() as f64
    }

    /// Sample autocovariance at lag `h` with the biased `1/n` denominator.
    pub fn autocovariance(&self, h: usize) -> f64 {
        let n = self.len();
        if h >= n {
            return 0.0;
        }
        let mean = self.mean();
        let x = &self.values;
        (h..n)
            .map(|t| (x[t] as f64 - mean) * (x[t - h] as f64 - mean))
            .sum::<f64>()
            / n as f64
    }

    /// Sample autocorrelation at lag `h`; `NaN` for a constant series.
    pub fn autocorrelation(&self, h: usize) -> f64 {
        self.autocovariance(h) / self.autocovariance(0)
    }

    /// Contiguous sub-series `values[start..end]`.
    pub fn slice(&self, start: usize, end: usize) -> Result<CountSeries> {
        CountSeries::new(self.values[start..end].to_vec())
    }
}
