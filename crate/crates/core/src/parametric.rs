//! Parametric estimation: Yule–Walker moment fits and conditional maximum
//! likelihood for Poisson, geometric and negative-binomial innovations.

use crate::error::{InarError, Result};
use crate::likelihood::TransitionTally;
use crate::model::{
    family_pmf_auto, CountSeries, FamilyKind, InarCoefficients, InarModel, Innovations, ParametricFamily,
    AUTO_TAIL_TOLERANCE,
};
use crate::optimizer::{logistic, logit, maximize, OptimizerSettings};

/// Shortest series accepted by [`estimate_moments`].
pub const MIN_MOMENT_LENGTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    Moments,
    Ml,
}

impl EstimationMethod {
    pub fn name(self) -> &'static str {
        match self {
            EstimationMethod::Moments => "moments",
            EstimationMethod::Ml => "ml",
        }
    }
}

/// Estimated coefficients and innovation family.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricFit {
    pub alpha_hat: InarCoefficients,
    pub family_hat: ParametricFamily,
    /// Achieved conditional log-likelihood; `None` for moment fits.
    pub loglik: Option<f64>,
    pub method: EstimationMethod,
    pub n_used: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl ParametricFit {
    pub fn model(&self) -> InarModel {
        InarModel::from_parts(self.alpha_hat.clone(), Innovations::Family(self.family_hat))
            .expect("fitted parameters satisfy the model constraints")
    }
}

/// Yule–Walker estimates of `alpha` from biased sample autocorrelations,
/// followed by moment matching of the innovation family.
///
/// The innovation variance for NegBin comes from the stationary variance
/// relation `sigma_eps^2 = sigma_X^2 (1 - a1^2 - a2^2 - 2 a1 a2 rho(1))
/// - mu_X (a1 (1 - a1) + a2 (1 - a2))` (with `a2 = 0` for p = 1).
pub fn estimate_moments(series: &CountSeries, p: usize, family: FamilyKind) -> Result<ParametricFit> {
    if !matches!(p, 1 | 2) {
        return Err(InarError::UnsupportedOrder(p));
    }
    let n = series.len();
    if n < MIN_MOMENT_LENGTH {
        return Err(InarError::SeriesTooShort { n, required: MIN_MOMENT_LENGTH });
    }
    let gamma0 = series.autocovariance(0);
    if gamma0 <= 0.0 {
        return Err(InarError::DegenerateSeries);
    }
    let rho1 = series.autocovariance(1) / gamma0;
    let alpha = if p == 1 {
        vec![rho1]
    } else {
        let rho2 = series.autocovariance(2) / gamma0;
        let denom = 1.0 - rho1 * rho1;
        vec![rho1 * (1.0 - rho2) / denom, (rho2 - rho1 * rho1) / denom]
    };
    let alpha_hat = InarCoefficients::new(&alpha)
        .map_err(|e| InarError::EstimateOutOfRange(format!("Yule-Walker estimate {alpha:?}: {e}")))?;

    let mean_x = series.mean();
    let mu = mean_x * (1.0 - alpha_hat.sum());
    let family_hat = match family {
        FamilyKind::Poisson => ParametricFamily::Poisson { lambda: mu },
        FamilyKind::Geometric => ParametricFamily::Geometric { pi: 1.0 / (1.0 + mu) },
        FamilyKind::NegBin => {
            let (a1, a2) = (alpha[0], alpha.get(1).copied().unwrap_or(0.0));
            let var = gamma0 * (1.0 - a1 * a1 - a2 * a2 - 2.0 * a1 * a2 * rho1)
                - mean_x * (a1 * (1.0 - a1) + a2 * (1.0 - a2));
            if var <= mu {
                return Err(InarError::OverdispersionRequired { mean: mu, variance: var });
            }
            ParametricFamily::NegBin { r: mu * mu / (var - mu), pi: mu / var }
        }
    };
    family_hat
        .validate()
        .map_err(|e| InarError::EstimateOutOfRange(e.to_string()))?;
    Ok(ParametricFit {
        alpha_hat,
        family_hat,
        loglik: None,
        method: EstimationMethod::Moments,
        n_used: n,
        converged: true,
        iterations: 0,
    })
}

/// Conditional log-likelihood with the innovation family truncated at tail
/// mass `1e-10`, and never below the series maximum.
pub fn parametric_loglik(series: &CountSeries, alpha: &InarCoefficients, family: &ParametricFamily) -> Result<f64> {
    let tally = TransitionTally::new(series, alpha.order())?;
    Ok(family_loglik(&tally, alpha.as_slice(), family))
}

fn family_loglik(tally: &TransitionTally, alpha: &[f64], family: &ParametricFamily) -> f64 {
    if alpha.iter().sum::<f64>() >= 1.0 {
        return f64::NEG_INFINITY;
    }
    match family_pmf_auto(family, AUTO_TAIL_TOLERANCE, tally.max_count() as usize) {
        Ok(g) => tally.loglik(alpha, g.probs()),
        Err(_) => f64::NEG_INFINITY,
    }
}

fn encode_family(family: &ParametricFamily) -> Vec<f64> {
    match *family {
        ParametricFamily::Poisson { lambda } => vec![lambda.ln()],
        ParametricFamily::Geometric { pi } => vec![logit(pi)],
        ParametricFamily::NegBin { r, pi } => vec![r.ln(), logit(pi)],
    }
}

fn decode_family(kind: FamilyKind, u: &[f64]) -> ParametricFamily {
    match kind {
        FamilyKind::Poisson => ParametricFamily::Poisson { lambda: u[0].exp() },
        FamilyKind::Geometric => ParametricFamily::Geometric { pi: logistic(u[0]) },
        FamilyKind::NegBin => ParametricFamily::NegBin { r: u[0].exp(), pi: logistic(u[1]) },
    }
}

fn fallback_start(series: &CountSeries, p: usize, kind: FamilyKind) -> (Vec<f64>, ParametricFamily) {
    let alpha = vec![0.5 / p as f64; p];
    let mu = (series.mean() * 0.5).max(0.1);
    let family = match kind {
        FamilyKind::Poisson => ParametricFamily::Poisson { lambda: mu },
        FamilyKind::Geometric => ParametricFamily::Geometric { pi: 1.0 / (1.0 + mu) },
        FamilyKind::NegBin => ParametricFamily::NegBin { r: mu, pi: 0.5 },
    };
    (alpha, family)
}

/// Conditional maximum likelihood over `alpha` and the family parameters.
///
/// Starts from `init`, else from [`estimate_moments`], else from
/// `alpha_i = 0.5 / p` with the family mean matched to the series mean.
/// Coefficients are searched through a componentwise logistic map (points
/// with `sum alpha >= 1` are rejected), positive parameters through `ln`.
pub fn estimate_ml_parametric(
    series: &CountSeries,
    p: usize,
    family: FamilyKind,
    init: Option<&ParametricFit>,
) -> Result<ParametricFit> {
    estimate_ml_parametric_with(series, p, family, init, &OptimizerSettings::default())
}

pub fn estimate_ml_parametric_with(
    series: &CountSeries,
    p: usize,
    family: FamilyKind,
    init: Option<&ParametricFit>,
    settings: &OptimizerSettings,
) -> Result<ParametricFit> {
    let tally = TransitionTally::new(series, p)?;
    let (alpha0, family0) = match init {
        Some(fit) if fit.alpha_hat.order() == p && fit.family_hat.kind() == family => {
            (fit.alpha_hat.as_slice().to_vec(), fit.family_hat)
        }
        Some(_) => {
            return Err(InarError::InvalidConfig("initial fit does not match the requested order and family".into()))
        }
        None => match estimate_moments(series, p, family) {
            Ok(fit) => (fit.alpha_hat.as_slice().to_vec(), fit.family_hat),
            Err(_) => fallback_start(series, p, family),
        },
    };

    let mut start: Vec<f64> = alpha0.iter().map(|&a| logit(a)).collect();
    start.extend(encode_family(&family0));
    let objective = |theta: &[f64]| {
        let alpha: Vec<f64> = theta[..p].iter().map(|&u| logistic(u)).collect();
        let fam = decode_family(family, &theta[p..]);
        if fam.validate().is_err() {
            return f64::NEG_INFINITY;
        }
        family_loglik(&tally, &alpha, &fam)
    };
    let best = maximize(objective, &start, settings)?;
    if !best.converged {
        return Err(InarError::OptimizerFailure { iterations: best.iterations });
    }
    let alpha: Vec<f64> = best.argmax[..p].iter().map(|&u| logistic(u)).collect();
    let alpha_hat = InarCoefficients::new(&alpha).map_err(|e| InarError::EstimateOutOfRange(e.to_string()))?;
    let family_hat = decode_family(family, &best.argmax[p..]);
    Ok(ParametricFit {
        alpha_hat,
        family_hat,
        loglik: Some(best.value),
        method: EstimationMethod::Ml,
        n_used: series.len(),
        converged: best.converged,
        iterations: best.iterations,
    })
}
