//! Model-based INAR bootstrap: fit the chosen specification, simulate `B`
//! series of the original length from the fitted model, re-estimate each and
//! summarize the replicate estimates by percentile intervals.
//!
//! Replicate `b` (1-based) is simulated from stream
//! `split_seed(spec.seed, b)`, so results do not depend on how replicates
//! are scheduled across threads.

use crate::error::{InarError, Result};
use crate::model::{CountSeries, FamilyKind, InarModel, Innovations, InnovationPmf};
use crate::parametric::{estimate_ml_parametric, estimate_moments, ParametricFit};
use crate::sampling::{rng_from_seed, simulate_with_pmf, split_seed, DEFAULT_BURN_IN};
use crate::semiparametric::{self, Penalty, SemiparametricFit};

/// Parametric family or free innovation pmf (optionally penalized).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BootstrapMode {
    Parametric(FamilyKind),
    Semiparametric { penalty: Option<Penalty> },
}

/// Estimator applied to the original series and to every replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicateEstimator {
    Moments,
    Ml,
    Semiparametric,
}

impl ReplicateEstimator {
    pub fn name(self) -> &'static str {
        match self {
            ReplicateEstimator::Moments => "moments",
            ReplicateEstimator::Ml => "ml",
            ReplicateEstimator::Semiparametric => "semiparametric",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSpec {
    pub mode: BootstrapMode,
    /// Number of replicates `B`.
    pub replicates: usize,
    pub seed: u64,
    pub estimator: ReplicateEstimator,
    /// Percentile interval level in `(0, 1)`.
    pub level: f64,
    pub burn_in: usize,
}

impl BootstrapSpec {
    pub const DEFAULT_LEVEL: f64 = 0.95;

    /// Parametric bootstrap; replicates are refitted by conditional ML.
    pub fn parametric(family: FamilyKind, replicates: usize, seed: u64) -> Self {
        Self {
            mode: BootstrapMode::Parametric(family),
            replicates,
            seed,
            estimator: ReplicateEstimator::Ml,
            level: Self::DEFAULT_LEVEL,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn semiparametric(penalty: Option<Penalty>, replicates: usize, seed: u64) -> Self {
        Self {
            mode: BootstrapMode::Semiparametric { penalty },
            replicates,
            seed,
            estimator: ReplicateEstimator::Semiparametric,
            level: Self::DEFAULT_LEVEL,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_estimator(mut self, estimator: ReplicateEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.level = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(InarError::InvalidConfig("number of replicates B must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(InarError::InvalidConfig(format!("level {} must lie in (0, 1)", self.level)));
        }
        let coherent = matches!(
            (self.mode, self.estimator),
            (BootstrapMode::Parametric(_), ReplicateEstimator::Moments | ReplicateEstimator::Ml)
                | (BootstrapMode::Semiparametric { .. }, ReplicateEstimator::Semiparametric)
        );
        if !coherent {
            return Err(InarError::InvalidConfig(format!(
                "estimator `{}` does not match the bootstrap mode",
                self.estimator.name()
            )));
        }
        if let BootstrapMode::Semiparametric { penalty: Some(pen) } = self.mode {
            Penalty::new(pen.eta1, pen.eta2)?;
        }
        Ok(())
    }
}

/// Fit of the original series.
#[derive(Debug, Clone, PartialEq)]
pub enum PointFit {
    Parametric(ParametricFit),
    Semiparametric(SemiparametricFit),
}

impl PointFit {
    pub fn model(&self) -> InarModel {
        match self {
            PointFit::Parametric(fit) => fit.model(),
            PointFit::Semiparametric(fit) => {
                InarModel::from_parts(fit.alpha_hat.clone(), Innovations::Pmf(fit.g_hat.clone()))
                    .expect("fitted parameters satisfy the model constraints")
            }
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            PointFit::Parametric(fit) => fit.converged,
            PointFit::Semiparametric(fit) => fit.converged,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            PointFit::Parametric(fit) => fit.iterations,
            PointFit::Semiparametric(fit) => fit.iterations,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        match self {
            PointFit::Parametric(fit) => fit.alpha_hat.as_slice(),
            PointFit::Semiparametric(fit) => fit.alpha_hat.as_slice(),
        }
    }
}

/// Percentile interval of one summarized parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterInterval {
    pub name: String,
    /// Value on the original series.
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub point: PointFit,
    /// Column names of `replicates`: `alpha1[, alpha2]`, then the family
    /// parameters, or the innovation mean `mu_eps` and the cells
    /// `g0, ..., gM` of the original fit's support.
    pub parameter_names: Vec<String>,
    /// Summaries of the successful replicates, in replicate order.
    pub replicates: Vec<Vec<f64>>,
    /// 1-based index of each row of `replicates`.
    pub replicate_ids: Vec<usize>,
    pub ci: Vec<ParameterInterval>,
    pub failed: usize,
    pub level: f64,
}

/// Type-7 empirical quantiles at `(1 - level) / 2` and `1 - (1 - level) / 2`.
pub fn percentile_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(InarError::EmptyInput);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(InarError::InvalidConfig(format!("level {level} must lie in (0, 1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_type7(&sorted, tail), quantile_type7(&sorted, 1.0 - tail)))
}

fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn estimate(series: &CountSeries, p: usize, spec: &BootstrapSpec) -> Result<PointFit> {
    match (spec.mode, spec.estimator) {
        (BootstrapMode::Parametric(family), ReplicateEstimator::Moments) => {
            estimate_moments(series, p, family).map(PointFit::Parametric)
        }
        (BootstrapMode::Parametric(family), _) => {
            estimate_ml_parametric(series, p, family, None).map(PointFit::Parametric)
        }
        (BootstrapMode::Semiparametric { penalty }, _) => {
            semiparametric::fit(series, p, penalty.unwrap_or(Penalty::NONE), None).map(PointFit::Semiparametric)
        }
    }
}

fn parameter_names(point: &PointFit) -> Vec<String> {
    let mut names: Vec<String> = (1..=point.alpha().len()).map(|i| format!("alpha{i}")).collect();
    match point {
        PointFit::Parametric(fit) => {
            names.extend(fit.family_hat.kind().parameter_names().iter().map(|s| s.to_string()));
        }
        PointFit::Semiparametric(fit) => {
            names.push("mu_eps".into());
            names.extend((0..=fit.g_hat.support_max()).map(|k| format!("g{k}")));
        }
    }
    names
}

/// Summary vector of a fit, laid out as [`parameter_names`] of the point
/// fit. Pmf cells beyond the point fit's support are not summarized.
fn summarize(fit: &PointFit, support_max: usize) -> Vec<f64> {
    let mut v = fit.alpha().to_vec();
    match fit {
        PointFit::Parametric(f) => v.extend(f.family_hat.parameters()),
        PointFit::Semiparametric(f) => {
            v.push(f.g_hat.mean());
            v.extend((0..=support_max as u64).map(|k| f.g_hat.prob(k)));
        }
    }
    v
}

/// Runs the bootstrap described by `spec`.
///
/// Errors on the original series are fatal. Replicates whose estimation
/// fails or does not converge are counted in `failed` and left out of the
/// intervals; more than
/// `B / 2` failures raise [`InarError::TooManyFailures`].
pub fn inar_bootstrap(series: &CountSeries, p: usize, spec: &BootstrapSpec) -> Result<BootstrapResult> {
    spec.validate()?;
    let point = estimate(series, p, spec)?;
    let model = point.model();
    let pmf: InnovationPmf = model.innovations().to_pmf()?;
    let support_max = match &point {
        PointFit::Semiparametric(f) => f.g_hat.support_max(),
        PointFit::Parametric(_) => 0,
    };
    let n = series.len();

    let replicate = |b: usize| -> Result<Vec<f64>> {
        let mut rng = rng_from_seed(split_seed(spec.seed, b as u64));
        let values = simulate_with_pmf(model.coefficients().as_slice(), &pmf, n, spec.burn_in, &mut rng);
        let fit = estimate(&CountSeries::new(values)?, p, spec)?;
        if !fit.converged() {
            return Err(InarError::OptimizerFailure { iterations: fit.iterations() });
        }
        Ok(summarize(&fit, support_max))
    };
    let ids: Vec<usize> = (1..=spec.replicates).collect();
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        ids.par_iter().map(|&b| replicate(b)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<Vec<f64>>> = ids.iter().map(|&b| replicate(b)).collect();

    let mut replicates = Vec::with_capacity(spec.replicates);
    let mut replicate_ids = Vec::with_capacity(spec.replicates);
    let mut failed = 0;
    for (b, outcome) in ids.into_iter().zip(outcomes) {
        match outcome {
            Ok(row) => {
                replicates.push(row);
                replicate_ids.push(b);
            }
            Err(_) => failed += 1,
        }
    }
    if 2 * failed > spec.replicates {
        return Err(InarError::TooManyFailures { failed, total: spec.replicates });
    }

    let names = parameter_names(&point);
    let estimates = summarize(&point, support_max);
    let ci = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column: Vec<f64> = replicates.iter().map(|row| row[j]).collect();
            let (lo, hi) = percentile_ci(&column, spec.level)?;
            Ok(ParameterInterval { name: name.clone(), estimate: estimates[j], lo, hi })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BootstrapResult {
        point,
        parameter_names: names,
        replicates,
        replicate_ids,
        ci,
        failed,
        level: spec.level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParametricFamily;
    use crate::sampling::{simulate_inar, SimulationConfig};
    use proptest::prelude::*;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile_ci(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5).unwrap(), (2.0, 4.0));
        assert_eq!(percentile_ci(&[7.0], 0.9).unwrap(), (7.0, 7.0));
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        let (lo, hi) = percentile_ci(&grid, 0.95).unwrap();
        assert!((lo - 2.5).abs() < 1e-12 && (hi - 97.5).abs() < 1e-12);
        assert_eq!(percentile_ci(&[], 0.9), Err(InarError::EmptyInput));
        assert!(percentile_ci(&[1.0], 1.0).is_err());
    }

    #[test]
    fn spec_coherence() {
        let s = BootstrapSpec::parametric(FamilyKind::Poisson, 10, 1).with_estimator(ReplicateEstimator::Semiparametric);
        assert!(matches!(s.validate(), Err(InarError::InvalidConfig(_))));
        let s = BootstrapSpec::semiparametric(None, 10, 1).with_estimator(ReplicateEstimator::Ml);
        assert!(s.validate().is_err());
        assert!(BootstrapSpec::parametric(FamilyKind::Poisson, 0, 1).validate().is_err());
        let s = BootstrapSpec::semiparametric(Some(Penalty { eta1: -1.0, eta2: 0.0 }), 10, 1);
        assert!(matches!(s.validate(), Err(InarError::NegativePenalty { .. })));
    }

    fn poisson_series(n: usize, seed: u64) -> CountSeries {
        let model = InarModel::new(&[0.5], Innovations::Family(ParametricFamily::Poisson { lambda: 1.0 })).unwrap();
        simulate_inar(&model, &SimulationConfig::new(n, seed)).unwrap()
    }

    #[test]
    fn single_replicate_gives_degenerate_intervals() {
        let s = poisson_series(300, 4);
        let r = inar_bootstrap(&s, 1, &BootstrapSpec::parametric(FamilyKind::Poisson, 1, 3)).unwrap();
        assert_eq!(r.replicates.len(), 1);
        for ci in &r.ci {
            assert_eq!(ci.lo, ci.hi);
        }
        assert_eq!(r.parameter_names, vec!["alpha1", "lambda"]);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = poisson_series(200, 5);
        let spec = BootstrapSpec::semiparametric(None, 8, 99);
        let a = inar_bootstrap(&s, 1, &spec).unwrap();
        let b = inar_bootstrap(&s, 1, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.parameter_names[0], "alpha1");
        assert_eq!(a.parameter_names[1], "mu_eps");
        assert_eq!(a.replicates[0].len(), a.parameter_names.len());
    }

    #[test]
    fn too_many_failures() {
        // alpha close to zero and equidispersed innovations: negbin moment
        // fits on replicates fail on negative autocorrelation or missing
        // overdispersion most of the time
        let model = InarModel::new(&[0.05], Innovations::Family(ParametricFamily::NegBin { r: 50.0, pi: 0.97 })).unwrap();
        let mut checked = false;
        for seed in 0..50 {
            let s = simulate_inar(&model, &SimulationConfig::new(30, seed)).unwrap();
            let spec = BootstrapSpec::parametric(FamilyKind::NegBin, 40, seed).with_estimator(ReplicateEstimator::Moments);
            match inar_bootstrap(&s, 1, &spec) {
                Err(InarError::TooManyFailures { failed, total }) => {
                    assert!(2 * failed > total);
                    checked = true;
                    break;
                }
                _ => continue,
            }
        }
        assert!(checked);
    }

    #[test]
    fn poisson_bootstrap_mean_tracks_point_estimate() {
        let s = poisson_series(2000, 21);
        let r = inar_bootstrap(&s, 1, &BootstrapSpec::parametric(FamilyKind::Poisson, 500, 8)).unwrap();
        let j = r.parameter_names.iter().position(|n| n == "lambda").unwrap();
        let lambda_hat = r.ci[j].estimate;
        let mean = r.replicates.iter().map(|row| row[j]).sum::<f64>() / r.replicates.len() as f64;
        assert!((mean - lambda_hat).abs() <= 0.1 * lambda_hat, "{mean} vs {lambda_hat}");
        for ci in &r.ci {
            assert!(ci.lo <= ci.hi);
        }
        assert_eq!(r.replicates.len() + r.failed, 500);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn thread_count_does_not_matter() {
        let s = poisson_series(150, 6);
        let spec = BootstrapSpec::semiparametric(Some(Penalty { eta1: 0.1, eta2: 0.0 }), 12, 5);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| inar_bootstrap(&s, 1, &spec).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn wider_level_never_narrows(values in prop::collection::vec(-100.0f64..100.0, 1..60), a in 0.05f64..0.9, d in 0.01f64..0.09) {
            let (lo1, hi1) = percentile_ci(&values, a).unwrap();
            let (lo2, hi2) = percentile_ci(&values, a + d).unwrap();
            prop_assert!(lo1 <= hi1);
            prop_assert!(lo2 <= lo1 && hi2 >= hi1);
        }
    }
}
