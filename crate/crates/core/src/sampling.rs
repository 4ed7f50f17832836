//! Random generation: binomial thinning, innovation draws and INAR(p)
//! trajectories.
//!
//! Every random stream is a [`ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`. Parallel callers derive stream `i` from a
//! master seed with [`split_seed`], a SplitMix64 mix of `(master, i)`, so a
//! stream's output never depends on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{InarError, Result};
use crate::model::{CountSeries, InarModel, InnovationPmf};

/// Generator used throughout the crate.
pub type InarRng = ChaCha8Rng;

pub const DEFAULT_BURN_IN: usize = 500;

pub fn rng_from_seed(seed: u64) -> InarRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` derived from `master`:
/// `splitmix64(master ^ splitmix64(stream))`.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Draws `alpha o x`, i.e. a Binomial(x, alpha) variate.
///
/// # Panics
/// If `alpha` is outside `[0, 1]`.
pub fn binomial_thin<R: Rng + ?Sized>(x: u64, alpha: f64, rng: &mut R) -> u64 {
    assert!((0.0..=1.0).contains(&alpha), "thinning probability {alpha} outside [0, 1]");
    if x == 0 || alpha == 0.0 {
        return 0;
    }
    if alpha == 1.0 {
        return x;
    }
    Binomial::new(x, alpha).expect("valid binomial parameters").sample(rng)
}

/// Inverse-CDF draw from `pmf`.
pub fn draw_innovation<R: Rng + ?Sized>(pmf: &InnovationPmf, rng: &mut R) -> u64 {
    InnovationSampler::new(pmf).sample(rng)
}

/// Cumulative table for repeated inverse-CDF draws.
#[derive(Debug, Clone)]
pub struct InnovationSampler {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl InnovationSampler {
    pub fn new(pmf: &InnovationPmf) -> Self {
        let cdf: Vec<f64> = pmf
            .probs()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let last_positive = pmf.probs().iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self { cdf, last_positive }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        // first k with cdf[k] > u; rounding in the cumulative sums can leave
        // u above the final entry, which maps to the last positive cell
        let k = self.cdf.partition_point(|&c| c <= u);
        k.min(self.last_positive) as u64
    }
}

/// Length, burn-in and seed of a simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, burn_in: DEFAULT_BURN_IN, seed }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// Simulates `config.n` observations of `model`.
///
/// The `p` pre-sample values are independent innovation draws; the first
/// `burn_in` generated values are discarded. Parametric innovations are
/// truncated at tail mass `1e-10` before sampling.
pub fn simulate_inar(model: &InarModel, config: &SimulationConfig) -> Result<CountSeries> {
    if config.n == 0 {
        return Err(InarError::InvalidConfig("series length n must be at least 1".into()));
    }
    let pmf = model.innovations().to_pmf()?;
    let mut rng = rng_from_seed(config.seed);
    let values = simulate_with_pmf(model.coefficients().as_slice(), &pmf, config.n, config.burn_in, &mut rng);
    CountSeries::new(values)
}

pub(crate) fn simulate_with_pmf<R: Rng + ?Sized>(
    alpha: &[f64],
    pmf: &InnovationPmf,
    n: usize,
    burn_in: usize,
    rng: &mut R,
) -> Vec<u64> {
    let p = alpha.len();
    let sampler = InnovationSampler::new(pmf);
    let total = p + burn_in + n;
    let mut x: Vec<u64> = Vec::with_capacity(total);
    for _ in 0..p {
        x.push(sampler.sample(rng));
    }
    for t in p..total {
        let mut next = 0;
        for (i, &a) in alpha.iter().enumerate() {
            next += binomial_thin(x[t - 1 - i], a, rng);
        }
        next += sampler.sample(rng);
        x.push(next);
    }
    x.split_off(p + burn_in)
}
