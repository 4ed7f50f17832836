//! Exact transition probabilities and the conditional log-likelihood of
//! INAR(1) and INAR(2) models.
//!
//! Given lags `(l_1, ..., l_p)` the next count is `S + eps` where
//! `S = sum_i alpha_i o l_i` is a sum of independent binomials. Its pmf is
//! assembled directly from log-space binomial terms and then convolved with
//! the innovation pmf `g`, which is zero beyond its support.

use std::collections::BTreeMap;

use statrs::function::factorial::ln_factorial;

use crate::error::{InarError, Result};
use crate::model::{CountSeries, InarCoefficients, InnovationPmf};

/// The `p` observations preceding a transition, most recent first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionContext {
    lags: Vec<u64>,
}

impl TransitionContext {
    pub fn new(lags: Vec<u64>) -> Self {
        Self { lags }
    }

    pub fn lags(&self) -> &[u64] {
        &self.lags
    }
}

/// Binomial(n, a) probabilities for `j` in `0..=min(n, upto)`.
fn thinning_pmf(n: u64, a: f64, upto: u64) -> Vec<f64> {
    let top = n.min(upto);
    if n == 0 {
        return vec![1.0];
    }
    let ln_a = a.ln();
    let ln_b = (-a).ln_1p();
    let ln_n = ln_factorial(n);
    (0..=top)
        .map(|j| {
            let ln_c = ln_n - ln_factorial(j) - ln_factorial(n - j);
            (ln_c + j as f64 * ln_a + (n - j) as f64 * ln_b).exp()
        })
        .collect()
}

/// Pmf of `sum_i alpha_i o lags_i` at `s = 0..=min(upto, sum lags)`.
pub(crate) fn thinning_sum_pmf(alpha: &[f64], lags: &[u64], upto: u64) -> Vec<f64> {
    debug_assert_eq!(alpha.len(), lags.len());
    match lags {
        [l1] => thinning_pmf(*l1, alpha[0], upto),
        [l1, l2] => {
            let b1 = thinning_pmf(*l1, alpha[0], upto);
            let b2 = thinning_pmf(*l2, alpha[1], upto);
            let top = (b1.len() + b2.len() - 2).min(upto as usize);
            let mut w = vec![0.0; top + 1];
            for (j1, p1) in b1.iter().enumerate() {
                for (j2, p2) in b2.iter().enumerate().take(top + 1 - j1.min(top + 1)) {
                    w[j1 + j2] += p1 * p2;
                }
            }
            w
        }
        _ => panic!("INAR order {} is not supported", lags.len()),
    }
}

fn transition_prob_raw(alpha: &[f64], g: &[f64], k: u64, lags: &[u64]) -> f64 {
    let w = thinning_sum_pmf(alpha, lags, k);
    let support_max = (g.len() - 1) as u64;
    w.iter()
        .enumerate()
        .filter_map(|(s, ws)| {
            let e = k - s as u64;
            (e <= support_max).then(|| ws * g[e as usize])
        })
        .sum()
}

/// `P(X_t = k | lags)` for the INAR model with coefficients `alpha` and
/// innovation pmf `g`.
///
/// # Panics
/// If the context length differs from the model order.
pub fn transition_pmf(alpha: &InarCoefficients, g: &InnovationPmf, k: u64, ctx: &TransitionContext) -> f64 {
    assert_eq!(ctx.lags().len(), alpha.order(), "context length must equal the model order");
    transition_prob_raw(alpha.as_slice(), g.probs(), k, ctx.lags())
}

/// `sum_{t > p} log P(X_t | X_{t-1}, ..., X_{t-p})`, conditioning on the
/// first `p` observations. Returns `f64::NEG_INFINITY` when any transition
/// has probability zero.
pub fn conditional_loglik(alpha: &InarCoefficients, g: &InnovationPmf, series: &CountSeries) -> Result<f64> {
    let tally = TransitionTally::new(series, alpha.order())?;
    Ok(tally.loglik(alpha.as_slice(), g.probs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Transition {
    k: u64,
    lags: [u64; 2],
}

/// Distinct `(X_t, lags)` transitions of a series with multiplicities.
///
/// Count data repeat the same few transitions many times, so likelihood
/// evaluation cost scales with the number of distinct transitions rather
/// than the series length.
#[derive(Debug, Clone)]
pub struct TransitionTally {
    order: usize,
    entries: Vec<(Transition, f64)>,
    n_transitions: usize,
    max_count: u64,
    // distinct values taken by any lag, ascending
    lag_values: Vec<u64>,
}

impl TransitionTally {
    /// Fails with [`InarError::SeriesTooShort`] when `n <= p`.
    pub fn new(series: &CountSeries, order: usize) -> Result<Self> {
        if !matches!(order, 1 | 2) {
            return Err(InarError::UnsupportedOrder(order));
        }
        let x = series.values();
        if x.len() <= order {
            return Err(InarError::SeriesTooShort { n: x.len(), required: order + 1 });
        }
        let mut counts: BTreeMap<Transition, usize> = BTreeMap::new();
        for t in order..x.len() {
            let mut lags = [0; 2];
            for (i, lag) in lags.iter_mut().enumerate().take(order) {
                *lag = x[t - 1 - i];
            }
            *counts.entry(Transition { k: x[t], lags }).or_default() += 1;
        }
        let mut lag_values: Vec<u64> = counts.keys().flat_map(|tr| tr.lags[..order].to_vec()).collect();
        lag_values.sort_unstable();
        lag_values.dedup();
        Ok(Self {
            order,
            lag_values,
            entries: counts.into_iter().map(|(tr, c)| (tr, c as f64)).collect(),
            n_transitions: x.len() - order,
            max_count: series.max(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of conditional transitions, `n - p`.
    pub fn n_transitions(&self) -> usize {
        self.n_transitions
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    /// Conditional log-likelihood for raw coefficients and pmf cells.
    pub fn loglik(&self, alpha: &[f64], g: &[f64]) -> f64 {
        let rows: Vec<BinomialRows> = alpha.iter().map(|&a| BinomialRows::new(&self.lag_values, a)).collect();
        let top = g.len() - 1;
        let mut total = 0.0;
        for (tr, count) in &self.entries {
            let k = tr.k as usize;
            let r1 = rows[0].row(tr.lags[0]);
            let p = if self.order == 1 {
                // j ranges over thinning outcomes with k - j inside the support
                let lo = k.saturating_sub(top);
                let hi = k.min(r1.len() - 1);
                (lo..=hi).map(|j| r1[j] * g[k - j]).sum::<f64>()
            } else {
                let r2 = rows[1].row(tr.lags[1]);
                let mut acc = 0.0;
                for (j1, p1) in r1.iter().enumerate().take(k + 1) {
                    let rest = k - j1;
                    let lo = rest.saturating_sub(top);
                    let hi = rest.min(r2.len() - 1);
                    if lo > hi {
                        continue;
                    }
                    acc += p1 * (lo..=hi).map(|j2| r2[j2] * g[rest - j2]).sum::<f64>();
                }
                acc
            };
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += count * p.ln();
        }
        total
    }

    /// Precomputes thinning weights for fixed `alpha` so the likelihood can
    /// be re-evaluated cheaply for many pmfs on `{0, ..., support_max}`.
    pub fn weights(&self, alpha: &[f64], support_max: usize) -> ThinningWeights {
        let mut rows = Vec::with_capacity(self.entries.len());
        let mut values = Vec::new();
        for (tr, count) in &self.entries {
            let w = thinning_sum_pmf(alpha, &tr.lags[..self.order], tr.k);
            // s must satisfy k - s <= support_max
            let s_lo = tr.k.saturating_sub(support_max as u64) as usize;
            let start = values.len();
            if s_lo < w.len() {
                values.extend_from_slice(&w[s_lo..]);
            }
            rows.push(WeightRow {
                start,
                len: values.len() - start,
                top_cell: tr.k as usize - s_lo,
                count: *count,
            });
        }
        ThinningWeights { rows, values, support_max }
    }
}

/// Full Binomial(l, a) pmfs for a set of trial counts `l`.
struct BinomialRows<'a> {
    lags: &'a [u64],
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl<'a> BinomialRows<'a> {
    fn new(lags: &'a [u64], a: f64) -> Self {
        let mut offsets = Vec::with_capacity(lags.len() + 1);
        let mut values = Vec::new();
        for &l in lags {
            offsets.push(values.len());
            values.extend(thinning_pmf(l, a, l));
        }
        offsets.push(values.len());
        Self { lags, offsets, values }
    }

    fn row(&self, l: u64) -> &[f64] {
        let i = self.lags.binary_search(&l).expect("lag value present in the tally");
        &self.values[self.offsets[i]..self.offsets[i + 1]]
    }
}

#[derive(Debug, Clone)]
struct WeightRow {
    start: usize,
    len: usize,
    // innovation cell paired with the first stored weight; later weights
    // pair with successively smaller cells
    top_cell: usize,
    count: f64,
}

/// Thinning weights of a [`TransitionTally`] at fixed coefficients.
#[derive(Debug, Clone)]
pub struct ThinningWeights {
    rows: Vec<WeightRow>,
    values: Vec<f64>,
    support_max: usize,
}

impl ThinningWeights {
    pub fn support_max(&self) -> usize {
        self.support_max
    }

    /// Row-major dense weights (one row of `support_max + 1` cells per
    /// distinct transition) and the transition counts.
    pub(crate) fn dense(&self) -> (Vec<f64>, Vec<f64>) {
        let width = self.support_max + 1;
        let mut dense = vec![0.0; self.rows.len() * width];
        for (r, row) in self.rows.iter().enumerate() {
            for (i, w) in self.values[row.start..row.start + row.len].iter().enumerate() {
                dense[r * width + row.top_cell - i] = *w;
            }
        }
        (dense, self.rows.iter().map(|r| r.count).collect())
    }

    /// Conditional log-likelihood for pmf cells `g` (length `support_max + 1`).
    pub fn loglik(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.support_max + 1);
        let mut total = 0.0;
        for row in &self.rows {
            let w = &self.values[row.start..row.start + row.len];
            let p: f64 = w.iter().enumerate().map(|(i, wi)| wi * g[row.top_cell - i]).sum();
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += row.count * p.ln();
        }
        total
    }
}
