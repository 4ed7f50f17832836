//! Semiparametric maximum likelihood: joint estimation of the INAR
//! coefficients and an unrestricted innovation pmf on `{0, ..., max(X)}`,
//! with an optional roughness penalty on the pmf and a temporal validation
//! split for choosing the penalty weights.
//!
//! The maximized objective is
//!
//! ```text
//! loglik(alpha, g) - n * (eta1 * sum_k (g(k+1) - g(k))^2
//!                       + eta2 * sum_k (g(k+2) - 2 g(k+1) + g(k))^2)
//! ```
//!
//! The search profiles out `g`. For fixed `alpha` the objective is concave
//! in `g`, and an active-set Newton method on the probability simplex finds
//! its maximizer, including cells that sit exactly at zero. The profiled
//! objective is then maximized over `alpha` in logistic coordinates by
//! Nelder–Mead, started from the best point of a coarse coefficient scan.
//! A joint direct search in log-odds coordinates is not used: it cannot
//! move cells whose optimum is zero far enough, and in small samples it
//! stalls well below the maximum.

use crate::error::{InarError, Result};
use crate::likelihood::TransitionTally;
use crate::model::{CountSeries, FamilyKind, InarCoefficients, InnovationPmf};
use crate::optimizer::{logistic, logit, maximize, OptimizerSettings};
use crate::parametric::estimate_moments;
use nalgebra::{DMatrix, DVector};

/// Weight of the uniform pmf in the default starting value of `g`.
pub const INIT_SHRINKAGE: f64 = 0.1;

/// Roughness penalty weights `(eta1, eta2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub eta1: f64,
    pub eta2: f64,
}

impl Penalty {
    pub const NONE: Penalty = Penalty { eta1: 0.0, eta2: 0.0 };

    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(eta1) && ok(eta2) {
            Ok(Self { eta1, eta2 })
        } else {
            Err(InarError::NegativePenalty { eta1, eta2 })
        }
    }

    pub fn is_zero(&self) -> bool {
        self.eta1 == 0.0 && self.eta2 == 0.0
    }

    /// `n * (eta1 * first + eta2 * second)` for the roughness of `g`.
    pub fn value(&self, g: &[f64], n: usize) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let r = roughness(g);
        n as f64 * (self.eta1 * r.first + self.eta2 * r.second)
    }
}

/// Sums of squared first and second differences of a pmf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roughness {
    pub first: f64,
    pub second: f64,
}

pub fn roughness(g: &[f64]) -> Roughness {
    let first = g.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let second = g.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).powi(2)).sum();
    Roughness { first, second }
}

/// Starting point for the semiparametric search.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiparametricInit {
    pub alpha: InarCoefficients,
    pub g: InnovationPmf,
}

impl SemiparametricInit {
    /// Yule–Walker `alpha` (falling back to `0.5 / p` per coefficient) and
    /// the empirical distribution of the series mixed with the uniform pmf
    /// on `{0, ..., max(X)}` at weight [`INIT_SHRINKAGE`].
    pub fn default_for(series: &CountSeries, p: usize) -> Result<Self> {
        let alpha = match estimate_moments(series, p, FamilyKind::Poisson) {
            Ok(fit) => fit.alpha_hat,
            Err(_) => InarCoefficients::new(&vec![0.5 / p as f64; p])?,
        };
        let m = series.max() as usize;
        let mut counts = vec![0.0; m + 1];
        for &x in series.values() {
            counts[x as usize] += 1.0;
        }
        let n = series.len() as f64;
        let uniform = 1.0 / (m + 1) as f64;
        let probs = counts
            .iter()
            .map(|c| (1.0 - INIT_SHRINKAGE) * c / n + INIT_SHRINKAGE * uniform)
            .collect();
        Ok(Self { alpha, g: InnovationPmf::normalized(probs) })
    }
}

/// Result of a (penalized) semiparametric fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiparametricFit {
    pub alpha_hat: InarCoefficients,
    /// Innovation pmf on `{0, ..., max(series)}`.
    pub g_hat: InnovationPmf,
    /// Conditional log-likelihood at the estimate (without penalty).
    pub loglik: f64,
    /// Maximized objective: `loglik` minus the roughness penalty.
    pub objective: f64,
    pub penalty: Penalty,
    pub converged: bool,
    /// Profile evaluations (inner pmf solves) spent on the search.
    pub evaluations: usize,
    /// Nelder–Mead iterations of the coefficient search.
    pub iterations: usize,
}

/// Semiparametric maximum likelihood estimate.
pub fn estimate_semiparametric(
    series: &CountSeries,
    p: usize,
    init: Option<&SemiparametricInit>,
) -> Result<SemiparametricFit> {
    fit(series, p, Penalty::NONE, init)
}

/// Roughness-penalized semiparametric estimate.
pub fn estimate_penalized(series: &CountSeries, p: usize, eta1: f64, eta2: f64) -> Result<SemiparametricFit> {
    fit(series, p, Penalty::new(eta1, eta2)?, None)
}

/// Penalized estimate from an explicit starting point; with
/// `Penalty::NONE` this is [`estimate_semiparametric`].
pub fn fit(
    series: &CountSeries,
    p: usize,
    penalty: Penalty,
    init: Option<&SemiparametricInit>,
) -> Result<SemiparametricFit> {
    let penalty = Penalty::new(penalty.eta1, penalty.eta2)?;
    let tally = TransitionTally::new(series, p)?;
    let m = series.max() as usize;
    if m == 0 {
        return Err(InarError::AllZeroSeries);
    }
    let init = match init {
        Some(i) => {
            if i.alpha.order() != p {
                return Err(InarError::InvalidConfig(format!(
                    "initial coefficients have order {}, expected {p}",
                    i.alpha.order()
                )));
            }
            i.clone()
        }
        None => SemiparametricInit::default_for(series, p)?,
    };
    let n = series.len();
    let penalty_hessian =
        (difference_gram(m + 1, 1) * penalty.eta1 + difference_gram(m + 1, 2) * penalty.eta2) * (2.0 * n as f64);
    let search = Search { tally: &tally, p, m, penalty, start_g: fit_to_support(&init.g, m), penalty_hessian };
    search.run(init.alpha.as_slice())
}

/// Restricts (or zero-extends) a start pmf to `{0, ..., m}` and lifts zero
/// cells so that every transition has positive probability at the start.
fn fit_to_support(g: &InnovationPmf, m: usize) -> Vec<f64> {
    let uniform = 1.0 / (m + 1) as f64;
    let mut cells: Vec<f64> = (0..=m as u64).map(|k| g.prob(k)).collect();
    if cells.iter().any(|&c| c <= 0.0) {
        for c in cells.iter_mut() {
            *c = (1.0 - INIT_SHRINKAGE) * *c + INIT_SHRINKAGE * uniform;
        }
    }
    let s: f64 = cells.iter().sum();
    cells.iter().map(|c| c / s).collect()
}

/// Upper bound on Newton iterations of one inner pmf solve.
const MAX_NEWTON_ITERATIONS: usize = 500;

/// Relative Newton decrement below which the inner solve stops.
const NEWTON_TOLERANCE: f64 = 1e-13;

struct Search<'a> {
    tally: &'a TransitionTally,
    p: usize,
    m: usize,
    penalty: Penalty,
    start_g: Vec<f64>,
    /// Hessian of the penalty, `2 n (eta1 D1'D1 + eta2 D2'D2)`.
    penalty_hessian: DMatrix<f64>,
}

/// Maximizer of the objective in `g` for one fixed `alpha`.
struct Profile {
    g: Vec<f64>,
    value: f64,
    converged: bool,
}

fn decode_alpha(u: &[f64]) -> Option<Vec<f64>> {
    let alpha: Vec<f64> = u.iter().map(|&v| logistic(v)).collect();
    (alpha.iter().sum::<f64>() < 1.0).then_some(alpha)
}

fn difference_gram(width: usize, order: usize) -> DMatrix<f64> {
    let stencil: &[f64] = if order == 1 { &[-1.0, 1.0] } else { &[1.0, -2.0, 1.0] };
    let rows = width.saturating_sub(order);
    let mut d = DMatrix::zeros(rows, width);
    for r in 0..rows {
        for (i, c) in stencil.iter().enumerate() {
            d[(r, r + i)] = *c;
        }
    }
    d.transpose() * d
}

/// Dense thinning weights for one `alpha` with derivative evaluation of
/// `sum_t c_t ln(w_t . g) - g'Qg / 2`.
struct PmfProblem<'a> {
    weights: Vec<f64>,
    counts: Vec<f64>,
    width: usize,
    q: &'a DMatrix<f64>,
}

impl PmfProblem<'_> {
    fn probs(&self, g: &[f64]) -> impl Iterator<Item = (&[f64], f64, f64)> + '_ {
        let g = g.to_vec();
        self.weights.chunks(self.width).zip(&self.counts).map(move |(w, &c)| {
            let p = w.iter().zip(&g).map(|(a, b)| a * b).sum();
            (w, c, p)
        })
    }

    fn value(&self, g: &[f64]) -> f64 {
        let mut total = 0.0;
        for (_, c, p) in self.probs(g) {
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += c * p.ln();
        }
        let gv = DVector::from_column_slice(g);
        total - 0.5 * gv.dot(&(self.q * &gv))
    }

    fn derivatives(&self, g: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let gv = DVector::from_column_slice(g);
        let mut grad = -(self.q * &gv);
        let mut hess = -self.q.clone();
        for (w, c, p) in self.probs(g) {
            for i in 0..self.width {
                if w[i] == 0.0 {
                    continue;
                }
                grad[i] += c * w[i] / p;
                let a = c * w[i] / (p * p);
                for j in 0..self.width {
                    hess[(i, j)] -= a * w[j];
                }
            }
        }
        (grad, hess)
    }

    /// Active-set Newton ascent on the probability simplex. The objective
    /// is concave in `g`, so the KKT point reached is the maximizer.
    fn solve(&self, start: &[f64]) -> Profile {
        let mut g = start.to_vec();
        let mut value = self.value(&g);
        let mut free: Vec<bool> = g.iter().map(|&x| x > 0.0).collect();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < MAX_NEWTON_ITERATIONS {
            iterations += 1;
            let (grad, hess) = self.derivatives(&g);
            let idx: Vec<usize> = (0..self.width).filter(|&i| free[i]).collect();
            let (dir_free, mu) = newton_direction(&grad, &hess, &idx);
            let mut dir = vec![0.0; self.width];
            for (d, &i) in dir_free.iter().zip(&idx) {
                dir[i] = *d;
            }
            let slope: f64 = dir.iter().zip(grad.iter()).map(|(d, gr)| d * gr).sum();

            if slope <= NEWTON_TOLERANCE * (1.0 + value.abs()) {
                // stationary on the free cells: release the zero cell that
                // violates the KKT conditions most, if any
                let released = (0..self.width)
                    .filter(|&i| !free[i])
                    .map(|i| (i, grad[i] - mu))
                    .filter(|&(_, v)| v > 1e-10 * (1.0 + mu.abs()))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                let Some((j, _)) = released else {
                    converged = true;
                    break;
                };
                free[j] = true;
                // move mass towards the released vertex
                let dir: Vec<f64> = (0..self.width).map(|i| f64::from(u8::from(i == j)) - g[i]).collect();
                let slope: f64 = dir.iter().zip(grad.iter()).map(|(d, gr)| d * gr).sum();
                match line_search(|t| self.value(&step(&g, &dir, t)), value, slope, 1.0) {
                    Some((t, v)) => {
                        g = step(&g, &dir, t);
                        value = v;
                    }
                    None => {
                        converged = true;
                        break;
                    }
                }
                continue;
            }

            let mut t_max = 1.0;
            let mut blocking = None;
            for i in 0..self.width {
                if dir[i] < 0.0 && g[i] / -dir[i] < t_max {
                    t_max = g[i] / -dir[i];
                    blocking = Some(i);
                }
            }
            match line_search(|t| self.value(&step(&g, &dir, t)), value, slope, t_max) {
                Some((t, v)) => {
                    g = step(&g, &dir, t);
                    if t == t_max {
                        if let Some(i) = blocking {
                            g[i] = 0.0;
                            free[i] = false;
                        }
                    }
                    let s: f64 = g.iter().sum();
                    g.iter_mut().for_each(|x| *x /= s);
                    value = self.value(&g).max(v);
                }
                None => {
                    converged = true;
                    break;
                }
            }
        }
        Profile { g, value, converged }
    }
}

fn step(g: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    g.iter().zip(dir).map(|(x, d)| (x + t * d).max(0.0)).collect()
}

/// Backtracking from `t0` until the Armijo condition holds; `None` when no
/// step improves on `value`.
fn line_search(f: impl Fn(f64) -> f64, value: f64, slope: f64, t0: f64) -> Option<(f64, f64)> {
    if slope <= 0.0 {
        return None;
    }
    let mut t = t0;
    while t > 1e-20 {
        let v = f(t);
        if v >= value + 1e-4 * t * slope {
            return Some((t, v));
        }
        t *= 0.5;
    }
    None
}

/// Newton direction restricted to the cells `idx` with zero total mass
/// change, and the multiplier of the sum constraint.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>, idx: &[usize]) -> (Vec<f64>, f64) {
    let f = idx.len();
    let mut kkt = DMatrix::zeros(f + 1, f + 1);
    let mut rhs = DVector::zeros(f + 1);
    let scale = idx.iter().map(|&i| -hess[(i, i)]).fold(0.0, f64::max);
    let ridge = 1e-12 * (scale + 1.0);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            kkt[(a, b)] = -hess[(i, j)];
        }
        kkt[(a, a)] += ridge;
        kkt[(a, f)] = 1.0;
        kkt[(f, a)] = 1.0;
        rhs[a] = grad[i];
    }
    match kkt.lu().solve(&rhs) {
        Some(sol) => (sol.rows(0, f).iter().copied().collect(), sol[f]),
        None => (vec![0.0; f], idx.iter().map(|&i| grad[i]).sum::<f64>() / f as f64),
    }
}

impl Search<'_> {
    fn profile(&self, alpha: &[f64]) -> Profile {
        let (weights, counts) = self.tally.weights(alpha, self.m).dense();
        let problem = PmfProblem { weights, counts, width: self.m + 1, q: &self.penalty_hessian };
        problem.solve(&self.start_g)
    }

    /// Coarse scan over coefficient values used to seed the outer search.
    fn scan_points(&self) -> Vec<Vec<f64>> {
        let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        if self.p == 1 {
            grid.iter().map(|&a| vec![a]).collect()
        } else {
            let mut pts = Vec::new();
            for &a1 in &grid {
                for &a2 in &grid {
                    if a1 + a2 < 0.975 {
                        pts.push(vec![a1, a2]);
                    }
                }
            }
            pts
        }
    }

    fn run(&self, alpha0: &[f64]) -> Result<SemiparametricFit> {
        let mut evaluations = 0;
        let mut best_start = alpha0.to_vec();
        let mut best_value = self.profile(alpha0).value;
        for alpha in self.scan_points() {
            let v = self.profile(&alpha).value;
            evaluations += 1;
            if v > best_value {
                best_value = v;
                best_start = alpha;
            }
        }
        if !best_value.is_finite() {
            return Err(InarError::InvalidStart);
        }

        let u0: Vec<f64> = best_start.iter().map(|&a| logit(a)).collect();
        let outer = maximize(
            |u| match decode_alpha(u) {
                Some(alpha) => self.profile(&alpha).value,
                None => f64::NEG_INFINITY,
            },
            &u0,
            &OptimizerSettings::default(),
        )?;
        evaluations += outer.evaluations;

        let alpha = decode_alpha(&outer.argmax).expect("optimizer keeps alpha feasible");
        let profile = self.profile(&alpha);
        let loglik = self.tally.loglik(&alpha, &profile.g);
        Ok(SemiparametricFit {
            alpha_hat: InarCoefficients::new(&alpha).map_err(|e| InarError::EstimateOutOfRange(e.to_string()))?,
            g_hat: InnovationPmf::normalized(profile.g),
            loglik,
            objective: profile.value,
            penalty: self.penalty,
            converged: outer.converged && profile.converged,
            evaluations,
            iterations: outer.iterations,
        })
    }
}

/// Candidate penalty weights and the training fraction of the temporal split.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyGrid {
    pub eta1_values: Vec<f64>,
    pub eta2_values: Vec<f64>,
    pub split_fraction: f64,
}

impl PenaltyGrid {
    pub const DEFAULT_SPLIT: f64 = 0.8;

    pub fn new(eta1_values: Vec<f64>, eta2_values: Vec<f64>) -> Result<Self> {
        Self::with_split(eta1_values, eta2_values, Self::DEFAULT_SPLIT)
    }

    pub fn with_split(eta1_values: Vec<f64>, eta2_values: Vec<f64>, split_fraction: f64) -> Result<Self> {
        let grid = Self { eta1_values, eta2_values, split_fraction };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta1_values.is_empty() || self.eta2_values.is_empty() {
            return Err(InarError::EmptyGrid);
        }
        for &e1 in &self.eta1_values {
            for &e2 in &self.eta2_values {
                Penalty::new(e1, e2)?;
            }
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(InarError::InvalidConfig(format!(
                "split fraction {} must lie in (0, 1)",
                self.split_fraction
            )));
        }
        Ok(())
    }

    /// All `(eta1, eta2)` pairs, `eta1` outer.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.eta1_values
            .iter()
            .flat_map(|&e1| self.eta2_values.iter().map(move |&e2| (e1, e2)))
            .collect()
    }
}

/// Out-of-sample score of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyScore {
    pub eta1: f64,
    pub eta2: f64,
    /// Conditional log-likelihood of the tail segment; may be `-inf`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySelection {
    pub eta1: f64,
    pub eta2: f64,
    /// One entry per grid pair, in [`PenaltyGrid::pairs`] order.
    pub scores: Vec<PenaltyScore>,
}

/// Highest score; ties go to the smaller `eta1`, then the smaller `eta2`.
pub fn select_penalty(scores: &[PenaltyScore]) -> Option<(f64, f64)> {
    let mut order: Vec<&PenaltyScore> = scores.iter().collect();
    order.sort_by(|a, b| a.eta1.total_cmp(&b.eta1).then(a.eta2.total_cmp(&b.eta2)));
    let mut best: Option<&PenaltyScore> = None;
    for s in order {
        match best {
            Some(b) if s.score <= b.score => {}
            _ => best = Some(s),
        }
    }
    best.map(|b| (b.eta1, b.eta2))
}

/// Chooses penalty weights by a temporal split.
///
/// The first `floor(split_fraction * n)` observations train
/// [`estimate_penalized`] for every grid pair; each fit is scored by the
/// conditional log-likelihood of the remaining observations, conditioning on
/// the last `p` training values.
pub fn validate_penalization(series: &CountSeries, p: usize, grid: &PenaltyGrid) -> Result<PenaltySelection> {
    grid.validate()?;
    if !matches!(p, 1 | 2) {
        return Err(InarError::UnsupportedOrder(p));
    }
    let n = series.len();
    let split = (grid.split_fraction * n as f64).floor() as usize;
    if split <= p + 10 || n - split <= p + 10 {
        let required = ((p + 11) as f64 / grid.split_fraction.min(1.0 - grid.split_fraction)).ceil() as usize;
        return Err(InarError::SeriesTooShort { n, required });
    }
    let head = series.slice(0, split)?;
    let tail = TransitionTally::new(&series.slice(split - p, n)?, p)?;

    let pairs = grid.pairs();
    let score_pair = |&(eta1, eta2): &(f64, f64)| -> Result<PenaltyScore> {
        let fit = estimate_penalized(&head, p, eta1, eta2)?;
        let score = tail.loglik(fit.alpha_hat.as_slice(), fit.g_hat.probs());
        Ok(PenaltyScore { eta1, eta2, score })
    };
    #[cfg(feature = "parallel")]
    let scores: Result<Vec<PenaltyScore>> = {
        use rayon::prelude::*;
        pairs.par_iter().map(score_pair).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scores: Result<Vec<PenaltyScore>> = pairs.iter().map(score_pair).collect();
    let scores = scores?;

    let (eta1, eta2) = select_penalty(&scores).ok_or(InarError::EmptyGrid)?;
    Ok(PenaltySelection { eta1, eta2, scores })
}
