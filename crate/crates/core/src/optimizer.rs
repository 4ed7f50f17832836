//! Derivative-free maximization with smooth reparametrizations of the
//! constraint sets.
//!
//! Estimators work in unconstrained coordinates: coefficients through
//! [`logistic_map`], pmfs through [`simplex_map`]. Outputs of both maps are
//! clamped [`BOUNDARY_CLAMP`] away from 0 and 1 so log-likelihood terms stay
//! finite. The search itself is Nelder–Mead with dimension-adaptive
//! coefficients, followed by `restarts` re-polishing runs from a small
//! simplex around the incumbent.

use crate::error::{InarError, Result};

/// Distance kept between mapped outputs and the boundary of their domain.
pub const BOUNDARY_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Iteration budget of each Nelder–Mead run.
    pub max_iterations: usize,
    /// Stop when best and worst vertex values differ by at most this.
    pub tolerance: f64,
    /// Re-polishing runs after the first convergence.
    pub restarts: usize,
    /// Edge length of the initial simplex; restarts use a tenth of it.
    pub simplex_scale: f64,
    /// Stop also requires every vertex within this distance (max-norm) of
    /// the best one.
    pub x_tolerance: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-10,
            restarts: 2,
            simplex_scale: 0.1,
            x_tolerance: 1e-8,
        }
    }
}

/// Outcome of [`maximize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Maximizes `objective` starting at `start`.
///
/// Non-finite objective values (the `-inf` likelihood flag, NaN) rank below
/// every finite value. The returned value is never below `objective(start)`.
pub fn maximize<F>(mut objective: F, start: &[f64], settings: &OptimizerSettings) -> Result<Maximum>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evaluations = 0usize;
    let mut cost = |x: &[f64]| {
        evaluations += 1;
        let v = objective(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let start_cost = cost(start);
    if !start_cost.is_finite() {
        return Err(InarError::InvalidStart);
    }

    let mut run = nelder_mead(&mut cost, start, start_cost, settings.simplex_scale, settings);
    let mut best_x = run.x.clone();
    let mut best_cost = run.cost;
    let mut iterations = run.iterations;
    for _ in 0..settings.restarts {
        run = nelder_mead(&mut cost, &best_x, best_cost, settings.simplex_scale / 10.0, settings);
        iterations += run.iterations;
        if run.cost < best_cost {
            best_cost = run.cost;
            best_x = run.x.clone();
        }
    }
    Ok(Maximum {
        argmax: best_x,
        value: -best_cost,
        converged: run.converged,
        iterations,
        evaluations,
    })
}

struct Run {
    x: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn nelder_mead<C>(cost: &mut C, x0: &[f64], c0: f64, scale: f64, settings: &OptimizerSettings) -> Run
where
    C: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Run { x: Vec::new(), cost: c0, converged: true, iterations: 0 };
    }
    let nf = n as f64;
    let (reflect, expand, contract, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), c0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scale;
        let c = cost(&x);
        simplex.push((x, c));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(ci, wi)| ci + t * (ci - wi)).collect()
    };

    while iterations < settings.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = worst - best;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= settings.tolerance && diameter <= settings.x_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }

        let xr = point(&centroid, &simplex[n].0, reflect);
        let cr = cost(&xr);
        if cr < best {
            let xe = point(&centroid, &simplex[n].0, reflect * expand);
            let ce = cost(&xe);
            simplex[n] = if ce < cr { (xe, ce) } else { (xr, cr) };
            continue;
        }
        if cr < simplex[n - 1].1 {
            simplex[n] = (xr, cr);
            continue;
        }
        // contraction, outside if the reflected point beats the worst vertex
        let (xc, cc) = if cr < worst {
            let xc = point(&centroid, &simplex[n].0, reflect * contract);
            let cc = cost(&xc);
            (xc, cc)
        } else {
            let xc = point(&centroid, &simplex[n].0, -contract);
            let cc = cost(&xc);
            (xc, cc)
        };
        if cc < cr.min(worst) {
            simplex[n] = (xc, cc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (x, c) in simplex.iter_mut().skip(1) {
            for (xi, ai) in x.iter_mut().zip(&anchor) {
                *xi = ai + shrink * (*xi - ai);
            }
            *c = cost(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, c) = simplex.swap_remove(0);
    Run { x, cost: c, converged, iterations }
}

/// `1 / (1 + e^-u)` clamped to `[1e-12, 1 - 1e-12]`.
pub fn logistic(u: f64) -> f64 {
    (1.0 / (1.0 + (-u).exp())).clamp(BOUNDARY_CLAMP, 1.0 - BOUNDARY_CLAMP)
}

/// Inverse of [`logistic`] on the open unit interval.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic_map(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&v| logistic(v)).collect()
}

/// Normalized exponential over `M + 1` cells with the last log-odds pinned
/// to zero.
pub fn simplex_map(u: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len() + 1);
    simplex_map_into(u, &mut out);
    out
}

/// [`simplex_map`] writing into a reusable buffer.
pub fn simplex_map_into(u: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(u);
    out.push(0.0);
    softmax_in_place(out);
}

/// Normalized exponential of all cells (no pinned coordinate), clamped
/// away from zero.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

fn softmax_in_place(v: &mut [f64]) {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - top).exp();
        sum += *x;
    }
    let mut clamped_sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x / sum).max(BOUNDARY_CLAMP);
        clamped_sum += *x;
    }
    for x in v.iter_mut() {
        *x /= clamped_sum;
    }
}

/// Inverse of [`simplex_map`] for strictly positive pmfs:
/// `u_k = ln(g_k / g_M)`.
pub fn simplex_logits(pmf: &[f64]) -> Vec<f64> {
    let last = pmf[pmf.len() - 1].ln();
    pmf[..pmf.len() - 1].iter().map(|p| p.ln() - last).collect()
}
