//! Browser bindings for the demo page. Every entry point takes a JSON
//! request and returns a JSON response; the `*_json` functions are the
//! native versions used by the tests.

use inarlab::{
    estimate_ml_parametric, estimate_moments, estimate_penalized, estimate_semiparametric, simulate_inar,
    transition_pmf, CountSeries, FamilyKind, InarCoefficients, InarModel, Innovations, InnovationPmf,
    ParametricFamily, SimulationConfig, TransitionContext,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Longest series the page may request.
pub const MAX_N: usize = 100_000;

#[derive(Deserialize, Debug, Clone)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InnovationSpec {
    Poisson { lambda: f64 },
    Geometric { pi: f64 },
    Negbin { r: f64, pi: f64 },
    Pmf { probs: Vec<f64> },
}

impl InnovationSpec {
    fn build(&self) -> Result<Innovations, String> {
        Ok(match self {
            Self::Poisson { lambda } => Innovations::Family(ParametricFamily::Poisson { lambda: *lambda }),
            Self::Geometric { pi } => Innovations::Family(ParametricFamily::Geometric { pi: *pi }),
            Self::Negbin { r, pi } => Innovations::Family(ParametricFamily::NegBin { r: *r, pi: *pi }),
            Self::Pmf { probs } => Innovations::Pmf(InnovationPmf::new(probs.clone()).map_err(err)?),
        })
    }
}

#[derive(Deserialize, Debug)]
pub struct SimulateRequest {
    pub alpha: Vec<f64>,
    pub innovation: InnovationSpec,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Serialize, Debug)]
pub struct SimulateResponse {
    pub values: Vec<u64>,
    pub mean: f64,
    pub acf: Vec<f64>,
}

#[derive(Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Moments,
    Ml,
    Sp,
    SpPenal,
}

#[derive(Deserialize, Debug)]
pub struct FitRequest {
    pub values: Vec<u64>,
    pub p: usize,
    pub method: Method,
    /// Family for `moments` and `ml`: "poisson", "geometric" or "negbin".
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub eta1: f64,
    #[serde(default)]
    pub eta2: f64,
}

#[derive(Serialize, Debug)]
pub struct FitResponse {
    pub alpha_hat: Vec<f64>,
    /// Fitted innovation pmf on `{0, ..., max(values)}` (a family's cells are
    /// not renormalized).
    pub g_hat: Vec<f64>,
    /// Family parameters for parametric fits.
    pub parameters: Option<Vec<f64>>,
    pub loglik: Option<f64>,
    pub converged: bool,
}

#[derive(Deserialize, Debug)]
pub struct TransitionRequest {
    pub alpha: Vec<f64>,
    pub innovation: InnovationSpec,
    /// Previous values, most recent first.
    pub lags: Vec<u64>,
    pub k_max: u64,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse<T: for<'de> Deserialize<'de>>(request: &str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(err)
}

pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = parse(request)?;
    if req.n == 0 || req.n > MAX_N {
        return Err(format!("n must be between 1 and {MAX_N}"));
    }
    let model = InarModel::new(&req.alpha, req.innovation.build()?).map_err(err)?;
    let series = simulate_inar(&model, &SimulationConfig::new(req.n, req.seed)).map_err(err)?;
    let lags = 10.min(req.n - 1);
    let acf = (1..=lags).map(|h| series.autocorrelation(h)).map(|r| if r.is_finite() { r } else { 0.0 }).collect();
    to_json(&SimulateResponse { mean: series.mean(), acf, values: series.values().to_vec() })
}

fn family_kind(name: Option<&str>) -> Result<FamilyKind, String> {
    match name {
        Some("poisson") => Ok(FamilyKind::Poisson),
        Some("geometric") => Ok(FamilyKind::Geometric),
        Some("negbin") => Ok(FamilyKind::NegBin),
        Some(other) => Err(format!("unknown family `{other}`")),
        None => Err("this method needs a family".into()),
    }
}

pub fn fit_json(request: &str) -> Result<String, String> {
    let req: FitRequest = parse(request)?;
    let series = CountSeries::new(req.values).map_err(err)?;
    let response = match req.method {
        Method::Moments | Method::Ml => {
            let kind = family_kind(req.family.as_deref())?;
            let fit = if req.method == Method::Ml {
                estimate_ml_parametric(&series, req.p, kind, None)
            } else {
                estimate_moments(&series, req.p, kind)
            }
            .map_err(err)?;
            FitResponse {
                alpha_hat: fit.alpha_hat.as_slice().to_vec(),
                g_hat: (0..=series.max()).map(|k| fit.family_hat.pmf(k)).collect(),
                parameters: Some(fit.family_hat.parameters()),
                loglik: fit.loglik,
                converged: fit.converged,
            }
        }
        Method::Sp | Method::SpPenal => {
            let fit = if req.method == Method::Sp {
                estimate_semiparametric(&series, req.p, None)
            } else {
                estimate_penalized(&series, req.p, req.eta1, req.eta2)
            }
            .map_err(err)?;
            FitResponse {
                alpha_hat: fit.alpha_hat.as_slice().to_vec(),
                g_hat: fit.g_hat.probs().to_vec(),
                parameters: None,
                loglik: Some(fit.loglik),
                converged: fit.converged,
            }
        }
    };
    to_json(&response)
}

/// `P(X_t = k | lags)` for `k = 0..=k_max`.
pub fn transition_row_json(request: &str) -> Result<String, String> {
    let req: TransitionRequest = parse(request)?;
    if req.lags.len() != req.alpha.len() {
        return Err(format!("{} lag value(s) given for order {}", req.lags.len(), req.alpha.len()));
    }
    if req.k_max > 10_000 {
        return Err("k_max must be at most 10000".into());
    }
    let alpha = InarCoefficients::new(&req.alpha).map_err(err)?;
    let g = req.innovation.build()?.to_pmf().map_err(err)?;
    let ctx = TransitionContext::new(req.lags);
    let row: Vec<f64> = (0..=req.k_max).map(|k| transition_pmf(&alpha, &g, k, &ctx)).collect();
    to_json(&row)
}

#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsError> {
    simulate_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fit(request: &str) -> Result<String, JsError> {
    fit_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn transition_row(request: &str) -> Result<String, JsError> {
    transition_row_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn version() -> String {
    inarlab::VERSION.to_string()
}
