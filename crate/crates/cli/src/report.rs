use crate::CliError;
use inarlab::{
    BootstrapResult, InarModel, Innovations, ParametricFit, PenaltySelection, PointFit, SemiparametricFit,
};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

pub const SCHEMA_VERSION: &str = "1.0";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize, Debug, Clone)]
pub struct Manifest {
    pub command: &'static str,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub input_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<String>,
    /// Left out of reports so that reruns are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<f64>,
}

impl Manifest {
    pub fn new(command: &'static str, params: Value, seed: Option<u64>, input: Option<&[u8]>) -> Self {
        Self {
            command,
            params,
            seed,
            version: inarlab::VERSION,
            input_sha256: input.map(sha256_hex),
            output_sha256: None,
            duration_ms: None,
        }
    }

    pub fn timed(&self, elapsed: Duration) -> Self {
        Self { duration_ms: Some(elapsed.as_secs_f64() * 1e3), ..self.clone() }
    }
}

#[derive(Serialize, Debug)]
pub struct Report<R: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub params: Value,
    pub results: R,
    pub manifest: Manifest,
}

#[derive(Serialize, Debug)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InnovationOut {
    Family { family: &'static str, parameters: BTreeMap<&'static str, f64>, mean: f64 },
    Pmf { support_max: usize, g_hat: Vec<f64>, mean: f64 },
}

#[derive(Serialize, Debug)]
pub struct PenaltyOut {
    pub eta1: f64,
    pub eta2: f64,
}

#[derive(Serialize, Debug)]
pub struct ScoreOut {
    pub eta1: f64,
    pub eta2: f64,
    /// `null` stands for minus infinity.
    pub score: Option<f64>,
}

#[derive(Serialize, Debug)]
pub struct ValidationOut {
    pub split_fraction: f64,
    pub selected: PenaltyOut,
    pub scores: Vec<ScoreOut>,
}

impl ValidationOut {
    pub fn new(selection: &PenaltySelection, split_fraction: f64) -> Self {
        Self {
            split_fraction,
            selected: PenaltyOut { eta1: selection.eta1, eta2: selection.eta2 },
            scores: selection
                .scores
                .iter()
                .map(|s| ScoreOut { eta1: s.eta1, eta2: s.eta2, score: s.score.is_finite().then_some(s.score) })
                .collect(),
        }
    }
}

#[derive(Serialize, Debug)]
pub struct FitOut {
    pub method: &'static str,
    pub p: usize,
    pub n: usize,
    pub alpha_hat: Vec<f64>,
    pub innovation: InnovationOut,
    pub loglik: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<PenaltyOut>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationOut>,
}

fn innovation_out(model: &InarModel) -> InnovationOut {
    match model.innovations() {
        Innovations::Family(f) => {
            let kind = f.kind();
            InnovationOut::Family {
                family: kind.name(),
                parameters: kind.parameter_names().iter().copied().zip(f.parameters()).collect(),
                mean: f.mean(),
            }
        }
        Innovations::Pmf(g) => InnovationOut::Pmf { support_max: g.support_max(), g_hat: g.probs().to_vec(), mean: g.mean() },
    }
}

impl FitOut {
    pub fn parametric(fit: &ParametricFit, loglik: Option<f64>, n: usize) -> Self {
        Self {
            method: fit.method.name(),
            p: fit.alpha_hat.order(),
            n,
            alpha_hat: fit.alpha_hat.as_slice().to_vec(),
            innovation: innovation_out(&fit.model()),
            loglik: fit.loglik.or(loglik),
            objective: None,
            penalty: None,
            converged: fit.converged,
            iterations: fit.iterations,
            validation: None,
        }
    }

    pub fn semiparametric(method: &'static str, fit: &SemiparametricFit, n: usize) -> Self {
        let penalised = !fit.penalty.is_zero() || method == "sp-penal";
        Self {
            method,
            p: fit.alpha_hat.order(),
            n,
            alpha_hat: fit.alpha_hat.as_slice().to_vec(),
            innovation: innovation_out(&PointFit::Semiparametric(fit.clone()).model()),
            loglik: Some(fit.loglik),
            objective: penalised.then_some(fit.objective),
            penalty: penalised.then_some(PenaltyOut { eta1: fit.penalty.eta1, eta2: fit.penalty.eta2 }),
            converged: fit.converged,
            iterations: fit.iterations,
            validation: None,
        }
    }
}

#[derive(Serialize, Debug)]
pub struct IntervalOut {
    pub name: String,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Serialize, Debug)]
pub struct BootOut {
    pub mode: String,
    pub estimator: &'static str,
    pub replicates: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub level: f64,
    pub point: FitOut,
    pub intervals: Vec<IntervalOut>,
}

impl BootOut {
    pub fn new(mode: String, estimator: &'static str, result: &BootstrapResult, point: FitOut) -> Self {
        Self {
            mode,
            estimator,
            replicates: result.replicates.len() + result.failed,
            succeeded: result.replicates.len(),
            failed: result.failed,
            level: result.level,
            point,
            intervals: result
                .ci
                .iter()
                .map(|c| IntervalOut { name: c.name.clone(), estimate: c.estimate, lo: c.lo, hi: c.hi })
                .collect(),
        }
    }
}

/// Raw replicate estimates, one row per successful replicate.
pub fn replicates_csv(result: &BootstrapResult) -> String {
    let mut out = String::from("replicate");
    for name in &result.parameter_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (b, row) in result.replicate_ids.iter().zip(&result.replicates) {
        out.push_str(&b.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes `contents` to `path`, or to standard output when absent.
pub fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            std::io::stdout().lock().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

/// Writes the manifest to `path`, or to standard error when absent.
pub fn emit_manifest(path: Option<&Path>, manifest: &Manifest) -> Result<(), CliError> {
    let text = to_json(manifest);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            std::io::stderr().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
