use crate::input::read_series;
use crate::report::{
    emit_manifest, replicates_csv, sha256_hex, to_json, write_output, BootOut, FitOut, Manifest, Report,
    ValidationOut, SCHEMA_VERSION,
};
use crate::{BootArgs, CliError, EstimatorArg, FitArgs, Method, ModeArg, SimulateArgs};
use inarlab::{
    estimate_ml_parametric, estimate_moments, estimate_penalized, estimate_semiparametric, inar_bootstrap,
    parametric_loglik, simulate_inar, validate_penalization, BootstrapMode, BootstrapSpec, CountSeries, FamilyKind,
    InarModel, Innovations, InnovationPmf, Penalty, PenaltyGrid, PointFit, ReplicateEstimator, SimulationConfig,
};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;
use std::time::Instant;

pub const THREADS_ENV: &str = "INARLAB_THREADS";

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    if let Some(p) = args.p {
        if usize::from(p) != args.alpha.len() {
            return Err(usage(format!("--p {p} does not match the {} value(s) given to --alpha", args.alpha.len())));
        }
    }
    let (innovations, innovation_param) = match (&args.family, &args.pmf) {
        (Some(f), None) => (
            Innovations::Family(*f),
            json!({ "family": f.kind().name(), "parameters": f.parameters() }),
        ),
        (None, Some(pmf)) => (Innovations::Pmf(InnovationPmf::new(pmf.clone())?), json!({ "pmf": pmf })),
        _ => return Err(usage("give exactly one of --family and --pmf")),
    };
    let model = InarModel::new(&args.alpha, innovations)?;
    let config = SimulationConfig::new(args.n, args.seed).with_burn_in(args.burn_in);
    let series = simulate_inar(&model, &config)?;

    let mut csv = String::with_capacity(series.len() * 3 + 2);
    csv.push_str("x\n");
    for v in series.values() {
        csv.push_str(&v.to_string());
        csv.push('\n');
    }
    write_output(args.out.as_deref(), &csv)?;

    let params = json!({
        "p": model.order(),
        "alpha": args.alpha,
        "innovation": innovation_param,
        "n": args.n,
        "burn_in": args.burn_in,
        "seed": args.seed,
        "out": args.out,
    });
    let mut manifest = Manifest::new("simulate", params, Some(args.seed), None);
    manifest.output_sha256 = Some(sha256_hex(csv.as_bytes()));
    emit_manifest(args.manifest.as_deref(), &manifest.timed(start.elapsed()))
}

/// Where a report and its manifest go; `None` means stdout and stderr.
struct Destinations<'a> {
    report: Option<&'a Path>,
    manifest: Option<&'a Path>,
}

fn finish<R: Serialize>(
    command: &'static str,
    params: Value,
    seed: Option<u64>,
    input: &[u8],
    results: R,
    to: Destinations,
    start: Instant,
) -> Result<(), CliError> {
    let manifest = Manifest::new(command, params.clone(), seed, Some(input));
    let report = Report { schema_version: SCHEMA_VERSION, command, params, results, manifest: manifest.clone() };
    write_output(to.report, &to_json(&report))?;
    emit_manifest(to.manifest, &manifest.timed(start.elapsed()))
}

fn moments_loglik(series: &CountSeries, fit: &inarlab::ParametricFit) -> Option<f64> {
    parametric_loglik(series, &fit.alpha_hat, &fit.family_hat).ok().filter(|v| v.is_finite())
}

/// Checks flag combinations that clap cannot express.
fn check_fit_flags(args: &FitArgs) -> Result<(), CliError> {
    let method = args.method.name();
    let parametric = matches!(args.method, Method::Moments | Method::Ml);
    if parametric && args.family.is_none() {
        return Err(usage(format!("--method {method} requires --family")));
    }
    if !parametric && args.family.is_some() {
        return Err(usage(format!("--family does not apply to --method {method}")));
    }
    let has_eta = args.eta1.is_some() || args.eta2.is_some();
    let has_grid = args.eta_grid.is_some() || args.eta2_grid.is_some();
    if args.method != Method::SpPenal && (has_eta || args.validate || has_grid) {
        return Err(usage("penalty flags require --method sp-penal"));
    }
    if args.method == Method::SpPenal {
        if args.validate && has_eta {
            return Err(usage("--validate chooses eta1 and eta2; do not pass them as well"));
        }
        if args.validate && args.eta_grid.is_none() {
            return Err(usage("--validate requires --eta-grid"));
        }
        if !args.validate && has_grid {
            return Err(usage("--eta-grid requires --validate"));
        }
        if !args.validate && !has_eta {
            return Err(usage("--method sp-penal requires --eta1/--eta2 or --validate"));
        }
    }
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let start = Instant::now();
    check_fit_flags(args)?;
    let input = read_series(&args.input)?;
    let series = &input.series;
    let p = usize::from(args.p);
    let n = series.len();
    let family: Option<FamilyKind> = args.family.map(Into::into);

    let (eta1, eta2) = (args.eta1.unwrap_or(0.0), args.eta2.unwrap_or(0.0));
    let results = match args.method {
        Method::Moments => {
            let fit = estimate_moments(series, p, family.expect("checked"))?;
            FitOut::parametric(&fit, moments_loglik(series, &fit), n)
        }
        Method::Ml => FitOut::parametric(&estimate_ml_parametric(series, p, family.expect("checked"), None)?, None, n),
        Method::Sp => FitOut::semiparametric("sp", &estimate_semiparametric(series, p, None)?, n),
        Method::SpPenal if args.validate => {
            let eta1_values = args.eta_grid.clone().expect("checked");
            let eta2_values = args.eta2_grid.clone().unwrap_or_else(|| eta1_values.clone());
            let grid = PenaltyGrid::with_split(eta1_values, eta2_values, args.split_fraction)?;
            let selection = validate_penalization(series, p, &grid)?;
            let fit = estimate_penalized(series, p, selection.eta1, selection.eta2)?;
            let mut out = FitOut::semiparametric("sp-penal", &fit, n);
            out.validation = Some(ValidationOut::new(&selection, args.split_fraction));
            out
        }
        Method::SpPenal => FitOut::semiparametric("sp-penal", &estimate_penalized(series, p, eta1, eta2)?, n),
    };

    let penal = args.method == Method::SpPenal && !args.validate;
    let params = json!({
        "input": args.input,
        "p": p,
        "method": args.method.name(),
        "family": family.map(FamilyKind::name),
        "eta1": penal.then_some(eta1),
        "eta2": penal.then_some(eta2),
        "validate": args.validate,
        "eta_grid": args.eta_grid,
        "eta2_grid": args.eta2_grid.as_ref().or(args.eta_grid.as_ref()),
        "split_fraction": args.validate.then_some(args.split_fraction),
    });
    let to = Destinations { report: args.out.as_deref(), manifest: args.manifest.as_deref() };
    finish("fit", params, None, &input.bytes, results, to, start)
}

fn thread_count(args: &BootArgs) -> Result<Option<usize>, CliError> {
    if let Some(t) = args.threads {
        return Ok(Some(t as usize));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(Some(t)),
            _ => Err(usage(format!("{THREADS_ENV} must be a positive integer, found `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs the bootstrap. The thread count is left out of the report: results
/// do not depend on it.
pub fn boot(args: &BootArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let has_eta = args.eta1.is_some() || args.eta2.is_some();
    let (mode, estimator, mode_name) = match (args.mode, args.estimator) {
        (ModeArg::Parametric(_), Some(EstimatorArg::Sp)) => {
            return Err(usage("--estimator sp requires --mode sp"));
        }
        (ModeArg::Semiparametric, Some(EstimatorArg::Moments | EstimatorArg::Ml)) => {
            return Err(usage("--mode sp requires --estimator sp"));
        }
        (ModeArg::Parametric(_), _) if has_eta => return Err(usage("--eta1/--eta2 require --mode sp")),
        (ModeArg::Parametric(kind), est) => {
            let estimator = match est {
                Some(EstimatorArg::Moments) => ReplicateEstimator::Moments,
                _ => ReplicateEstimator::Ml,
            };
            (BootstrapMode::Parametric(kind), estimator, format!("param:{}", kind.name()))
        }
        (ModeArg::Semiparametric, _) => {
            let penalty = has_eta.then(|| Penalty { eta1: args.eta1.unwrap_or(0.0), eta2: args.eta2.unwrap_or(0.0) });
            (BootstrapMode::Semiparametric { penalty }, ReplicateEstimator::Semiparametric, "sp".to_string())
        }
    };
    let threads = thread_count(args)?;
    let input = read_series(&args.input)?;
    let p = usize::from(args.p);
    let spec = BootstrapSpec {
        mode,
        replicates: args.replicates as usize,
        seed: args.seed,
        estimator,
        level: args.level,
        burn_in: inarlab::sampling::DEFAULT_BURN_IN,
    };
    let run = || inar_bootstrap(&input.series, p, &spec);
    let result = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Data(format!("cannot start {t} worker threads: {e}")))?
            .install(run),
        None => run(),
    }?;

    if let Some(path) = &args.replicates_out {
        write_output(Some(path), &replicates_csv(&result))?;
    }
    let n = input.series.len();
    let point = match &result.point {
        PointFit::Parametric(fit) => FitOut::parametric(fit, moments_loglik(&input.series, fit), n),
        PointFit::Semiparametric(fit) => FitOut::semiparametric(if has_eta { "sp-penal" } else { "sp" }, fit, n),
    };
    let estimator_name = match estimator {
        ReplicateEstimator::Semiparametric => "sp",
        other => other.name(),
    };
    let results = BootOut::new(mode_name.clone(), estimator_name, &result, point);
    let params = json!({
        "input": args.input,
        "p": p,
        "mode": mode_name,
        "estimator": estimator_name,
        "eta1": has_eta.then(|| args.eta1.unwrap_or(0.0)),
        "eta2": has_eta.then(|| args.eta2.unwrap_or(0.0)),
        "B": args.replicates,
        "level": args.level,
        "seed": args.seed,
        "burn_in": spec.burn_in,
        "replicates": args.replicates_out,
    });
    let to = Destinations { report: args.out.as_deref(), manifest: args.manifest.as_deref() };
    finish("boot", params, Some(args.seed), &input.bytes, results, to, start)
}
