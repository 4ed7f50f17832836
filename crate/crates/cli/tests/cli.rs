use inarlab::{
    inar_bootstrap, simulate_inar, BootstrapSpec, FamilyKind, InarError, InarModel, Innovations, ParametricFamily,
    ReplicateEstimator, SimulationConfig,
};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn inarlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inarlab"))
        .args(args)
        .env_remove("INARLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn schema_validator() -> jsonschema::Validator {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/report.schema.json")).expect("schema is valid JSON");
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_schema(report: &Value) {
    let validator = schema_validator();
    let errors: Vec<String> = validator.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

fn simulate_to(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut full = vec!["simulate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", path_str(&out)]);
    let o = inarlab(&full);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn simulate_shape_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate_to(dir.path(), "x.csv", &["--p", "1", "--alpha", "0.5", "--family", "poisson:2", "--n", "1000", "--seed", "7"]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x");
    assert_eq!(lines.len(), 1001);
    assert!(lines[1..].iter().all(|l| l.parse::<u64>().is_ok()));

    let manifest_path = dir.path().join("m.json");
    let o = inarlab(&[
        "simulate", "--alpha", "0.5", "--family", "poisson:2", "--n", "1000", "--seed", "7", "--manifest",
        path_str(&manifest_path),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), text);
    let m = read_json(&manifest_path);
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["params"]["burn_in"], 500);
    assert!(m["duration_ms"].is_number());
}

#[test]
fn point_mass_innovations_give_zeros() {
    let o = inarlab(&["simulate", "--p", "1", "--alpha", "0.5", "--pmf", "1.0", "--n", "100", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().skip(1).all(|l| l == "0"));
}

#[test]
fn nonstationary_alpha_is_a_model_error() {
    let o = inarlab(&["simulate", "--alpha", "0.7,0.4", "--family", "poisson:1", "--n", "10"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("stationar"));
}

#[test]
fn simulate_flag_matrix() {
    let cases: &[(&[&str], i32)] = &[
        (&["simulate", "--alpha", "0.5", "--n", "10"], 2),
        (&["simulate", "--alpha", "0.5", "--family", "poisson:1", "--pmf", "1", "--n", "10"], 2),
        (&["simulate", "--p", "2", "--alpha", "0.5", "--family", "poisson:1", "--n", "10"], 2),
        (&["simulate", "--p", "3", "--alpha", "0.5", "--family", "poisson:1", "--n", "10"], 2),
        (&["simulate", "--alpha", "0.5", "--family", "poisson", "--n", "10"], 2),
        (&["simulate", "--alpha", "0.5", "--family", "poisson:1"], 2),
        (&["simulate", "--alpha", "0.5", "--family", "poisson:-1", "--n", "10"], 3),
        (&["simulate", "--alpha", "1.2", "--family", "poisson:1", "--n", "10"], 3),
        (&["simulate", "--alpha", "0.2,0.2,0.2", "--family", "poisson:1", "--n", "10"], 3),
        (&["simulate", "--alpha", "0.5", "--pmf", "0.5,0.4", "--n", "10"], 3),
        (&["simulate", "--alpha", "0.5", "--family", "geometric:0.5", "--n", "0"], 3),
    ];
    for (args, expected) in cases {
        let o = inarlab(args);
        assert_eq!(code(&o), *expected, "{args:?}: {}", stderr(&o));
        let msg = stderr(&o);
        assert!(msg.starts_with("error"), "{args:?}: {msg}");
    }
}

#[test]
fn fit_round_trip_recovers_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate_to(dir.path(), "x.csv", &["--p", "1", "--alpha", "0.5", "--family", "poisson:2", "--n", "5000", "--seed", "7"]);
    let report = dir.path().join("fit.json");
    let o = inarlab(&["fit", "--in", path_str(&csv), "--p", "1", "--method", "ml", "--family", "poisson", "--out", path_str(&report)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&report);
    assert_schema(&r);
    let a = r["results"]["alpha_hat"][0].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&a), "{a}");
    assert_eq!(r["results"]["innovation"]["family"], "poisson");
    assert_eq!(r["manifest"]["input_sha256"].as_str().unwrap().len(), 64);
    assert!(r["manifest"].get("duration_ms").is_none());
}

#[test]
fn zero_penalty_matches_plain_semiparametric() {
    let csv = fixture("smoke.csv");
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("sp.json");
    let pen = dir.path().join("pen.json");
    let o = inarlab(&["fit", "--in", path_str(&csv), "--p", "1", "--method", "sp", "--out", path_str(&sp)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = inarlab(&[
        "fit", "--in", path_str(&csv), "--p", "1", "--method", "sp-penal", "--eta1", "0", "--eta2", "0", "--out",
        path_str(&pen),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (a, b) = (read_json(&sp), read_json(&pen));
    assert_schema(&a);
    assert_schema(&b);
    let la = a["results"]["loglik"].as_f64().unwrap();
    let lb = b["results"]["loglik"].as_f64().unwrap();
    assert!((la - lb).abs() < 1e-6);
    let g = a["results"]["innovation"]["g_hat"].as_array().unwrap();
    let max = std::fs::read_to_string(&csv).unwrap().lines().skip(1).map(|l| l.parse::<usize>().unwrap()).max().unwrap();
    assert_eq!(g.len(), max + 1);
}

#[test]
fn validation_report() {
    let csv = fixture("smoke.csv");
    let o = inarlab(&["fit", "--in", path_str(&csv), "--p", "1", "--method", "sp-penal", "--validate", "--eta-grid", "0,0.1,1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_schema(&r);
    let v = &r["results"]["validation"];
    let scores = v["scores"].as_array().unwrap();
    assert_eq!(scores.len(), 9);
    let best = scores.iter().filter_map(|s| s["score"].as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let sel = &v["selected"];
    let chosen = scores.iter().find(|s| s["eta1"] == sel["eta1"] && s["eta2"] == sel["eta2"]).unwrap();
    assert_eq!(chosen["score"].as_f64().unwrap(), best);
    assert_eq!(r["results"]["penalty"], *sel);
}

#[test]
fn fit_flag_and_data_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let good = fixture("smoke.csv");
    let good = path_str(&good);
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let negative = write("neg.csv", "x\n1\n2\n-3\n4\n");
    let fractional = write("frac.csv", "1\n2\n3.5\n");
    let zeros = write("zeros.csv", &"0\n".repeat(30));
    let constant = write("const.csv", &"2\n".repeat(30));
    let short = write("short.csv", "1\n2\n3\n");
    let crlf = write("crlf.csv", "x\r\n1\r\n2\r\n0\r\n3\r\n1\r\n2\r\n0\r\n1\r\n4\r\n2\r\n1\r\n0\r\n");
    let missing = dir.path().join("missing.csv");

    let cases: Vec<(Vec<&str>, i32, &str)> = vec![
        (vec!["fit", "--in", good, "--p", "1", "--method", "ml"], 2, "--family"),
        (vec!["fit", "--in", good, "--p", "1", "--method", "sp", "--family", "poisson"], 2, "--family"),
        (vec!["fit", "--in", good, "--p", "1", "--method", "sp-penal"], 2, "--eta1"),
        (vec!["fit", "--in", good, "--p", "1", "--method", "sp-penal", "--validate"], 2, "--eta-grid"),
        (vec!["fit", "--in", good, "--p", "1", "--method", "sp", "--eta1", "1"], 2, "sp-penal"),
        (vec!["fit", "--in", good, "--p", "3", "--method", "sp"], 2, ""),
        (vec!["fit", "--in", good, "--p", "1", "--method", "newton"], 2, ""),
        (vec!["fit", "--in", path_str(&negative), "--p", "1", "--method", "sp"], 3, "line 4"),
        (vec!["fit", "--in", path_str(&fractional), "--p", "1", "--method", "sp"], 3, "line 3"),
        (vec!["fit", "--in", path_str(&missing), "--p", "1", "--method", "sp"], 3, "missing.csv"),
        (vec!["fit", "--in", good, "--p", "1", "--method", "sp-penal", "--eta1", "-1"], 3, "NegativePenalty"),
        (vec!["fit", "--in", good, "--p", "1", "--method", "sp-penal", "--validate", "--eta-grid", "0", "--split-fraction", "1.5"], 3, "InvalidConfig"),
        (vec!["fit", "--in", path_str(&zeros), "--p", "1", "--method", "sp"], 4, "AllZeroSeries"),
        (vec!["fit", "--in", path_str(&constant), "--p", "1", "--method", "moments", "--family", "poisson"], 4, "DegenerateSeries"),
        (vec!["fit", "--in", path_str(&short), "--p", "1", "--method", "moments", "--family", "poisson"], 4, "SeriesTooShort"),
        (vec!["fit", "--in", path_str(&crlf), "--p", "1", "--method", "sp"], 0, ""),
    ];
    for (args, expected, needle) in cases {
        let o = inarlab(&args);
        assert_eq!(code(&o), expected, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn boot_single_replicate_and_determinism() {
    let csv = fixture("smoke.csv");
    let dir = tempfile::tempdir().unwrap();
    let reps = |name: &str| dir.path().join(name);
    let run = |rep: &Path, report: &Path, threads: &str| {
        let o = inarlab(&[
            "boot", "--in", path_str(&csv), "--p", "1", "--mode", "param:poisson", "--B", "1", "--seed", "3",
            "--replicates", path_str(rep), "--out", path_str(report), "--threads", threads,
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    let read = |name: &str| std::fs::read_to_string(reps(name)).unwrap();
    run(&reps("r.csv"), &reps("r.json"), "1");
    let (csv1, json1) = (read("r.csv"), read("r.json"));
    run(&reps("r.csv"), &reps("r.json"), "2");
    assert_eq!(csv1, read("r.csv"));
    assert_eq!(json1, read("r.json"));
    let r = read_json(&reps("r.json"));
    assert_schema(&r);
    for iv in r["results"]["intervals"].as_array().unwrap() {
        assert_eq!(iv["lo"], iv["hi"]);
    }
    let header = read("r.csv");
    assert!(header.starts_with("replicate,alpha1,lambda\n1,"));
}

#[test]
fn boot_smoke_fixture_interval_covers_estimate() {
    let csv = fixture("smoke.csv");
    let o = inarlab(&["boot", "--in", path_str(&csv), "--p", "1", "--mode", "sp", "--B", "199", "--level", "0.95", "--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_schema(&r);
    let alpha = r["results"]["intervals"].as_array().unwrap().iter().find(|i| i["name"] == "alpha1").unwrap().clone();
    let (lo, hi, est) = (alpha["lo"].as_f64().unwrap(), alpha["hi"].as_f64().unwrap(), alpha["estimate"].as_f64().unwrap());
    assert!(lo <= est && est <= hi, "{lo} {est} {hi}");
    assert_eq!(r["results"]["replicates"], 199);
}

#[test]
fn boot_flag_matrix() {
    let csv = fixture("smoke.csv");
    let good = path_str(&csv);
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["boot", "--in", good, "--p", "1", "--mode", "sp"], 2),
        (vec!["boot", "--in", good, "--p", "1", "--mode", "param", "--B", "2"], 2),
        (vec!["boot", "--in", good, "--p", "1", "--mode", "sp", "--B", "0"], 2),
        (vec!["boot", "--in", good, "--p", "1", "--mode", "sp", "--estimator", "ml", "--B", "2"], 2),
        (vec!["boot", "--in", good, "--p", "1", "--mode", "param:poisson", "--eta1", "1", "--B", "2"], 2),
        (vec!["boot", "--in", good, "--p", "1", "--mode", "sp", "--B", "2", "--threads", "0"], 2),
        (vec!["boot", "--in", good, "--p", "1", "--mode", "sp", "--B", "2", "--level", "1.5"], 3),
    ];
    for (args, expected) in cases {
        let o = inarlab(&args);
        assert_eq!(code(&o), expected, "{args:?}: {}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_inarlab"))
        .args(["boot", "--in", good, "--p", "1", "--mode", "sp", "--B", "2"])
        .env("INARLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

/// A short, nearly equidispersed series whose negative binomial moment
/// fit succeeds but whose replicates mostly fail.
fn too_many_failures_fixture() -> Vec<u64> {
    let model = InarModel::new(&[0.05], Innovations::Family(ParametricFamily::NegBin { r: 50.0, pi: 0.97 })).unwrap();
    for seed in 0..200 {
        let s = simulate_inar(&model, &SimulationConfig::new(30, seed)).unwrap();
        let spec = BootstrapSpec::parametric(FamilyKind::NegBin, 40, 1).with_estimator(ReplicateEstimator::Moments);
        if let Err(InarError::TooManyFailures { .. }) = inar_bootstrap(&s, 1, &spec) {
            return s.values().to_vec();
        }
    }
    panic!("no fixture found");
}

#[test]
fn too_many_failures_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fragile.csv");
    let body: String = std::iter::once("x".to_string())
        .chain(too_many_failures_fixture().iter().map(u64::to_string))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&path, body).unwrap();
    let o = inarlab(&[
        "boot", "--in", path_str(&path), "--p", "1", "--mode", "param:negbin", "--estimator", "moments", "--B", "40",
        "--seed", "1",
    ]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    assert!(stderr(&o).contains("TooManyFailures"));
}

#[test]
fn threads_env_is_honoured() {
    let csv = fixture("smoke.csv");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_inarlab"))
            .args(["boot", "--in", path_str(&csv), "--p", "1", "--mode", "param:geometric", "--estimator", "moments", "--B", "20", "--seed", "4"])
            .env("INARLAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("3"));
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}
