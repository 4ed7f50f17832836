use inarlab_wasm_demo::{fit_json, simulate_json, transition_row_json};
use serde_json::{json, Value};

fn call(f: fn(&str) -> Result<String, String>, request: Value) -> Result<Value, String> {
    f(&request.to_string()).map(|s| serde_json::from_str(&s).unwrap())
}

fn simulated(n: usize, seed: u64) -> Vec<u64> {
    let res = call(
        simulate_json,
        json!({ "alpha": [0.5], "innovation": { "kind": "poisson", "lambda": 1.0 }, "n": n, "seed": seed }),
    )
    .unwrap();
    serde_json::from_value(res["values"].clone()).unwrap()
}

#[test]
fn simulate_is_seeded_and_summarized() {
    let a = simulated(300, 4);
    assert_eq!(a.len(), 300);
    assert_eq!(a, simulated(300, 4));
    assert_ne!(a, simulated(300, 5));

    let res = call(
        simulate_json,
        json!({ "alpha": [0.3, 0.2], "innovation": { "kind": "pmf", "probs": [0.2, 0.8] }, "n": 50 }),
    )
    .unwrap();
    let values: Vec<f64> = serde_json::from_value(res["values"].clone()).unwrap();
    let mean = values.iter().sum::<f64>() / 50.0;
    assert!((res["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert_eq!(res["acf"].as_array().unwrap().len(), 10);
}

#[test]
fn simulate_rejects_bad_requests() {
    let bad = [
        json!({ "alpha": [0.6, 0.5], "innovation": { "kind": "poisson", "lambda": 1.0 }, "n": 10 }),
        json!({ "alpha": [0.5], "innovation": { "kind": "poisson", "lambda": 1.0 }, "n": 0 }),
        json!({ "alpha": [0.5], "innovation": { "kind": "pmf", "probs": [0.5, 0.6] }, "n": 10 }),
        json!({ "alpha": [0.5], "innovation": { "kind": "cauchy" }, "n": 10 }),
        json!({ "alpha": [0.5], "n": 10 }),
    ];
    for request in bad {
        assert!(call(simulate_json, request.clone()).is_err(), "{request}");
    }
}

#[test]
fn every_fit_method_recovers_alpha() {
    let values = simulated(3000, 11);
    for (method, family) in [("moments", Some("poisson")), ("ml", Some("poisson")), ("sp", None), ("sp-penal", None)] {
        let res = call(fit_json, json!({ "values": values, "p": 1, "method": method, "family": family, "eta1": 0.1 }))
            .unwrap();
        let alpha = res["alpha_hat"][0].as_f64().unwrap();
        assert!((alpha - 0.5).abs() < 0.06, "{method}: {alpha}");
        let g: Vec<f64> = serde_json::from_value(res["g_hat"].clone()).unwrap();
        assert_eq!(g.len() as u64, values.iter().max().unwrap() + 1);
        assert!(g.iter().sum::<f64>() <= 1.0 + 1e-9);
        assert_eq!(res["parameters"].is_null(), family.is_none(), "{method}");
    }
}

#[test]
fn fit_reports_library_errors() {
    let zeros = vec![0u64; 30];
    let e = call(fit_json, json!({ "values": zeros, "p": 1, "method": "sp" })).unwrap_err();
    assert!(e.contains("identically zero"), "{e}");
    let e = call(fit_json, json!({ "values": [1, 2, 3, 1, 2], "p": 1, "method": "ml" })).unwrap_err();
    assert!(e.contains("family"), "{e}");
    assert!(call(fit_json, json!({ "values": [1, 2], "p": 1, "method": "bayes" })).is_err());
}

fn binomial(n: u64, a: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let c: f64 = (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product();
    c * a.powi(k as i32) * (1.0 - a).powi((n - k) as i32)
}

#[test]
fn transition_row_is_a_convolution() {
    let g = [0.25, 0.5, 0.25];
    let res = call(
        transition_row_json,
        json!({ "alpha": [0.4], "innovation": { "kind": "pmf", "probs": g }, "lags": [3], "k_max": 6 }),
    )
    .unwrap();
    let row: Vec<f64> = serde_json::from_value(res).unwrap();
    for (k, p) in row.iter().enumerate() {
        let want: f64 =
            (0..=k as u64).map(|j| binomial(3, 0.4, j) * g.get(k - j as usize).copied().unwrap_or(0.0)).sum();
        assert!((p - want).abs() < 1e-14, "k={k}: {p} vs {want}");
    }
    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let e = call(
        transition_row_json,
        json!({ "alpha": [0.4, 0.2], "innovation": { "kind": "poisson", "lambda": 1.0 }, "lags": [3], "k_max": 6 }),
    )
    .unwrap_err();
    assert!(e.contains("lag"), "{e}");
}
