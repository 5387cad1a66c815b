//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed.

use std::f64::consts::PI;
use std::process::ExitCode;

use fieldlab_cli::report::Outcome;
use fieldlab_cli::{run_experiment, ExperimentConfig, REGISTRY};
use serde_json::{json, Value};

fn run(name: &str, seed: u64, params: Value) -> Outcome {
    let mut cfg = ExperimentConfig::new(name, seed);
    for (k, v) in params.as_object().unwrap() {
        cfg = cfg.set(k, v.clone());
    }
    run_experiment(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn val(r: &Value) -> f64 {
    r["value"].as_f64().unwrap()
}

/// All verdicts of a report, or the failing ones, as one line.
fn verdicts(o: &Outcome) -> String {
    let failing: Vec<String> =
        o.report.verdicts.iter().filter(|v| !v.passed).map(|v| format!("{}: {}", v.name, v.detail)).collect();
    if failing.is_empty() {
        format!("{} verdicts pass", o.report.verdicts.len())
    } else {
        failing.join("; ")
    }
}

fn c1() -> (bool, String) {
    let grid = run("trace", 0, json!({"grid": true}));
    let one = run("trace", 0, json!({"dimension": 1, "power": 1, "mass_sq": 1, "j": 1}));
    let two = run("trace", 0, json!({"dimension": 2, "power": 2, "mass_sq": 1, "j": 1}));
    let t1 = val(&one.report.results["trace"]);
    let t2 = val(&two.report.results["trace"]);
    let e1 = (t1 / PI - 1.0).abs();
    let e2 = (t2 / (PI * PI / 2.0) - 1.0).abs();
    let flags = grid.report.verdicts.iter().find(|v| v.name == "divergence_flags").unwrap();
    let divergent = grid.tables[0].rows.iter().filter(|r| r[5] != "none".into()).count();
    (
        e1 < 1e-6 && e2 < 1e-6 && flags.passed,
        format!("π rel err {e1:.1e}, π²/2 rel err {e2:.1e}; grid flags: {} ({divergent} divergent)", flags.detail),
    )
}

fn c2() -> (bool, String) {
    let o = run("sample", 2, json!({"samples": 100_000, "sources": 5, "z_max": 4}));
    (o.report.passed, verdicts(&o))
}

fn c3() -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for seq in ["inverse_square", "constant", "cubic"] {
        let o = run("support", 0, json!({"sequence": seq, "sizes": [1000, 10000]}));
        ok &= o.report.passed;
        detail.push(format!("{seq} → {}", o.report.results["n_1000"]["tag"]));
    }
    (ok, detail.join(", "))
}

fn c4() -> (bool, String) {
    let unequal = run("kakutani", 0, json!({"first": 1, "second": 2, "n": 64}));
    let equal = run("kakutani", 0, json!({"first": 1.5, "second": 1.5, "n": 64}));
    let want = (2.0 * 2f64.sqrt() / 3.0).powf(32.0);
    let got = val(&unequal.report.results["affinity"]);
    let ok = unequal.report.passed && equal.report.passed && (got - want).abs() <= 1e-10;
    (
        ok,
        format!(
            "ρ = {got:.6e} vs (2√2/3)^32 = {want:.6e}, verdict {}; equal strengths ρ = {}",
            unequal.report.results["verdict"],
            val(&equal.report.results["affinity"])
        ),
    )
}

fn c5() -> (bool, String) {
    let o = run("appendixB", 0, json!({"sigma_exponent": 1.5, "regulator": 1e-3, "truncation": 100_000}));
    let r = &o.report.results;
    (
        o.report.passed,
        format!("mass {:.6}; in E_β: {}, in E_α: {}", val(&r["mass"]), r["point_in_beta_set"], r["point_in_alpha_set"]),
    )
}

fn c6() -> (bool, String) {
    let bridge = run("holder", 6, json!({"measure": "bridge", "samples": 500}));
    let fishnet = run("holder", 6, json!({"measure": "fishnet", "samples": 500}));
    (
        bridge.report.passed && fishnet.report.passed,
        format!(
            "bridge κ = {:.4}, fishnet κ = {:.4}",
            val(&bridge.report.results["exponent"]),
            val(&fishnet.report.results["exponent"])
        ),
    )
}

fn c7() -> (bool, String) {
    let o = run("series_bound", 0, json!({"g_max": 3, "v_max": 3, "grid": 7, "terms": 30}));
    (o.report.passed, verdicts(&o))
}

fn c8() -> (bool, String) {
    let o = run("renorm_det", 0, json!({"point_counts": [2, 3], "regulators": [1e-2, 1e-3, 1e-4]}));
    let r = &o.report.results;
    let fits = |n: usize| {
        let p: Vec<String> = r[&format!("n_{n}")]["fitted_p"].as_array().unwrap().iter().map(|x| format!("{:.4}", val(x))).collect();
        format!("N={n}: p = [{}] vs claimed {}", p.join(", "), n as f64 / 2.0)
    };
    (o.report.passed, format!("{}; {}; {}", fits(2), fits(3), verdicts(&o)))
}

fn c9() -> (bool, String) {
    let o = run("fubini", 9, json!({"dimension": 3, "draws": 1_000_000, "rel_tol": 0.01}));
    (o.report.passed, format!("relative discrepancy {:.3e}", o.report.results["relative_discrepancy"].as_f64().unwrap()))
}

fn c10() -> (bool, String) {
    let o = run("propagator", 10, json!({"variant": "hyperbolic", "slices": 512, "tolerance": 1e-3}));
    (o.report.passed, verdicts(&o))
}

fn c11() -> (bool, String) {
    let o = run("langevin", 11, json!({"modes": 1, "coupling": 1, "degree": 3, "steps": 1_000_000, "ou_check": true}));
    let r = &o.report.results;
    (
        o.report.passed,
        format!(
            "KS = {:.4}; OU variance {:.4} (z = {:.2})",
            r["mode_1"]["ks_distance"].as_f64().unwrap(),
            val(&r["linear_mode_1"]["variance"]),
            r["linear_mode_1"]["z"].as_f64().unwrap()
        ),
    )
}

fn c12() -> (bool, String) {
    let base = json!({"sites": 256, "half_length": 1, "temperature": 1});
    let mut zero = base.clone();
    zero["potential"] = json!("zero");
    let mut quad = base;
    quad["potential"] = json!("quadratic");
    quad["coupling"] = json!(1.0);
    let z = run("ergodic", 12, zero);
    let q = run("ergodic", 13, quad);
    let r = &z.report.results;
    let t = q.report.verdicts.iter().find(|v| v.name == "time_vs_gibbs").unwrap();
    (
        z.report.passed && t.passed,
        format!(
            "V≡0: time {:.4}, Gibbs {:.4}, bridge {:.4}; V=x²: time vs Gibbs {}",
            val(&r["time_average"]),
            val(&r["gibbs_average"]),
            val(&r["bridge_expectation"]),
            t.detail
        ),
    )
}

/// Small configurations so every experiment can be run twice quickly.
fn light(name: &str) -> Value {
    match name {
        "sample" => json!({"samples": 2000}),
        "holder" => json!({"samples": 100}),
        "fubini" => json!({"draws": 20_000}),
        "propagator" => json!({"frequencies": [1.0], "horizons": [1.0], "slices": 64}),
        "langevin" => json!({"steps": 20_000, "burn_in": 1000, "write_trajectory": true}),
        "ergodic" => json!({"sites": 32, "steps": 20_000, "gibbs_draws": 2000, "bridge_draws": 2000, "potential": "quartic", "sampler": "mala"}),
        "bridge" => json!({"draws": 2000, "potential": "quartic"}),
        _ => json!({}),
    }
}

fn c13() -> (bool, String) {
    let mut bad = Vec::new();
    for e in REGISTRY.iter() {
        let a = run(e.name, 1234, light(e.name));
        let b = run(e.name, 1234, light(e.name));
        let csv = |o: &Outcome| o.tables.iter().map(|t| t.to_csv().unwrap()).collect::<Vec<_>>();
        if a.report.body() != b.report.body() || csv(&a) != csv(&b) || a.blobs != b.blobs {
            bad.push(e.name);
        }
    }
    (bad.is_empty(), format!("{} experiments rerun; differing: {bad:?}", REGISTRY.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> (bool, String)); 13] = [
        ("trace formulas", c1),
        ("generating functional", c2),
        ("support classification", c3),
        ("Kakutani dichotomy", c4),
        ("support-set mass and membership", c5),
        ("Hölder regularity", c6),
        ("series bound", c7),
        ("determinant exponent fit", c8),
        ("Gaussian exponential moment", c9),
        ("propagator", c10),
        ("Langevin equilibrium", c11),
        ("ergodic identity", c12),
        ("determinism", c13),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!("{} {:>2} {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
