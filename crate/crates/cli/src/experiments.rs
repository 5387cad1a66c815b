//! The registered experiments.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use fieldlab::ergodic::{self, LatticeString, Observable, SitePotential};
use fieldlab::langevin::{self, GalerkinSystem, LangevinConfig, Nonlinearity, Verdict};
use fieldlab::measure::{self, KakutaniVerdict, MeasureSpec, Membership, Sequence, SupportTag, VarianceLaw};
use fieldlab::propagator::{self, ModeChannel, Variant};
use fieldlab::spectral::{self, TraceValue};
use fieldlab::stats::Estimate;
use fieldlab::{renorm, rng};
use nalgebra::DMatrix;
use rand::Rng;
use serde_json::json;

use crate::params::{p, Bound, Default as D, Kind, ParamSpec, Params};
use crate::report::{estimate, exact, num, Table};
use crate::{Ctx, Experiment, RunError};

const POS: Bound = Bound::Positive;
const NONNEG: Bound = Bound::NonNegative;

const fn int(b: Bound) -> Kind {
    Kind::Int(b)
}

const fn float(b: Bound) -> Kind {
    Kind::Float(b)
}

fn fail(msg: impl Into<String>) -> RunError {
    RunError::Validation(msg.into())
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

pub static REGISTRY: [Experiment; 13] = [
    Experiment {
        name: "trace",
        summary: "momentum-space trace of (-Δ)^{-αj} regularized by m², with divergence flags",
        relations: &[
            "Tr G^j = |S^{ν-1}|/(2π)^ν ∫ k^{ν-1} (k^{2α} + m²)^{-j} dk",
            "convergence iff 2αj > ν",
        ],
        params: &TRACE,
        run: trace,
    },
    Experiment {
        name: "sample",
        summary: "Karhunen–Loève samples and the empirical characteristic functional",
        relations: &["E exp(i⟨j, φ⟩) = exp(-½ Σ_k v(λ_k) j_k²)", "v(λ) = 1/(λ^α + m²), e^{-αλ} or γ"],
        params: &SAMPLE,
        run: sample,
    },
    Experiment {
        name: "support",
        summary: "support classification of a canonical variance sequence",
        relations: &["Σ v_k < ∞ ⇒ L²", "S_N = O(N^p) ⇒ weighted sequence space of order p"],
        params: &SUPPORT,
        run: support,
    },
    Experiment {
        name: "kakutani",
        summary: "Hellinger affinity of two product Gaussian measures with constant strengths",
        relations: &["ρ = Π_k (2√(γ₁γ₂)/(γ₁+γ₂))^{1/2}", "Σ (1 - h_k) = ∞ ⇔ singular"],
        params: &KAKUTANI,
        run: kakutani,
    },
    Experiment {
        name: "appendixB",
        summary: "mass of the weighted set E_α and membership of a test point",
        relations: &[
            "μ_ε(E_α) = Π_k (1 + 2ε α_k² σ_k²)^{-1/2} → 1",
            "x ∈ E_α ⇔ Σ α_k² x_k² < ∞",
        ],
        params: &APPENDIX_B,
        run: appendix_b,
    },
    Experiment {
        name: "holder",
        summary: "Hölder exponent of sampled paths by dyadic increment regression",
        relations: &["E|f(x+h) - f(x)| ∝ h^κ", "κ = ½ for Brownian-bridge paths"],
        params: &HOLDER,
        run: holder,
    },
    Experiment {
        name: "renorm_det",
        summary: "fitted exponent of |det G_α|^{-1/2} near α = 1, reported against N/2",
        relations: &["|det G_α|^{-1/2} ∝ |1 - α|^p", "claimed p = N/2"],
        params: &RENORM_DET,
        run: renorm_det,
    },
    Experiment {
        name: "series_bound",
        summary: "partial sums of Σ (gV)ⁿ/(n!√n) against e^{gV} on a grid",
        relations: &["Σ_{n≤N} (gV)ⁿ/(n!√n) ≤ e^{gV}"],
        params: &SERIES_BOUND,
        run: series_bound,
    },
    Experiment {
        name: "fubini",
        summary: "Gaussian exponential moment behind the quartic reduction",
        relations: &["E exp(-⟨v, w⟩) = exp(½⟨w, G w⟩) for v ~ N(0, G)"],
        params: &FUBINI,
        run: fubini,
    },
    Experiment {
        name: "propagator",
        summary: "closed-form mode propagator against the exact lattice Gaussian integral",
        relations: &[
            "K = √(λ/sinh λT) exp{-λ/(2 sinh λT)[(φ₀² + φ_T²) cosh λT - 2φ₀φ_T] + source terms}",
            "K[j; φ₀, φ_T] = K[0; 0, 0] · exp(-S_cl)",
        ],
        params: &PROPAGATOR,
        run: propagator_exp,
    },
    Experiment {
        name: "langevin",
        summary: "Galerkin-truncated Langevin dynamics against its Gibbs law",
        relations: &["da = -∇H dt + √(2kT) dW", "stationary law ∝ exp(-H/kT), H = Σ λ_k a_k² + ∫ W(u)"],
        params: &LANGEVIN,
        run: langevin_exp,
    },
    Experiment {
        name: "ergodic",
        summary: "time average, Gibbs average and bridge expectation of x(0)² on a pinned string",
        relations: &[
            "lim (1/T) ∫ F(x_t) dt = ∫ F dμ_Gibbs",
            "∫ F dμ_Gibbs = E_bridge[F e^{-(1/2kT)∫V}] / E_bridge[e^{-(1/2kT)∫V}]",
            "V ≡ 0: E x(0)² = kT·L/2",
        ],
        params: &ERGODIC,
        run: ergodic_exp,
    },
    Experiment {
        name: "bridge",
        summary: "reweighted Brownian-bridge expectations with Richardson extrapolation",
        relations: &[
            "E cos(t x(0)) = exp(-t² kT L/4) for V ≡ 0",
            "V = c x²: E x(0)² = kT · G_{√c}(0, 0)",
        ],
        params: &BRIDGE,
        run: bridge_exp,
    },
];

// ---------------------------------------------------------------- trace

static TRACE: [ParamSpec; 7] = [
    p("dimension", Kind::Int(Bound::Range(1.0, 3.0)), D::Int(1), "space dimension ν"),
    p("power", float(POS), D::Float(1.0), "fractional power α"),
    p("mass_sq", float(NONNEG), D::Float(1.0), "infrared regulator m²"),
    p("j", Kind::Int(Bound::Range(1.0, 8.0)), D::Int(1), "power of the Green operator"),
    p("expected", float(Bound::Any), D::Optional, "reference value for the trace"),
    p("rel_tol", float(POS), D::Float(1e-6), "relative tolerance against `expected`"),
    p("grid", Kind::Bool, D::Bool(false), "also sweep ν ∈ 1..3, α ∈ {0.6, 1, 1.6, 2.4}, j ∈ {1, 2}"),
];

fn trace_value_json(t: &TraceValue) -> serde_json::Value {
    match t {
        TraceValue::Finite { value, abs_error } => json!({ "value": num(*value), "abs_error": num(*abs_error) }),
        TraceValue::Divergent(d) => json!({ "divergent": d }),
    }
}

fn divergence_name(t: &TraceValue) -> String {
    match t {
        TraceValue::Finite { .. } => "none".into(),
        TraceValue::Divergent(d) => serde_json::to_value(d).unwrap().as_str().unwrap().to_string(),
    }
}

fn trace(p: &Params, _seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let m2 = p.f("mass_sq");
    let mut table =
        Table::new("trace", &["dimension", "power", "mass_sq", "j", "value", "divergence", "converges_by_condition"]);
    let mut points = vec![(p.u("dimension"), p.f("power"), p.u("j") as u32)];
    if p.b("grid") {
        for nu in 1..=3 {
            for alpha in [0.6, 1.0, 1.6, 2.4] {
                for j in 1..=2 {
                    if !points.contains(&(nu, alpha, j)) {
                        points.push((nu, alpha, j));
                    }
                }
            }
        }
    }
    let mut mismatches = Vec::new();
    for (i, &(nu, alpha, j)) in points.iter().enumerate() {
        let t = spectral::momentum_trace(nu, alpha, m2, j)?;
        let converges = 2.0 * alpha * j as f64 > nu as f64;
        if i == 0 {
            cx.result("trace", trace_value_json(&t));
            cx.result("converges_by_condition", json!(converges));
        }
        // with m² = 0 an infrared divergence can occur independently of the condition
        if m2 > 0.0 && t.is_divergent() == converges {
            mismatches.push(format!("ν={nu} α={alpha} j={j}"));
        }
        table.push(vec![
            nu.into(),
            alpha.into(),
            m2.into(),
            (j as usize).into(),
            t.value().unwrap_or(f64::NAN).into(),
            divergence_name(&t).into(),
            converges.into(),
        ]);
    }
    if m2 > 0.0 {
        cx.verdict(
            "divergence_flags",
            mismatches.is_empty(),
            format!("{} points checked against 2αj > ν; mismatches: {:?}", points.len(), mismatches),
        );
    }
    if p.has("expected") {
        let want = p.f("expected");
        let got = spectral::momentum_trace(p.u("dimension"), p.f("power"), m2, p.u("j") as u32)?.value();
        let err = got.map(|v| rel(v, want)).unwrap_or(f64::INFINITY);
        cx.verdict("expected_value", err <= p.f("rel_tol"), format!("relative error {err:e} vs {want}"));
    }
    cx.table(table);
    Ok(())
}

// ---------------------------------------------------------------- sample

const LAWS: &[&str] = &["power_law", "exponential", "white"];

fn variance_law(p: &Params) -> VarianceLaw {
    match p.s("law") {
        "power_law" => VarianceLaw::PowerLaw { power: p.f("power"), mass_sq: p.f("mass_sq") },
        "exponential" => VarianceLaw::Exponential { rate: p.f("rate") },
        _ => VarianceLaw::White { strength: p.f("strength") },
    }
}

static SAMPLE: [ParamSpec; 14] = [
    p("half_length", float(POS), D::Float(1.0), "interval [-L, L]"),
    p("modes", int(POS), D::Int(16), "KL truncation"),
    p("samples", Kind::Int(Bound::Range(2.0, 1e8)), D::Int(100_000), "number of KL draws"),
    p("sources", Kind::Int(NONNEG), D::Int(5), "random sparse sources to test"),
    p("source_support", int(POS), D::Int(3), "nonzero entries per source"),
    p("source_scale", float(POS), D::Float(1.0), "source entries uniform in [-s, s]"),
    p("z_max", float(POS), D::Float(4.0), "allowed |z| between empirical and exact"),
    p("export_samples", Kind::Int(NONNEG), D::Int(5), "paths written to samples.csv"),
    p("grid_points", Kind::Int(Bound::Range(2.0, 1e6)), D::Int(201), "evaluation points per exported path"),
    p("law", Kind::Choice(LAWS), D::Text("power_law"), "variance law v(λ)"),
    p("power", float(POS), D::Float(1.0), "α in 1/(λ^α + m²)"),
    p("mass_sq", float(NONNEG), D::Float(1.0), "m² in 1/(λ^α + m²)"),
    p("rate", float(POS), D::Float(1.0), "α in e^{-αλ}"),
    p("strength", float(POS), D::Float(1.0), "γ of the white law"),
];

fn interval_spec(p: &Params, modes: usize) -> Result<MeasureSpec, RunError> {
    let model = Arc::new(spectral::build_interval_dirichlet(p.f("half_length"), modes)?);
    Ok(MeasureSpec::new(model, variance_law(p), modes)?)
}

fn sample(p: &Params, seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let modes = p.u("modes");
    let support = p.u("source_support");
    if support > modes {
        return Err(fail(format!("parameter `source_support` ({support}) exceeds `modes` ({modes})")));
    }
    let spec = interval_spec(p, modes)?;
    let draws = measure::sample_kl(&spec, seed, p.u("samples"))?;

    let mut chars = Table::new("characteristic", &["source", "modes", "values", "exact", "empirical", "std_error", "z"]);
    let mut worst: f64 = 0.0;
    for s in 0..p.u("sources") {
        let mut r = rng::stream(seed, 1 + s as u64);
        let mut idx = rand::seq::index::sample(&mut r, modes, support).into_vec();
        idx.sort_unstable();
        let scale = p.f("source_scale");
        let mut j = vec![0.0; modes];
        for &k in &idx {
            j[k] = scale * (2.0 * r.random::<f64>() - 1.0);
        }
        let want = measure::characteristic_functional(&spec, &j)?;
        let got = measure::empirical_characteristic(&draws, &j);
        let z = got.z_score(want);
        worst = worst.max(z.abs());
        let join = |v: Vec<String>| v.join(" ");
        chars.push(vec![
            s.into(),
            join(idx.iter().map(|k| (k + 1).to_string()).collect()).into(),
            join(idx.iter().map(|&k| crate::report::format_float(j[k])).collect()).into(),
            want.into(),
            got.value.into(),
            got.std_error.into(),
            z.into(),
        ]);
        cx.result(format!("source_{s}"), json!({ "exact": exact(want), "empirical": estimate(got), "z": num(z) }));
    }
    if p.u("sources") > 0 {
        let z_max = p.f("z_max");
        cx.verdict("characteristic_functional", worst < z_max, format!("max |z| = {worst:.3} (limit {z_max})"));
    }
    cx.result("variances", json!(spec.variances().iter().map(|v| num(*v)).collect::<Vec<_>>()));

    let mut paths = Table::new("samples", &["sample", "x", "f"]);
    let l = p.f("half_length");
    let n = p.u("grid_points");
    for (s, draw) in draws.iter().take(p.u("export_samples")).enumerate() {
        for i in 0..n {
            let x = if n == 1 { 0.0 } else { -l + 2.0 * l * i as f64 / (n - 1) as f64 };
            paths.push(vec![s.into(), x.into(), draw.eval1(x).into()]);
        }
    }
    cx.table(chars);
    cx.table(paths);
    Ok(())
}

// ---------------------------------------------------------------- support

static SUPPORT: [ParamSpec; 3] = [
    p("sequence", Kind::Choice(&["inverse_square", "constant", "cubic"]), D::Text("inverse_square"), "v_k = 1/k², γ or k³"),
    p("gamma", float(POS), D::Float(0.8), "γ for the constant sequence"),
    p("sizes", Kind::IntList(Bound::Range(4.0, 1e8)), D::Ints(&[1000, 10_000]), "truncations N to classify at"),
];

fn tag_name(t: SupportTag) -> String {
    match t {
        SupportTag::HilbertL2 => "hilbert_l2".into(),
        SupportTag::WeightedSequence { p } => format!("weighted_sequence({p})"),
        SupportTag::TemperedDistribution => "tempered_distribution".into(),
        SupportTag::SmoothFunction => "smooth_function".into(),
    }
}

fn support(p: &Params, _seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let gamma = p.f("gamma");
    let (seq, growth, expected): (fn(usize, f64) -> f64, fn(usize) -> f64, SupportTag) = match p.s("sequence") {
        "inverse_square" => (|k, _| 1.0 / (k * k) as f64, |_| 1.0, SupportTag::HilbertL2),
        "constant" => (|_, g| g, |k| k as f64, SupportTag::TemperedDistribution),
        _ => (|k, _| (k as f64).powi(3), |k| (k as f64).powi(4), SupportTag::WeightedSequence { p: 4 }),
    };
    let mut table = Table::new(
        "support",
        &["n", "tag", "partial_sum", "tail_exponent", "growth_exponent", "growth_r_squared", "max_growth_ratio"],
    );
    let mut tags = Vec::new();
    for n in p.ints("sizes") {
        let v: Vec<f64> = (1..=n).map(|k| seq(k, gamma)).collect();
        let label = measure::support_diagnostic(&v, growth)?;
        let e = label.evidence;
        tags.push(label.tag);
        table.push(vec![
            n.into(),
            tag_name(label.tag).into(),
            e.partial_sum.into(),
            e.tail_exponent.into(),
            e.growth_exponent.into(),
            e.growth_r_squared.into(),
            e.max_growth_ratio.into(),
        ]);
        cx.result(
            format!("n_{n}"),
            json!({
                "tag": tag_name(label.tag),
                "partial_sum": exact(e.partial_sum),
                "tail_exponent": exact(e.tail_exponent),
                "growth_exponent": exact(e.growth_exponent),
            }),
        );
    }
    let stable = tags.windows(2).all(|w| w[0] == w[1]);
    cx.verdict("stable_across_sizes", stable, format!("{:?}", tags.iter().map(|t| tag_name(*t)).collect::<Vec<_>>()));
    cx.verdict(
        "expected_class",
        tags.iter().all(|t| *t == expected),
        format!("expected {}", tag_name(expected)),
    );
    cx.table(table);
    Ok(())
}

// ---------------------------------------------------------------- kakutani

static KAKUTANI: [ParamSpec; 3] = [
    p("first", float(POS), D::Float(1.0), "constant strength γ₁"),
    p("second", float(POS), D::Float(2.0), "constant strength γ₂"),
    p("n", Kind::Int(Bound::Range(1.0, 1e7)), D::Int(64), "number of modes"),
];

fn kakutani(p: &Params, _seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let (a, b, n) = (p.f("first"), p.f("second"), p.u("n"));
    let r = measure::kakutani_affinity(&vec![a; n], &vec![b; n], n)?;
    let per_mode = (2.0 * (a * b).sqrt() / (a + b)).sqrt();
    let mut table = Table::new("kakutani", &["k", "partial_affinity"]);
    let mut direct = 1.0;
    for k in 1..=n {
        direct *= per_mode;
        table.push(vec![k.into(), direct.into()]);
    }
    let verdict = serde_json::to_value(r.verdict).unwrap();
    cx.result("affinity", exact(r.affinity));
    cx.result("log_affinity", exact(r.log_affinity));
    cx.result("hellinger_series", exact(r.hellinger_series));
    cx.result("direct_product", exact(direct));
    cx.result("verdict", verdict.clone());
    let diff = (r.affinity - direct).abs();
    cx.verdict("matches_direct_product", diff <= 1e-10, format!("|ρ - Π h_k| = {diff:e}"));
    let expected = if a == b { KakutaniVerdict::Equivalent } else { KakutaniVerdict::Singular };
    cx.verdict("dichotomy", r.verdict == expected, format!("got {verdict}, expected {}", json!(expected)));
    if a == b {
        cx.verdict("equal_strengths_unit_affinity", r.affinity == 1.0, format!("ρ = {}", r.affinity));
    }
    cx.table(table);
    Ok(())
}

// ---------------------------------------------------------------- appendixB

static APPENDIX_B: [ParamSpec; 4] = [
    p("sigma_exponent", Kind::Float(Bound::Range(1.0 + 1e-9, 1e3)), D::Float(1.5), "σ_k = k^{-σ}"),
    p("regulator", float(POS), D::Float(1e-3), "ε"),
    p("truncation", Kind::Int(Bound::Range(1.0, 1e8)), D::Int(100_000), "modes N"),
    p("mass_min", Kind::Float(Bound::Range(0.0, 1.0)), D::Float(0.99), "required lower bound on the mass"),
];

fn appendix_b(p: &Params, _seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let s = p.f("sigma_exponent");
    let sigma = Sequence::power(1.0, -s);
    let alpha = Sequence::power(1.0, s - 1.0);
    let beta = Sequence::power(1.0, s - 1.5);
    let point = Sequence::power(1.0, -(s - 1.0) - 0.5);
    let n = p.u("truncation");
    let eps = p.f("regulator");
    let a = measure::support_set_analysis(&sigma, &alpha, eps, n)?;
    let b = measure::support_set_analysis(&sigma, &beta, eps, n)?;
    let mut table = Table::new("appendix_b", &["n", "mass", "weighted_trace"]);
    let mut sizes: Vec<usize> = std::iter::successors(Some(10usize), |k| k.checked_mul(10)).take_while(|k| *k < n).collect();
    sizes.push(n);
    for k in sizes {
        let r = measure::support_set_analysis(&sigma, &alpha, eps, k)?;
        table.push(vec![k.into(), r.mass.into(), r.weighted_trace.into()]);
    }
    let (in_alpha, in_beta) = (a.contains(&point), b.contains(&point));
    cx.result("mass", exact(a.mass));
    cx.result("log_mass", exact(a.log_mass));
    cx.result("weighted_trace", exact(a.weighted_trace));
    cx.result("point_in_alpha_set", json!(in_alpha));
    cx.result("point_in_beta_set", json!(in_beta));
    let min = p.f("mass_min");
    cx.verdict("mass", a.mass >= min && a.mass <= 1.0, format!("mass {} (require ≥ {min})", a.mass));
    cx.verdict(
        "membership",
        in_beta == Membership::Member && in_alpha == Membership::NonMember,
        format!("β-set: {}, α-set: {}", json!(in_beta), json!(in_alpha)),
    );
    cx.table(table);
    Ok(())
}

// ---------------------------------------------------------------- holder

static HOLDER: [ParamSpec; 11] = [
    p(
        "measure",
        Kind::Choice(&["bridge", "fishnet", "custom"]),
        D::Text("bridge"),
        "bridge: v = 1/λ; fishnet: v = e^{-λ}; custom: the law parameters",
    ),
    p("half_length", float(POS), D::Float(1.0), "interval [-L, L]"),
    p("modes", int(POS), D::Int(256), "KL truncation"),
    p("samples", Kind::Int(Bound::Range(100.0, 1e7)), D::Int(500), "sampled paths"),
    p("tolerance", float(POS), D::Float(0.1), "allowed |κ - ½| for the bridge"),
    p("smooth_min", float(POS), D::Float(0.95), "required κ for the fishnet measure"),
    p("law", Kind::Choice(LAWS), D::Text("white"), "variance law v(λ)"),
    p("power", float(POS), D::Float(1.0), "α in 1/(λ^α + m²)"),
    p("mass_sq", float(NONNEG), D::Float(1.0), "m² in 1/(λ^α + m²)"),
    p("rate", float(POS), D::Float(1.0), "α in e^{-αλ}"),
    p("strength", float(POS), D::Float(1.0), "γ of the white law"),
];

fn holder(p: &Params, seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let modes = p.u("modes");
    let model = Arc::new(spectral::build_interval_dirichlet(p.f("half_length"), modes)?);
    let law = match p.s("measure") {
        "bridge" => VarianceLaw::PowerLaw { power: 1.0, mass_sq: 0.0 },
        "fishnet" => VarianceLaw::Exponential { rate: 1.0 },
        _ => variance_law(p),
    };
    // fast-decaying laws underflow long before `modes`; keep the representable ones
    let usable = model.eigenvalues().iter().take(modes).take_while(|l| law.variance(**l) > f64::MIN_POSITIVE).count();
    if usable == 0 {
        return Err(fail("no mode has a representable variance under this law"));
    }
    let spec = MeasureSpec::new(model, law, usable)?;
    cx.result("law", serde_json::to_value(law).unwrap());
    cx.result("modes_used", json!(usable));
    match measure::holder_exponent_estimate(&spec, p.u("samples"), seed)? {
        measure::HolderOutcome::Estimated(e) => {
            cx.result("exponent", estimate(Estimate { value: e.exponent, std_error: e.std_error }));
            cx.result("r_squared", exact(e.r_squared));
            match p.s("measure") {
                "bridge" => {
                    let tol = p.f("tolerance");
                    cx.verdict("brownian_exponent", (e.exponent - 0.5).abs() <= tol, format!("κ = {:.4} (½ ± {tol})", e.exponent));
                }
                "fishnet" => {
                    let min = p.f("smooth_min");
                    cx.verdict("smooth_paths", e.exponent > min, format!("κ = {:.4} (require > {min})", e.exponent));
                }
                _ => {}
            }
        }
        measure::HolderOutcome::Undefined => {
            cx.result("exponent", json!("undefined"));
            if p.s("measure") != "custom" {
                cx.verdict("exponent_defined", false, "degenerate paths");
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- renorm_det

static RENORM_DET: [ParamSpec; 5] = [
    p("point_counts", Kind::IntList(Bound::Range(1.0, 5.0)), D::Ints(&[2, 3]), "N; the first N of (0,0), (1,0), (0,1), (1,1), (½,⅓)"),
    p("regulators", Kind::FloatList(POS), D::Floats(&[1e-2, 1e-3, 1e-4]), "short-distance regulators δ"),
    p("offsets", Kind::FloatList(Bound::Range(1e-12, 0.5)), D::Floats(&renorm::DEFAULT_SWEEP_OFFSETS), "sweep |1 - α|"),
    p("r_squared_min", Kind::Float(Bound::Range(0.0, 1.0)), D::Float(0.99), "required fit quality"),
    p("spread_max", float(POS), D::Float(0.05), "allowed spread of p across regulators"),
];

const CANONICAL_POINTS: [[f64; 2]; 5] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 1.0 / 3.0]];

fn renorm_det(p: &Params, _seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let offsets = p.floats("offsets");
    let mut table = Table::new("renorm_sweep", &["points", "regulator", "alpha", "abs_det_inv_sqrt", "fitted_p", "r_squared"]);
    let (r2_min, spread_max) = (p.f("r_squared_min"), p.f("spread_max"));
    for n in p.ints("point_counts") {
        let pts = &CANONICAL_POINTS[..n];
        let mut slopes = Vec::new();
        let mut r2 = Vec::new();
        for delta in p.floats("regulators") {
            let sweep = renorm::determinant_exponent_sweep(pts, delta, &offsets)?;
            for row in &sweep.rows {
                table.push(vec![
                    n.into(),
                    delta.into(),
                    row.power.into(),
                    row.value.into(),
                    sweep.fit.slope.into(),
                    sweep.fit.r_squared.into(),
                ]);
            }
            slopes.push(sweep.fit.slope);
            r2.push(sweep.fit.r_squared);
        }
        let spread = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let worst_r2 = r2.iter().cloned().fold(f64::INFINITY, f64::min);
        cx.result(
            format!("n_{n}"),
            json!({
                "fitted_p": slopes.iter().map(|s| exact(*s)).collect::<Vec<_>>(),
                "r_squared": r2.iter().map(|s| num(*s)).collect::<Vec<_>>(),
                "claimed_p": exact(n as f64 / 2.0),
                "spread": exact(spread),
            }),
        );
        cx.verdict(format!("fit_quality_n{n}"), worst_r2 > r2_min, format!("min R² = {worst_r2:.6}"));
        cx.verdict(format!("reproducible_n{n}"), spread <= spread_max, format!("p spread {spread:.4} over regulators (limit {spread_max})"));
    }
    cx.table(table);
    Ok(())
}

// ---------------------------------------------------------------- series_bound

static SERIES_BOUND: [ParamSpec; 4] = [
    p("g_max", float(NONNEG), D::Float(3.0), "largest renormalized coupling"),
    p("v_max", float(NONNEG), D::Float(3.0), "largest interaction bound"),
    p("grid", Kind::Int(Bound::Range(1.0, 1000.0)), D::Int(7), "grid points per axis"),
    p("terms", Kind::Int(Bound::Range(1.0, 1000.0)), D::Int(30), "highest series order"),
];

fn series_bound(p: &Params, _seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let n = p.u("grid");
    let at = |max: f64, i: usize| if n == 1 { max } else { max * i as f64 / (n - 1) as f64 };
    let mut table = Table::new("series_bound", &["g", "v", "terms", "partial_sum", "bound", "within_bound", "monotone"]);
    let mut bad = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (g, v) = (at(p.f("g_max"), i), at(p.f("v_max"), j));
            let r = renorm::series_bound_check(g, v, p.u("terms"))?;
            if !(r.within_bound && r.monotone) {
                bad.push(format!("(g={g}, V={v})"));
            }
            let last = *r.partial_sums.last().expect("at least one term");
            table.push(vec![g.into(), v.into(), p.u("terms").into(), last.into(), r.bound.into(), r.within_bound.into(), r.monotone.into()]);
        }
    }
    cx.result("grid_points", json!(n * n));
    cx.verdict("bounded_by_exponential", bad.is_empty(), format!("violations: {bad:?}"));
    cx.table(table);
    Ok(())
}

// ---------------------------------------------------------------- fubini

static FUBINI: [ParamSpec; 5] = [
    p("dimension", Kind::Int(Bound::Range(1.0, 6.0)), D::Int(3), "n"),
    p("kernel_seed", Kind::Int(NONNEG), D::Int(5), "seed of the random SPD kernel G"),
    p("weights", Kind::FloatList(NONNEG), D::Floats(&[0.6, 0.3, 0.2]), "w (length n)"),
    p("draws", Kind::Int(Bound::Range(2.0, 1e9)), D::Int(1_000_000), "Monte Carlo draws"),
    p("rel_tol", float(POS), D::Float(0.01), "allowed relative discrepancy"),
];

fn fubini(p: &Params, seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let n = p.u("dimension");
    let w = p.floats("weights");
    if w.len() != n {
        return Err(fail(format!("parameter `weights` has {} entries but `dimension` is {n}", w.len())));
    }
    let g: DMatrix<f64> = renorm::random_spd_kernel(n, p.u("kernel_seed") as u64);
    let c = renorm::fubini_quartic_check(&g, &w, p.u("draws"), seed)?;
    cx.result("analytic", exact(c.analytic));
    cx.result("monte_carlo", estimate(c.monte_carlo));
    cx.result("relative_discrepancy", num(c.relative_discrepancy));
    cx.result("quartic_sign", json!(c.quartic_sign));
    cx.result("displayed_sign", json!(c.displayed_sign));
    cx.result("sign_matches", json!(c.sign_matches()));
    let tol = p.f("rel_tol");
    cx.verdict("exponential_moment", c.relative_discrepancy < tol, format!("relative discrepancy {:.3e} (limit {tol})", c.relative_discrepancy));
    let mut table = Table::new("fubini_kernel", &["i", "j", "g_ij"]);
    for i in 0..n {
        for j in 0..n {
            table.push(vec![i.into(), j.into(), g[(i, j)].into()]);
        }
    }
    cx.table(table);
    Ok(())
}

// ---------------------------------------------------------------- propagator

static PROPAGATOR: [ParamSpec; 7] = [
    p("frequencies", Kind::FloatList(POS), D::Floats(&[0.5, 1.0, 2.0]), "mode frequencies λ"),
    p("horizons", Kind::FloatList(POS), D::Floats(&[0.5, 1.0, 2.0]), "Euclidean times T"),
    p("variant", Kind::Choice(&["hyperbolic", "trigonometric"]), D::Text("hyperbolic"), "sinh/cosh or sin/cos kernel"),
    p("slices", Kind::Int(Bound::Range(15.0, 1e5)), D::Int(512), "lattice time slices"),
    p("source_amplitude", float(NONNEG), D::Float(0.5), "scale of the random source j(t)"),
    p("source_points", Kind::Int(Bound::Range(3.0, 1e6)), D::Int(257), "samples of j on [0, T]"),
    p("tolerance", float(POS), D::Float(1e-3), "allowed |ln K_closed - ln K_lattice|"),
];

fn propagator_exp(p: &Params, seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let variant = if p.s("variant") == "hyperbolic" { Variant::Hyperbolic } else { Variant::Trigonometric };
    let (slices, amp, npts, tol) = (p.u("slices"), p.f("source_amplitude"), p.u("source_points"), p.f("tolerance"));
    let mut table = Table::new(
        "propagator",
        &["lambda", "horizon", "start", "end", "closed_log", "lattice_log", "log_ratio", "factorization_residual"],
    );
    let mut classical = Table::new("classical", &["lambda", "horizon", "t", "sigma"]);
    let (mut worst_ratio, mut worst_fact) = (0.0f64, 0.0f64);
    let mut index = 0u64;
    for lam in p.floats("frequencies") {
        for t in p.floats("horizons") {
            let mut r = rng::stream(seed, index);
            index += 1;
            let mut u = || 2.0 * r.random::<f64>() - 1.0;
            let (a, b, c0, c1) = (u(), u(), u(), u());
            let source: Vec<f64> = (0..npts)
                .map(|i| {
                    let s = t * i as f64 / (npts - 1) as f64;
                    amp * (c0 + c1 * (std::f64::consts::PI * s / t).cos())
                })
                .collect();
            let full = ModeChannel::new(lam, t, a, b, source.clone(), variant)?;
            let bare = ModeChannel::new(lam, t, 0.0, 0.0, Vec::new(), variant)?;
            let closed = propagator::mode_propagator_closed_form(&full)?.log_magnitude;
            let lattice = propagator::lattice_propagator_oracle(&full, slices)?.log_value;
            let cl = propagator::classical_field_bvp(lam, t, &source, a, b, slices + 1)?;
            let closed_bare = propagator::mode_propagator_closed_form(&bare)?.log_magnitude;
            let fact = (closed - (closed_bare - cl.action)).abs();
            worst_ratio = worst_ratio.max((closed - lattice).abs());
            worst_fact = worst_fact.max(fact);
            table.push(vec![lam.into(), t.into(), a.into(), b.into(), closed.into(), lattice.into(), (closed - lattice).into(), fact.into()]);
            for (s, v) in cl.times.iter().zip(&cl.values) {
                classical.push(vec![lam.into(), t.into(), (*s).into(), (*v).into()]);
            }
        }
    }
    cx.result("max_log_ratio", exact(worst_ratio));
    cx.result("max_factorization_residual", exact(worst_fact));
    cx.verdict("closed_form_vs_lattice", worst_ratio < tol, format!("max |ln K - ln K_M| = {worst_ratio:.3e} (limit {tol})"));
    cx.verdict("classical_fluctuation_factorization", worst_fact < tol, format!("max residual {worst_fact:.3e} (limit {tol})"));
    cx.table(table);
    cx.table(classical);
    Ok(())
}

// ---------------------------------------------------------------- langevin

static LANGEVIN: [ParamSpec; 13] = [
    p("half_length", float(POS), D::Float(FRAC_PI_2), "interval [-L, L]"),
    p("modes", Kind::Int(Bound::Range(1.0, 64.0)), D::Int(1), "Galerkin modes"),
    p("coupling", float(NONNEG), D::Float(1.0), "c in V(u) = c·u^p; energy density c·u^{p+1}/(p+1)"),
    p("degree", Kind::Int(Bound::Range(1.0, 9.0)), D::Int(3), "p; odd p gives a confining energy"),
    p("grid_points", Kind::Int(Bound::Range(8.0, 1e5)), D::Int(129), "quadrature nodes for the projection"),
    p("dt", float(POS), D::Float(0.005), "Euler–Maruyama step"),
    p("temperature", float(POS), D::Float(1.0), "kT"),
    p("steps", Kind::Int(Bound::Range(2.0, 1e9)), D::Int(1_000_000), "integration steps"),
    p("burn_in", Kind::Int(NONNEG), D::Int(10_000), "discarded initial steps"),
    p("thin", int(POS), D::Int(1), "keep every k-th step"),
    p("ou_check", Kind::Bool, D::Bool(true), "also run the linear system against kT/(2λ)"),
    p("z_max", float(POS), D::Float(3.0), "allowed |z| for the linear variance"),
    p("write_trajectory", Kind::Bool, D::Bool(false), "write trajectory.f64 with a JSON sidecar"),
];

fn langevin_exp(p: &Params, seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let modes = p.u("modes");
    let c = p.f("coupling");
    let nonlinearity = if c == 0.0 { Nonlinearity::zero() } else { Nonlinearity::monomial(c, p.u("degree") as u32) };
    if modes > 3 && !nonlinearity.vanishes() {
        return Err(fail("reference marginals for coupled systems need `modes` ≤ 3"));
    }
    let model = Arc::new(spectral::build_interval_dirichlet(p.f("half_length"), modes)?);
    let sys = GalerkinSystem::new(Arc::clone(&model), modes, nonlinearity, p.u("grid_points"))?;
    let dt = p.f("dt");
    if dt * sys.stiffness() >= 1.0 {
        return Err(fail(format!(
            "parameter `dt` = {dt} is unstable: Euler–Maruyama needs dt·λ_max < 1 (λ_max = {})",
            sys.stiffness()
        )));
    }
    let kt = p.f("temperature");
    let cfg = LangevinConfig::new(p.f("dt"), kt, p.u("steps"), p.u("burn_in"), seed)?.thinned(p.u("thin"));
    let lin = if p.b("ou_check") {
        let free = GalerkinSystem::new(Arc::clone(&model), modes, Nonlinearity::zero(), p.u("grid_points"))?;
        let lin_cfg = LangevinConfig::new(p.f("dt"), kt, p.u("steps"), p.u("burn_in"), seed.wrapping_add(1))?.thinned(p.u("thin"));
        Some((free, lin_cfg))
    } else {
        None
    };

    let zero = vec![0.0; modes];
    let st = langevin::simulate(&sys, &cfg, &zero)?;
    let rep = langevin::equilibrium_test(&st, &sys, kt)?;
    let span = 1.5 * st.samples.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())) + 1.0;
    let refs = langevin::gibbs_marginals(&sys, kt, span)?;
    let mut hist = Table::new("langevin_marginals", &["mode", "bin_left", "bin_right", "empirical_probability", "gibbs_probability"]);
    for (k, (h, m)) in st.histograms.iter().zip(&refs).enumerate() {
        let total = h.total() as f64;
        for (i, count) in h.counts.iter().enumerate() {
            let (lo, hi) = (h.edges[i], h.edges[i + 1]);
            hist.push(vec![(k + 1).into(), lo.into(), hi.into(), (*count as f64 / total).into(), (m.cdf(hi) - m.cdf(lo)).into()]);
        }
    }
    for (k, m) in rep.modes.iter().enumerate() {
        cx.result(
            format!("mode_{}", k + 1),
            json!({
                "ks_distance": num(m.ks_distance),
                "second_moment": estimate(m.empirical_second_moment),
                "gibbs_second_moment": exact(m.reference_second_moment),
                "z": num(m.z_score),
                "autocorrelation_time": num(st.autocorrelation_times[k]),
            }),
        );
        cx.verdict(
            format!("ks_mode_{}", k + 1),
            m.ks_distance < langevin::KS_THRESHOLD,
            format!("KS = {:.4} (limit {})", m.ks_distance, langevin::KS_THRESHOLD),
        );
    }
    let verdict = serde_json::to_value(rep.verdict).unwrap();
    cx.result("equilibrium_verdict", verdict.clone());
    cx.verdict("equilibrium", rep.verdict == Verdict::Pass, format!("KS and second-moment test: {verdict}"));

    if let Some((free, lin_cfg)) = lin {
        let lst = langevin::simulate(&free, &lin_cfg, &zero)?;
        let z_max = p.f("z_max");
        for (k, m2) in lst.second_moments.iter().enumerate() {
            let lam = model.eigenvalues()[k];
            let want = kt / (2.0 * lam);
            let z = m2.z_score(want);
            cx.result(
                format!("linear_mode_{}", k + 1),
                json!({
                    "variance": estimate(*m2),
                    "continuum": exact(want),
                    "discrete": exact(langevin::euler_maruyama_ou_variance(lam, kt, p.f("dt"))),
                    "z": num(z),
                }),
            );
            cx.verdict(format!("linear_variance_mode_{}", k + 1), z.abs() < z_max, format!("z = {z:.3} against kT/(2λ) = {want}"));
        }
    }
    if p.b("write_trajectory") {
        let len = st.samples.first().map_or(0, Vec::len);
        let mut bytes = Vec::with_capacity(8 * len * modes);
        for x in st.samples.iter().flatten() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        let sidecar = json!({
            "file": "trajectory.f64",
            "dtype": "float64",
            "byte_order": "little",
            "layout": "mode_major",
            "modes": modes,
            "samples_per_mode": len,
            "dt": cfg.dt,
            "thin": cfg.thin,
            "burn_in": cfg.burn_in,
            "temperature": kt,
        });
        cx.blob("trajectory.f64", bytes);
        cx.blob("trajectory.json", (serde_json::to_string_pretty(&sidecar).unwrap() + "\n").into_bytes());
    }
    cx.table(hist);
    Ok(())
}

// ---------------------------------------------------------------- ergodic

const POTENTIALS: &[&str] = &["zero", "quadratic", "quartic"];

fn site_potential(p: &Params) -> SitePotential {
    match p.s("potential") {
        "zero" => SitePotential::zero(),
        "quadratic" => SitePotential::quadratic(p.f("coupling")),
        _ => SitePotential::quartic(p.f("coupling")),
    }
}

/// Exact `⟨x(0)²⟩` in the continuum where it is known.
fn continuum_mid_variance(p: &Params) -> Option<f64> {
    let (kt, l) = (p.f("temperature"), p.f("half_length"));
    match p.s("potential") {
        "zero" => Some(kt * l / 2.0),
        "quadratic" if p.f("coupling") == 0.0 => Some(kt * l / 2.0),
        "quadratic" => spectral::dirichlet_green_volume_limit(p.f("coupling").sqrt(), l, 0.0, 0.0).ok().map(|g| kt * g),
        _ => None,
    }
}

static ERGODIC: [ParamSpec; 16] = [
    p("sites", Kind::Int(Bound::Range(2.0, 1e6)), D::Int(256), "bonds N (even)"),
    p("half_length", float(POS), D::Float(1.0), "string on [-L, L]"),
    p("temperature", float(POS), D::Float(1.0), "kT"),
    p("potential", Kind::Choice(POTENTIALS), D::Text("zero"), "site potential V"),
    p("coupling", float(NONNEG), D::Float(1.0), "c in V = c x² or c x⁴"),
    p("dynamics", Kind::Choice(&["langevin", "microcanonical"]), D::Text("langevin"), "time-average ensemble"),
    p("friction", float(POS), D::Float(1.0), "thermostat friction γ"),
    p("dt_fraction", Kind::Float(Bound::Range(1e-6, 0.49)), D::Float(0.45), "time step as a fraction of the spacing"),
    p("steps", Kind::Int(Bound::Range(20.0, 1e10)), D::Int(6_000_000), "integration steps"),
    p("record_every", int(POS), D::Int(10), "record the observable every k steps"),
    p("gibbs_draws", Kind::Int(Bound::Range(100.0, 1e9)), D::Int(100_000), "lattice Gibbs draws per chain"),
    p("sampler", Kind::Choice(&["auto", "mala"]), D::Text("auto"), "exact Gaussian draws when possible, or MALA"),
    p("bridge", Kind::Bool, D::Bool(true), "also compute the reweighted bridge expectation"),
    p("bridge_draws", Kind::Int(Bound::Range(100.0, 1e9)), D::Int(100_000), "bridge paths"),
    p("rel_tol", float(POS), D::Float(0.03), "allowed relative spread for V ≡ 0"),
    p("z_max", float(POS), D::Float(3.0), "allowed |z| between estimates"),
];

fn ergodic_exp(p: &Params, seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let n = p.u("sites");
    if n % 2 == 1 {
        return Err(fail(format!("parameter `sites` must be even for the midpoint observable, got {n}")));
    }
    let (l, kt) = (p.f("half_length"), p.f("temperature"));
    let pot = site_potential(p);
    let template = LatticeString::new(n, l, pot.clone())?;
    let dt = p.f("dt_fraction") * template.spacing();
    let steps = p.u("steps");
    let cfg = ergodic::ThermostatConfig::new(p.f("friction"), kt, dt, steps, seed)?.with_record_every(p.u("record_every"));
    let mut gcfg = ergodic::GibbsSamplerConfig::new(p.u("gibbs_draws"), seed.wrapping_add(1));
    if p.s("sampler") == "mala" {
        gcfg = gcfg.mala();
    }
    let bcfg = ergodic::BridgeConfig::new(p.u("bridge_draws"), n, 1, seed.wrapping_add(2))?;
    let obs = [Observable::MidSquare];

    let run = if p.s("dynamics") == "langevin" {
        ergodic::thermostat_simulate(&template, &cfg, &obs)?
    } else {
        let warm = ergodic::ThermostatConfig::new(p.f("friction"), kt, dt, (steps / 10).max(2), seed)?.with_burn_in(1);
        let start = ergodic::thermostat_simulate(&template, &warm, &[])?.final_state;
        let micro = cfg.with_burn_in(0).microcanonical();
        let run = ergodic::thermostat_simulate(&start, &micro, &obs)?;
        cx.result("max_relative_energy_drift", exact(run.max_relative_energy_drift));
        run
    };
    let time = run.observables[0].time_average;
    let gibbs = ergodic::gibbs_average(&template, kt, &obs, &gcfg)?;
    let gibbs_est = gibbs.estimates[0];
    let bridge = if p.b("bridge") {
        Some(ergodic::bridge_expectation(l, kt, &pot, &Observable::MidSquare, &bcfg)?.levels[0].estimate)
    } else {
        None
    };

    cx.result("time_average", estimate(time));
    cx.result("kinetic_per_site", estimate(run.kinetic_per_site));
    cx.result("gibbs_average", estimate(gibbs_est));
    cx.result("gibbs_exact_sampling", json!(gibbs.exact_sampling));
    if let Some(r) = &gibbs.r_hat {
        cx.result("gibbs_r_hat", json!(r.iter().map(|v| num(*v)).collect::<Vec<_>>()));
    }
    if let Some(b) = bridge {
        cx.result("bridge_expectation", estimate(b));
    }
    if pot.quadratic_coefficient().is_some() {
        cx.result("lattice_exact", exact(ergodic::lattice_gaussian_covariance(&template, kt, n / 2, n / 2)?));
    }
    if let Some(c) = continuum_mid_variance(p) {
        cx.result("continuum_exact", exact(c));
    }

    let mut summary = Table::new("ergodic", &["method", "estimate", "std_error"]);
    summary.push(vec!["time_average".into(), time.value.into(), time.std_error.into()]);
    summary.push(vec!["gibbs_average".into(), gibbs_est.value.into(), gibbs_est.std_error.into()]);
    if let Some(b) = bridge {
        summary.push(vec!["bridge_expectation".into(), b.value.into(), b.std_error.into()]);
    }

    let z_max = p.f("z_max");
    if pot.is_zero() {
        let exact_value = kt * l / 2.0;
        let tol = p.f("rel_tol");
        let mut named = vec![("time", time.value), ("gibbs", gibbs_est.value)];
        if let Some(b) = bridge {
            named.push(("bridge", b.value));
        }
        for (i, (a, va)) in named.iter().enumerate() {
            let d = rel(*va, exact_value);
            cx.verdict(format!("{a}_vs_exact"), d <= tol, format!("{va:.5} vs kT·L/2 = {exact_value} ({:.2}%)", 100.0 * d));
            for (b, vb) in &named[i + 1..] {
                let d = rel(*va, *vb);
                cx.verdict(format!("{a}_vs_{b}"), d <= tol, format!("{va:.5} vs {vb:.5} ({:.2}%)", 100.0 * d));
            }
        }
    } else {
        let z = time.z_between(&gibbs_est);
        cx.verdict("time_vs_gibbs", z.abs() < z_max, format!("z = {z:.3}"));
        if let Some(b) = bridge {
            let z = b.z_between(&gibbs_est);
            cx.verdict("bridge_vs_gibbs", z.abs() < z_max, format!("z = {z:.3}"));
        }
    }

    let series = &run.observables[0].series;
    let stride = (series.len() / 1000).max(1);
    let mut running = Table::new("ergodic_running", &["record", "running_time_average"]);
    let mut acc = 0.0;
    for (i, v) in series.iter().enumerate() {
        acc += v;
        if (i + 1) % stride == 0 || i + 1 == series.len() {
            running.push(vec![(i + 1).into(), (acc / (i + 1) as f64).into()]);
        }
    }
    cx.table(summary);
    cx.table(running);
    Ok(())
}

// ---------------------------------------------------------------- bridge

static BRIDGE: [ParamSpec; 11] = [
    p("half_length", float(POS), D::Float(1.0), "interval [-L, L]"),
    p("temperature", float(POS), D::Float(1.0), "kT (bridge diffusion)"),
    p("potential", Kind::Choice(POTENTIALS), D::Text("zero"), "site potential V"),
    p("coupling", float(NONNEG), D::Float(1.0), "c in V = c x² or c x⁴"),
    p("observable", Kind::Choice(&["mid_square", "cos_mid", "one", "squared_norm"]), D::Text("mid_square"), "F"),
    p("t", float(Bound::Any), D::Float(1.0), "frequency for cos_mid"),
    p("draws", Kind::Int(Bound::Range(2.0, 1e9)), D::Int(100_000), "bridge paths per level"),
    p("resolution", Kind::Int(Bound::Range(2.0, 1e6)), D::Int(64), "bonds at the coarsest level (even)"),
    p("levels", Kind::Int(Bound::Range(1.0, 12.0)), D::Int(2), "resolution doublings"),
    p("z_max", float(POS), D::Float(4.0), "allowed |z| against a known value"),
    p("ratio_check", Kind::Bool, D::Bool(true), "compare the mean weight with the lattice partition ratio for V = c x²"),
];

fn bridge_exp(p: &Params, seed: u64, cx: &mut Ctx) -> Result<(), RunError> {
    let (l, kt) = (p.f("half_length"), p.f("temperature"));
    let pot = site_potential(p);
    let obs = match p.s("observable") {
        "mid_square" => Observable::MidSquare,
        "cos_mid" => Observable::CosMid(p.f("t")),
        "one" => Observable::One,
        _ => Observable::SquaredNorm,
    };
    let cfg = ergodic::BridgeConfig::new(p.u("draws"), p.u("resolution"), p.u("levels"), seed)?;
    let b = ergodic::bridge_expectation(l, kt, &pot, &obs, &cfg)?;
    let mut table = Table::new("bridge", &["bonds", "estimate", "std_error", "mean_weight", "mean_weight_std_error", "effective_sample_size"]);
    for lvl in &b.levels {
        table.push(vec![
            lvl.bonds.into(),
            lvl.estimate.value.into(),
            lvl.estimate.std_error.into(),
            lvl.mean_weight.value.into(),
            lvl.mean_weight.std_error.into(),
            lvl.effective_sample_size.into(),
        ]);
    }
    cx.result("extrapolated", estimate(b.extrapolated));
    cx.result("finest", estimate(b.levels.last().expect("one level").estimate));

    let t = p.f("t");
    let reference = match (p.s("potential"), p.s("observable")) {
        (_, "one") => Some(1.0),
        ("zero", "mid_square") => Some(kt * l / 2.0),
        ("zero", "cos_mid") => Some((-t * t * kt * l / 4.0).exp()),
        ("zero", "squared_norm") => Some(2.0 * kt * l * l / 3.0),
        ("quadratic", "mid_square") => continuum_mid_variance(p),
        _ => None,
    };
    let z_max = p.f("z_max");
    if let Some(want) = reference {
        cx.result("reference", exact(want));
        let z = b.extrapolated.z_score(want);
        let pass = if b.extrapolated.std_error == 0.0 { (b.extrapolated.value - want).abs() <= 1e-12 } else { z.abs() < z_max };
        cx.verdict("extrapolated_vs_reference", pass, format!("{:.6} ± {:.2e} vs {want:.6}", b.extrapolated.value, b.extrapolated.std_error));
    }
    if let (Some(c), true) = (pot.quadratic_coefficient().filter(|c| *c > 0.0), p.b("ratio_check")) {
        for lvl in &b.levels {
            let ratio = ergodic::lattice_partition_ratio(lvl.bonds, l, kt, c)?;
            let z = lvl.mean_weight.z_score(ratio);
            cx.verdict(format!("partition_ratio_{}", lvl.bonds), z.abs() < z_max, format!("E[w] = {:.6} vs lattice {ratio:.6} (z = {z:.3})", lvl.mean_weight.value));
        }
    }
    cx.table(table);
    Ok(())
}
