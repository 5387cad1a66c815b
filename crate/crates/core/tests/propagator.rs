use fieldlab::propagator::*;
use proptest::prelude::*;

fn source(points: usize, horizon: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..points).map(|i| f(horizon * i as f64 / (points - 1) as f64)).collect()
}

fn hyper(lam: f64, t: f64, a: f64, b: f64, j: Vec<f64>) -> ModeChannel {
    ModeChannel::new(lam, t, a, b, j, Variant::Hyperbolic).unwrap()
}

#[test]
fn free_kernel_matches_lattice() {
    let ch = hyper(1.0, 1.0, 0.0, 0.0, Vec::new());
    let k = mode_propagator_closed_form(&ch).unwrap();
    let lat = lattice_propagator_oracle(&ch, 512).unwrap();
    assert!((k.value() - 0.922452236291572).abs() < 1e-12);
    assert!((lat.log_value - k.log_magnitude).abs() < 1e-3);
    assert!(!lat.resolution_warning);
}

#[test]
fn single_interior_point_oracle() {
    // Δt = 1/2: A = 4.5, b = 0.2, k = 0.13·(1 + 1/8), normalized by det_free = 2/Δt
    let ch = hyper(1.0, 1.0, 0.3, -0.2, Vec::new());
    let lat = lattice_propagator_oracle(&ch, 2).unwrap();
    assert!((lat.log_value - (-0.20069707338374726)).abs() < 1e-13);
}

#[test]
fn lattice_converges_at_second_order() {
    let ch = hyper(1.0, 1.0, 0.3, -0.2, Vec::new());
    let exact = mode_propagator_closed_form(&ch).unwrap().log_magnitude;
    assert!((exact - (-0.21712206203741363)).abs() < 1e-12);
    let errs: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&m| (lattice_propagator_oracle(&ch, m).unwrap().log_value - exact).abs())
        .collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 2.0).abs() < 0.1, "{errs:?}");
    }
}

#[test]
fn boundary_ratio_cancels_normalization() {
    let a = hyper(0.8, 1.3, 1.0, 1.0, Vec::new());
    let b = hyper(0.8, 1.3, 0.0, 0.0, Vec::new());
    let closed = mode_propagator_closed_form(&a).unwrap().log_magnitude - mode_propagator_closed_form(&b).unwrap().log_magnitude;
    let lat = lattice_propagator_oracle(&a, 512).unwrap().log_value - lattice_propagator_oracle(&b, 512).unwrap().log_value;
    assert!((closed - lat).abs() < 1e-3);
}

#[test]
fn small_horizon_limit() {
    let t = 1e-3;
    for v in [Variant::Trigonometric, Variant::Hyperbolic] {
        let ch = ModeChannel::new(1.0, t, 0.0, 0.0, Vec::new(), v).unwrap();
        let k = mode_propagator_closed_form(&ch).unwrap().value();
        assert!((k / (1.0 / t).sqrt() - 1.0).abs() < 1e-4);
    }
}

#[test]
fn classical_path_with_constant_source() {
    let (c, lam, t) = (1.0, 1.0, 1.0);
    let traj = classical_field_bvp(lam, t, &[c, c], 0.0, 0.0, 256).unwrap();
    for (time, v) in traj.times.iter().zip(&traj.values) {
        let want = c / (lam * lam) * (1.0 - (lam * (time - t / 2.0)).cosh() / (lam * t / 2.0).cosh());
        assert!((v - want).abs() < 1e-4);
    }
    assert!(traj.residual < 1e-6);
    let zero = classical_field_bvp(lam, t, &[], 0.0, 0.0, 64).unwrap();
    assert!(zero.values.iter().all(|v| *v == 0.0));
}

#[test]
fn classical_fluctuation_factorization() {
    let t = 1.4;
    let j = source(257, t, |s| (3.0 * s).sin() + 0.5);
    let full = hyper(1.2, t, 0.4, -0.7, j.clone());
    let bare = hyper(1.2, t, 0.0, 0.0, Vec::new());
    let m = 512;
    let cl = classical_field_bvp(1.2, t, &j, 0.4, -0.7, m + 1).unwrap();
    let lhs = lattice_propagator_oracle(&full, m).unwrap().log_value;
    let rhs = lattice_propagator_oracle(&bare, m).unwrap().log_value - cl.action;
    assert!((lhs - rhs).abs() < 1e-10);
    // same identity for the closed form at continuum resolution
    let closed = mode_propagator_closed_form(&full).unwrap().log_magnitude;
    let closed_bare = mode_propagator_closed_form(&bare).unwrap().log_magnitude;
    assert!((closed - (closed_bare - cl.action)).abs() < 1e-3);
}

#[test]
fn schrodinger_residual_second_order() {
    let r1 = schrodinger_residual(1.0, 1.0, 0.3, 0.5, 1e-2).unwrap();
    let r2 = schrodinger_residual(1.0, 1.0, 0.3, 0.5, 5e-3).unwrap();
    assert!((r1 / r2).log2() > 1.8, "{r1} {r2}");
}

#[test]
fn short_time_delta_limit() {
    for t in [1e-2, 1e-3] {
        let w2 = kernel_width_squared(1.0, t, 0.4).unwrap();
        assert!((w2 / t - 1.0).abs() < 1e-3, "T = {t}: {w2}");
    }
    let peak = |t: f64, b: f64| mode_propagator_closed_form(&hyper(1.0, t, 0.2, b, Vec::new())).unwrap().value();
    assert!(peak(1e-3, 0.2) > peak(1e-2, 0.2));
    assert!(peak(1e-3, 0.5) < 1e-10);
}

#[test]
fn trigonometric_fails_positivity_past_pi() {
    let ch = ModeChannel::new(1.0, 4.0, 0.0, 0.0, Vec::new(), Variant::Trigonometric).unwrap();
    assert!(mode_propagator_closed_form(&ch).is_err());
}

#[test]
fn multimode_log_sum() {
    let chans: Vec<ModeChannel> = (1..=3).map(|k| hyper(k as f64, 1.0, 0.1, 0.2, Vec::new())).collect();
    let total = multimode_kernel(&chans).unwrap();
    let sum: f64 = chans.iter().map(|c| mode_propagator_closed_form(c).unwrap().log_magnitude).sum();
    assert!((total.log_magnitude - sum).abs() < 1e-12);
    assert_eq!(total.converged, None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn time_reversal_symmetry(lam in 0.2f64..3.0, t in 0.2f64..2.0, a in -1.0f64..1.0, b in -1.0f64..1.0, w in 0.5f64..4.0) {
        let ch = hyper(lam, t, a, b, source(129, t, |s| (w * s).cos() + 0.3 * s));
        let k1 = mode_propagator_closed_form(&ch).unwrap();
        let k2 = mode_propagator_closed_form(&ch.time_reversed()).unwrap();
        prop_assert!((k1.log_magnitude - k2.log_magnitude).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_lattice(lam in 0.3f64..2.0, t in 0.3f64..2.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let ch = hyper(lam, t, a, b, source(65, t, |s| 1.0 - s));
        let k = mode_propagator_closed_form(&ch).unwrap();
        let lat = lattice_propagator_oracle(&ch, 512).unwrap();
        prop_assert!((k.log_magnitude - lat.log_value).abs() < 1e-3);
    }
}
