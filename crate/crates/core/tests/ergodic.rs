use std::f64::consts::PI;

use fieldlab::ergodic::*;
use fieldlab::spectral::dirichlet_green_volume_limit;
use fieldlab::stats;
use proptest::prelude::*;

fn free(n: usize, l: f64) -> LatticeString {
    LatticeString::new(n, l, SitePotential::zero()).unwrap()
}

#[test]
fn gradient_energy_converges_at_second_order() {
    // x = sin(π(s + L)/2L) has ∫½x'² = π²/(8L); the lattice sum is N² sin²(π/2N)/(2L)
    let l = 1.3;
    let exact = PI * PI / (8.0 * l);
    let mut errs = Vec::new();
    for n in [64usize, 128, 256, 512] {
        let x: Vec<f64> = (1..n).map(|i| (PI * i as f64 / n as f64).sin()).collect();
        let s = free(n, l).with_state(&x, &vec![0.0; n - 1]).unwrap();
        let e = hamiltonian_energy(&s);
        let closed = (n * n) as f64 * (PI / (2 * n) as f64).sin().powi(2) / (2.0 * l);
        assert!((e - closed).abs() < 1e-12);
        errs.push((e - exact).abs());
    }
    for w in errs.windows(2) {
        assert!(((w[0] / w[1]).log2() - 2.0).abs() < 0.05, "{errs:?}");
    }
}

#[test]
fn free_string_midpoint_variance() {
    // pinned Brownian bridge on [-L, L]: Var x(0) = kT·L/2
    let g = gibbs_average(&free(64, 1.0), 1.0, &[Observable::MidSquare, Observable::One], &GibbsSamplerConfig::new(100_000, 3)).unwrap();
    assert!(g.exact_sampling);
    assert!((g.estimates[0].value / 0.5 - 1.0).abs() < 0.02);
    assert!(g.estimates[0].z_score(0.5).abs() < 3.0);
    assert_eq!(g.estimates[1], stats::Estimate::exact(1.0));
    assert!((lattice_gaussian_covariance(&free(64, 1.0), 1.0, 32, 32).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn cold_limit_collapses_to_zero() {
    let mut prev = f64::INFINITY;
    for kt in [1.0, 0.1, 0.01, 0.001] {
        let g = gibbs_average(&free(32, 1.0), kt, &[Observable::MidSquare], &GibbsSamplerConfig::new(20_000, 5)).unwrap();
        let v = g.estimates[0].value;
        assert!(v < prev);
        assert!(g.estimates[0].z_score(kt / 2.0).abs() < 4.0);
        prev = v;
    }
    assert!(prev < 1e-3);
}

#[test]
fn bridge_characteristic_function() {
    let cfg = BridgeConfig::new(100_000, 32, 2, 17).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let b = bridge_expectation(1.0, 1.0, &SitePotential::zero(), &Observable::CosMid(t), &cfg).unwrap();
        let want = (-t * t / 4.0).exp();
        assert!(b.extrapolated.z_score(want).abs() < 4.0, "t = {t}: {:?} vs {want}", b.extrapolated);
    }
}

#[test]
fn bridge_normalization_matches_lattice_determinants() {
    let cfg = BridgeConfig::new(100_000, 256, 1, 23).unwrap();
    let b = bridge_expectation(1.0, 1.0, &SitePotential::quadratic(1.0), &Observable::One, &cfg).unwrap();
    let lvl = &b.levels[0];
    assert_eq!(lvl.estimate, stats::Estimate { value: 1.0, std_error: 0.0 });
    let ratio = lattice_partition_ratio(256, 1.0, 1.0, 1.0).unwrap();
    assert!(lvl.mean_weight.z_score(ratio).abs() < 3.0, "{:?} vs {ratio}", lvl.mean_weight);
}

#[test]
fn bridge_agrees_with_exact_gibbs_for_quadratic_potential() {
    let cfg = BridgeConfig::new(100_000, 64, 2, 31).unwrap();
    let b = bridge_expectation(1.0, 1.0, &SitePotential::quadratic(1.0), &Observable::MidSquare, &cfg).unwrap();
    let exact = dirichlet_green_volume_limit(1.0, 1.0, 0.0, 0.0).unwrap();
    assert!(b.extrapolated.z_score(exact).abs() < 4.0, "{:?} vs {exact}", b.extrapolated);
}

#[test]
fn mala_matches_exact_sampler() {
    let s = LatticeString::new(32, 1.0, SitePotential::quadratic(1.0)).unwrap();
    let obs = [Observable::MidSquare, Observable::SquaredNorm];
    let exact = gibbs_average(&s, 1.0, &obs, &GibbsSamplerConfig::new(100_000, 1)).unwrap();
    let mala = gibbs_average(&s, 1.0, &obs, &GibbsSamplerConfig::new(50_000, 2).mala()).unwrap();
    assert!(!mala.exact_sampling);
    assert!(mala.r_hat.unwrap().iter().all(|r| *r < R_HAT_LIMIT));
    let acc = mala.acceptance.unwrap();
    assert!(acc > 0.3 && acc < 0.95, "acceptance {acc}");
    for (e, m) in exact.estimates.iter().zip(&mala.estimates) {
        assert!(e.z_between(m).abs() < 4.0, "{e:?} vs {m:?}");
    }
}

#[test]
fn even_potential_gives_symmetric_midpoint() {
    let s = LatticeString::new(16, 1.0, SitePotential::quartic(1.0)).unwrap();
    let g = gibbs_average(&s, 1.0, &[Observable::Mid], &GibbsSamplerConfig::new(40_000, 8).mala()).unwrap();
    assert!(g.estimates[0].z_score(0.0).abs() < 4.0, "{:?}", g.estimates[0]);
}

#[test]
fn lattice_covariance_approaches_continuum_monotonically() {
    let exact = dirichlet_green_volume_limit(1.0, 1.0, 0.0, 0.0).unwrap();
    let mut prev_err = f64::INFINITY;
    for n in [8usize, 16, 32, 64, 128, 256] {
        let s = LatticeString::new(n, 1.0, SitePotential::quadratic(1.0)).unwrap();
        let err = (lattice_gaussian_covariance(&s, 1.0, n / 2, n / 2).unwrap() - exact).abs();
        assert!(err < prev_err, "N = {n}");
        prev_err = err;
    }
    assert!(prev_err < 1e-3);
}

#[test]
fn thermostat_equipartition_and_pinning() {
    let s = free(32, 1.0);
    let cfg = ThermostatConfig::new(1.0, 1.0, 0.02, 400_000, 7).unwrap().with_record_every(4);
    let run = thermostat_simulate(&s, &cfg, &[Observable::MidSquare]).unwrap();
    assert!(run.kinetic_per_site.z_score(0.5).abs() < 3.0, "{:?}", run.kinetic_per_site);
    assert!((run.kinetic_per_site.value / 0.5 - 1.0).abs() < 0.02);
    let x = run.final_state.displacements();
    assert_eq!((x[0], x[32]), (0.0, 0.0));
    assert_eq!(run.final_state.velocities()[0], 0.0);
    assert!(run.observables[0].time_average.z_score(0.5).abs() < 4.0, "{:?}", run.observables[0].time_average);
}

#[test]
fn time_averages_match_gibbs_for_quartic_site_potential() {
    let s = LatticeString::new(16, 1.0, SitePotential::quartic(1.0)).unwrap();
    let obs = [Observable::MidSquare, Observable::SquaredNorm];
    let cfg = ThermostatConfig::new(1.0, 1.0, 0.02, 1_000_000, 11).unwrap().with_record_every(5);
    let run = thermostat_simulate(&s, &cfg, &obs).unwrap();
    let g = gibbs_average(&s, 1.0, &obs, &GibbsSamplerConfig::new(50_000, 12).mala()).unwrap();
    for (series, e) in run.observables.iter().zip(&g.estimates) {
        let z = series.time_average.z_between(e);
        assert!(z.abs() < 4.0, "{}: {:?} vs {e:?}", series.name, series.time_average);
    }
}

#[test]
fn microcanonical_drift_is_second_order() {
    let x: Vec<f64> = (1..32).map(|i| 0.3 * (PI * i as f64 / 32.0).sin()).collect();
    let p: Vec<f64> = (1..32).map(|i| (3.0 * PI * i as f64 / 32.0).sin()).collect();
    let s = LatticeString::new(32, 1.0, SitePotential::quartic(0.5)).unwrap().with_state(&x, &p).unwrap();
    let drift = |dt: f64| {
        let steps = (2.0 / dt) as usize;
        let cfg = ThermostatConfig::new(1.0, 1.0, dt, steps, 0).unwrap().with_burn_in(0).microcanonical();
        thermostat_simulate(&s, &cfg, &[]).unwrap().max_relative_energy_drift
    };
    let (d1, d2) = (drift(0.01), drift(0.005));
    assert!(d1 < 1e-2);
    assert!((d1 / d2).log2() > 1.8, "{d1} {d2}");
}

#[test]
fn unstable_step_is_rejected() {
    let cfg = ThermostatConfig::new(1.0, 1.0, 0.05, 100, 0).unwrap();
    assert!(thermostat_simulate(&free(64, 1.0), &cfg, &[]).is_err());
    assert!(gibbs_average(&free(15, 1.0), 1.0, &[Observable::Mid], &GibbsSamplerConfig::new(10, 0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_covariance_is_symmetric_and_positive(n in 4usize..64, l in 0.2f64..3.0, c in 0.0f64..4.0) {
        let s = LatticeString::new(n, l, SitePotential::quadratic(c)).unwrap();
        for i in 1..n {
            let j = n - i;
            let a = lattice_gaussian_covariance(&s, 1.0, i, j).unwrap();
            let b = lattice_gaussian_covariance(&s, 1.0, j, i).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            prop_assert!(a > 0.0);
        }
        let r = lattice_partition_ratio(n, l, 1.0, c).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0);
    }
}
