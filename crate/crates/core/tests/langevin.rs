use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use fieldlab::langevin::*;
use fieldlab::spectral::build_interval_dirichlet;
use fieldlab::stats;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn system(modes: usize, nl: Nonlinearity, grid: usize) -> GalerkinSystem {
    let model = Arc::new(build_interval_dirichlet(FRAC_PI_2, modes.max(4)).unwrap());
    GalerkinSystem::new(model, modes, nl, grid).unwrap()
}

#[test]
fn cubic_projection_matches_refined_quadrature() {
    // adaptive quadrature in scipy of ∫(Σa_jφ_j)³φ_i on [-π/2, π/2]
    let sys = system(2, Nonlinearity::monomial(1.0, 3), 513);
    let p = project_nonlinearity(&sys, &[0.7, -0.4]).unwrap();
    assert!((p[0] - 0.27072255819931396).abs() < 1e-6);
    assert!((p[1] - -0.21772396214971287).abs() < 1e-6);
}

#[test]
fn overflow_is_reported() {
    let sys = system(1, Nonlinearity::custom(|u| (u * 1e3).exp(), |u| (u * 1e3).exp() / 1e3, 1.0).unwrap(), 65);
    assert!(project_nonlinearity(&sys, &[5.0]).is_err());
}

#[test]
fn ou_variance_single_mode() {
    let sys = system(1, Nonlinearity::zero(), 65);
    let cfg = LangevinConfig::new(0.005, 1.0, 1_000_000, 10_000, 1).unwrap();
    let st = simulate(&sys, &cfg, &[0.0]).unwrap();
    let m2 = st.second_moments[0];
    assert!(m2.z_score(0.5).abs() < 3.0, "{m2:?}");
    assert!(m2.z_score(euler_maruyama_ou_variance(1.0, 1.0, 0.005)).abs() < 3.0);
    let report = equilibrium_test(&st, &sys, 1.0).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
}

#[test]
fn two_free_modes_are_uncorrelated() {
    let sys = system(2, Nonlinearity::zero(), 65);
    let cfg = LangevinConfig::new(0.01, 1.0, 400_000, 5_000, 2).unwrap();
    let st = simulate(&sys, &cfg, &[0.0, 0.0]).unwrap();
    let prod: Vec<f64> = st.samples[0].iter().zip(&st.samples[1]).map(|(a, b)| a * b).collect();
    let cross = stats::batch_means(&prod, 50).unwrap();
    assert!(cross.z_score(0.0).abs() < 3.0, "{cross:?}");
    assert!(st.second_moments[1].z_score(euler_maruyama_ou_variance(4.0, 1.0, 0.01)).abs() < 3.0);
}

#[test]
fn stationary_bias_is_first_order_in_dt() {
    // stiff mode so the O(dt) bias dominates the Monte Carlo error
    let lam = 20.0;
    let model = Arc::new(build_interval_dirichlet(FRAC_PI_2, 5).unwrap());
    let gen = anomalous_generator(&model, 1, 1.0, &[], lam - 1.0).unwrap();
    let sys = GalerkinSystem::new(model, 1, Nonlinearity::zero(), 65).unwrap().with_generator(&gen).unwrap();
    let exact = 1.0 / (2.0 * lam);
    let mut biases = Vec::new();
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let cfg = LangevinConfig::new(dt, 1.0, 1_000_000, 1_000, 9).unwrap();
        let st = simulate(&sys, &cfg, &[0.0]).unwrap();
        let m2 = st.second_moments[0];
        assert!(m2.z_score(euler_maruyama_ou_variance(lam, 1.0, dt)).abs() < 3.0, "dt {dt}: {m2:?}");
        biases.push(m2.value - exact);
    }
    let fit = stats::linear_fit(&[1e-2f64.ln(), 5e-3f64.ln(), 2.5e-3f64.ln()], &biases.iter().map(|b| b.ln()).collect::<Vec<_>>()).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.2, "slope {} from {biases:?}", fit.slope);
}

#[test]
fn mismatched_temperature_fails() {
    let sys = system(1, Nonlinearity::zero(), 65);
    let cfg = LangevinConfig::new(0.01, 1.0, 200_000, 2_000, 4).unwrap();
    let st = simulate(&sys, &cfg, &[0.0]).unwrap();
    let report = equilibrium_test(&st, &sys, 2.0).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    let m = &report.modes[0];
    assert!((m.reference_second_moment / m.empirical_second_moment.value - 2.0).abs() < 0.1);
}

#[test]
fn quartic_mode_reaches_gibbs_law() {
    let sys = system(1, Nonlinearity::monomial(1.0, 3), 129);
    let cfg = LangevinConfig::new(0.01, 1.0, 1_000_000, 10_000, 5).unwrap();
    let st = simulate(&sys, &cfg, &[0.0]).unwrap();
    let report = equilibrium_test(&st, &sys, 1.0).unwrap();
    assert!(report.modes[0].ks_distance < 0.05);
    // 1-D quadrature of exp(-(a² + 3a⁴/(8π))) in scipy
    assert!((report.modes[0].reference_second_moment - 0.3978103987363894).abs() < 1e-6);
}

#[test]
fn detailed_balance_surrogate_shrinks_with_dt() {
    let sys = system(1, Nonlinearity::monomial(1.0, 3), 129);
    let mut rel = Vec::new();
    for dt in [0.02, 0.01] {
        let cfg = LangevinConfig::new(dt, 1.0, 20_000, 1_000, 6).unwrap();
        let st = simulate(&sys, &cfg, &[0.0]).unwrap();
        let path: Vec<Vec<f64>> = st.samples[0].iter().map(|x| vec![*x]).collect();
        rel.push(detailed_balance_surrogate(&sys, &cfg, &path).unwrap().relative_discrepancy);
    }
    assert!(rel[0] < 0.05 && rel[1] < rel[0] * 0.7, "{rel:?}");
}

#[test]
fn gibbs_density_is_peaked_at_minimizer() {
    let sys = system(3, Nonlinearity::monomial(1.0, 3), 129);
    let top = gibbs_density(&sys, 1.0, &[0.0; 3]).unwrap();
    assert_eq!(top.density, 1.0);
    for a in [[0.1, 0.0, 0.0], [0.0, -0.3, 0.2], [1.0, 1.0, 1.0]] {
        let g = gibbs_density(&sys, 1.0, &a).unwrap();
        assert!(g.density > 0.0 && g.density < top.density);
    }
    let free = system(2, Nonlinearity::zero(), 65);
    let g = gibbs_density(&free, 0.5, &[1.0, 1.0]).unwrap();
    // variances kT/(2λ) = 1/4 and 1/16
    assert!((g.log_density - -(2.0 + 8.0)).abs() < 1e-12);
}

#[test]
fn gaussian_bump_generator() {
    let model = build_interval_dirichlet(1.0, 8).unwrap();
    let bump: Vec<f64> = (0..801).map(|i| -1.0 + 2.0 * i as f64 / 800.0).map(|x: f64| -0.8 * (-x * x / 0.1).exp()).collect();
    let g = anomalous_generator(&model, 8, 0.75, &bump, 0.3).unwrap();
    assert!((&g.matrix - g.matrix.transpose()).abs().max() < 1e-14);
    let min = SymmetricEigen::new(g.matrix.clone()).eigenvalues.min();
    assert!(min >= 0.3 - 0.8);
    assert!(g.trace_class);
}

#[test]
fn generator_drives_simulation() {
    let model = Arc::new(build_interval_dirichlet(1.0, 4).unwrap());
    let bump: Vec<f64> = (0..401).map(|i| -1.0 + i as f64 / 200.0).map(|x: f64| 0.6 * (-x * x / 0.2).exp()).collect();
    let gen = anomalous_generator(&model, 2, 0.9, &bump, 0.5).unwrap();
    let sys = GalerkinSystem::new(Arc::clone(&model), 2, Nonlinearity::zero(), 65).unwrap().with_generator(&gen).unwrap();
    let cfg = LangevinConfig::new(0.01, 1.0, 400_000, 5_000, 12).unwrap();
    let st = simulate(&sys, &cfg, &[0.0, 0.0]).unwrap();
    // stationary covariance of the discrete chain: kT/(2μ(1-μdt)) in the eigenbasis of K
    let eig = SymmetricEigen::new(gen.matrix.clone());
    let d = nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(|mu| euler_maruyama_ou_variance(mu, 1.0, 0.01)));
    let cov = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    for i in 0..2 {
        assert!((st.covariance[i][i] / cov[(i, i)] - 1.0).abs() < 0.05, "{:?} vs {cov}", st.covariance);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_energy_gradient(
        a in prop::collection::vec(-1.5f64..1.5, 2..=4),
        cubic in any::<bool>(),
    ) {
        let nl = if cubic { Nonlinearity::monomial(0.7, 2) } else { Nonlinearity::monomial(1.3, 3) };
        let sys = system(a.len(), nl, 129);
        let grad = project_nonlinearity(&sys, &a).unwrap();
        let h = 1e-4;
        for i in 0..a.len() {
            let mut up = a.clone();
            up[i] += h;
            let mut dn = a.clone();
            dn[i] -= h;
            let fd = (sys.nonlinear_energy(&up).unwrap() - sys.nonlinear_energy(&dn).unwrap()) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() < 1e-5, "mode {}: {} vs {}", i, fd, grad[i]);
        }
    }

    #[test]
    fn trajectories_are_seed_deterministic(seed in any::<u64>()) {
        let sys = system(2, Nonlinearity::monomial(1.0, 3), 65);
        let cfg = LangevinConfig::new(0.01, 0.7, 300, 10, seed).unwrap();
        let a = simulate(&sys, &cfg, &[0.2, -0.1]).unwrap();
        let b = simulate(&sys, &cfg, &[0.2, -0.1]).unwrap();
        prop_assert_eq!(a.samples, b.samples);
    }
}
