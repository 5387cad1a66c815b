use std::sync::Arc;

use fieldlab::measure::*;
use fieldlab::spectral::build_interval_dirichlet;
use fieldlab::stats;
use proptest::prelude::*;

fn interval(l: f64, k: usize) -> Arc<fieldlab::spectral::SpectralModel> {
    Arc::new(build_interval_dirichlet(l, k).unwrap())
}

#[test]
fn empty_expansion_is_zero() {
    let spec = MeasureSpec::new(interval(1.0, 4), VarianceLaw::PowerLaw { power: 1.0, mass_sq: 1.0 }, 0).unwrap();
    let s = sample_kl(&spec, 5, 3).unwrap();
    assert!(s.iter().all(|f| f.eval1(0.3) == 0.0 && f.eval1(-0.9) == 0.0));
    assert_eq!(characteristic_functional(&spec, &[]).unwrap(), 1.0);
}

#[test]
fn power_law_coefficient_variances() {
    let spec = MeasureSpec::new(interval(1.0, 5), VarianceLaw::PowerLaw { power: 1.0, mass_sq: 1.0 }, 5).unwrap();
    let samples = sample_kl(&spec, 11, 10_000).unwrap();
    for k in 0..5 {
        let sq: Vec<f64> = samples.iter().map(|s| s.coefficients()[k].powi(2)).collect();
        let est = stats::iid_estimate(&sq);
        let want = 1.0 / (spec.model().eigenvalues()[k] + 1.0);
        assert!(est.z_score(want).abs() < 3.0, "mode {k}: {est:?} vs {want}");
    }
}

#[test]
fn exponential_variance_ratio() {
    let m = interval(1.0, 2);
    let spec = MeasureSpec::new(Arc::clone(&m), VarianceLaw::Exponential { rate: 1.0 }, 2).unwrap();
    let samples = sample_kl(&spec, 2, 100_000).unwrap();
    let var = |k: usize| stats::variance(&samples.iter().map(|s| s.coefficients()[k]).collect::<Vec<_>>());
    let lam = m.eigenvalues();
    let want = (lam[1] - lam[0]).exp();
    assert!(((var(0) / var(1)) / want - 1.0).abs() < 0.05);
}

#[test]
fn characteristic_functional_normalization_and_single_mode() {
    let spec = MeasureSpec::new(interval(2.0, 6), VarianceLaw::PowerLaw { power: 1.5, mass_sq: 0.3 }, 6).unwrap();
    assert_eq!(characteristic_functional(&spec, &[0.0; 6]).unwrap(), 1.0);
    let mut j = vec![0.0; 6];
    j[3] = 1.7;
    let v = spec.variances()[3];
    assert!((characteristic_functional(&spec, &j).unwrap() - (-1.7f64 * 1.7 * v / 2.0).exp()).abs() < 1e-15);
    assert!(characteristic_functional(&spec, &[1.0; 7]).is_err());
}

#[test]
fn empirical_characteristic_matches() {
    let spec = MeasureSpec::new(interval(1.0, 8), VarianceLaw::PowerLaw { power: 1.0, mass_sq: 1.0 }, 8).unwrap();
    let samples = sample_kl(&spec, 77, 100_000).unwrap();
    let j = [0.0, 2.0, 0.0, -3.0, 0.0, 0.0, 5.0, 0.0];
    let est = empirical_characteristic(&samples, &j);
    let exact = characteristic_functional(&spec, &j).unwrap();
    assert!(est.z_score(exact).abs() < 3.0, "{est:?} vs {exact}");
}

#[test]
fn canonical_support_labels() {
    for n in [1_000usize, 10_000] {
        let inv_sq: Vec<f64> = (1..=n).map(|k| 1.0 / (k * k) as f64).collect();
        let flat = vec![0.8; n];
        let cubic: Vec<f64> = (1..=n).map(|k| (k as f64).powi(3)).collect();
        let l = support_diagnostic(&inv_sq, |_| 1.0).unwrap();
        assert_eq!(l.tag, SupportTag::HilbertL2, "N = {n}");
        assert!((l.evidence.partial_sum - std::f64::consts::PI.powi(2) / 6.0).abs() < 1.5 / n as f64);
        assert_eq!(support_diagnostic(&flat, |k| k as f64).unwrap().tag, SupportTag::TemperedDistribution);
        let c = support_diagnostic(&cubic, |k| (k as f64).powi(4)).unwrap();
        assert_eq!(c.tag, SupportTag::WeightedSequence { p: 4 });
        assert!((c.evidence.growth_exponent - 4.0).abs() < 0.1);
    }
}

#[test]
fn kakutani_constant_strengths() {
    let ones = vec![1.0; 64];
    let twos = vec![2.0; 64];
    let r = kakutani_affinity(&ones, &twos, 64).unwrap();
    let direct: f64 = (0..64).map(|_| (2.0 * 2f64.sqrt() / 3.0).sqrt()).product();
    assert!((r.affinity - direct).abs() < 1e-10);
    assert!((r.affinity.powf(1.0 / 64.0) - 0.9709835434146469).abs() < 1e-12);
    assert_eq!(r.verdict, KakutaniVerdict::Singular);
    let same = kakutani_affinity(&twos, &twos, 64).unwrap();
    assert_eq!(same.affinity, 1.0);
    assert_eq!(same.verdict, KakutaniVerdict::Equivalent);
}

#[test]
fn kakutani_finitely_many_differences() {
    let a = vec![1.0; 200];
    let mut b = a.clone();
    b[3] = 4.0;
    b[10] = 0.5;
    assert_eq!(kakutani_affinity(&a, &b, 200).unwrap().verdict, KakutaniVerdict::Equivalent);
}

#[test]
fn appendix_sequences() {
    let sigma_exp = 1.5;
    let sigma = Sequence::power(1.0, -sigma_exp);
    let alpha = Sequence::power(1.0, sigma_exp - 1.0);
    let r = support_set_analysis(&sigma, &alpha, 1e-3, 100_000).unwrap();
    assert!(r.mass >= 0.99 && r.mass <= 1.0);
    assert!((r.weighted_trace - std::f64::consts::PI.powi(2) / 6.0).abs() < 2e-5);
    // x̄_k = k^{-(σ-1) - 1/2}; β_k = k^{σ-1}·k^{-1/2} makes Σβ²x̄² = Σk^{-2}
    let point = Sequence::power(1.0, -(sigma_exp - 1.0) - 0.5);
    let beta = Sequence::power(1.0, sigma_exp - 1.0 - 0.5);
    let rb = support_set_analysis(&sigma, &beta, 1e-3, 1000).unwrap();
    assert_eq!(rb.contains(&point), Membership::Member);
    assert_eq!(r.contains(&point), Membership::NonMember);
}

#[test]
fn holder_trend_for_white_noise() {
    let mut prev = f64::INFINITY;
    for n in [64usize, 256, 1024] {
        let spec = MeasureSpec::new(interval(1.0, n), VarianceLaw::White { strength: 1.0 }, n).unwrap();
        let HolderOutcome::Estimated(e) = holder_exponent_estimate(&spec, 100, 3).unwrap() else {
            panic!("white spec should give an estimate");
        };
        assert!(e.exponent < prev, "N = {n}: {} not below {prev}", e.exponent);
        prev = e.exponent;
    }
    assert!(prev < 0.2);
}

#[test]
fn interaction_bounds_and_partition() {
    let model = interval(1.0, 8);
    let spec = MeasureSpec::new(Arc::clone(&model), VarianceLaw::PowerLaw { power: 1.0, mass_sq: 1.0 }, 8).unwrap();
    let zero = |_: f64| 0.0;
    let sq = |x: f64| x * x;
    for s in sample_kl(&spec, 4, 20).unwrap() {
        assert_eq!(interaction_weight(&s, &Interaction { f: &zero, lower_bound: 0.0 }, 2.0, 101).unwrap(), 1.0);
        let w = interaction_weight(&s, &Interaction { f: &sq, lower_bound: 0.0 }, 0.7, 101).unwrap();
        assert!(w > 0.0 && w <= 1.0);
    }
    let quartic = |x: f64| x.powi(4) - 0.5;
    let inter = Interaction { f: &quartic, lower_bound: 0.5 };
    let a = partition_estimate(&spec, &inter, 1.0, 201, 10_000, 1).unwrap();
    let b = partition_estimate(&spec, &inter, 1.0, 201, 10_000, 2).unwrap();
    let bound = (1.0f64 * 0.5 * 2.0).exp();
    assert!(a.value > 0.0 && a.value <= bound);
    assert!(a.z_between(&b).abs() < 3.0);
}

proptest! {
    #[test]
    fn kakutani_symmetric(a in prop::collection::vec(0.1f64..5.0, 40), b in prop::collection::vec(0.1f64..5.0, 40)) {
        let ab = kakutani_affinity(&a, &b, 40).unwrap();
        let ba = kakutani_affinity(&b, &a, 40).unwrap();
        prop_assert_eq!(ab.verdict, ba.verdict);
        prop_assert!((ab.affinity - ba.affinity).abs() <= 1e-14);
        prop_assert!(ab.affinity <= 1.0);
        prop_assert_eq!(kakutani_affinity(&a, &a, 40).unwrap().affinity, 1.0);
    }

    #[test]
    fn support_mass_monotone(e1 in 1e-5f64..1e-1, scale in 1.0f64..10.0, n in 10usize..400) {
        let sigma = Sequence::power(1.0, -1.5);
        let alpha = Sequence::power(1.0, 0.5);
        let e2 = e1 * scale;
        let m1 = support_set_analysis(&sigma, &alpha, e1, n).unwrap().mass;
        let m2 = support_set_analysis(&sigma, &alpha, e2, n).unwrap().mass;
        let m3 = support_set_analysis(&sigma, &alpha, e1, n + 50).unwrap().mass;
        prop_assert!(m2 <= m1 && m3 <= m1 && m1 <= 1.0);
    }

    #[test]
    fn characteristic_functional_bounded(j in prop::collection::vec(-3.0f64..3.0, 6)) {
        let spec = MeasureSpec::new(interval(1.0, 6), VarianceLaw::White { strength: 0.5 }, 6).unwrap();
        let z = characteristic_functional(&spec, &j).unwrap();
        prop_assert!(z > 0.0 && z <= 1.0);
    }
}
