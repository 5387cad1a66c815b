//! Truncated Gaussian measures on spectral bases.
//!
//! A [`MeasureSpec`] assigns each eigenmode an independent centred Gaussian
//! coefficient whose variance is a function of the eigenvalue. Everything in
//! this module works on the first `N` modes; the infinite-dimensional
//! statements are probed through how the truncations behave as `N` grows.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::quad;
use crate::rng;
use crate::spectral::SpectralModel;
use crate::stats::{self, Estimate, LinearFit};

/// Per-mode variance as a function of the eigenvalue `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum VarianceLaw {
    /// `1 / (λ^α + m²)`
    PowerLaw { power: f64, mass_sq: f64 },
    /// `e^{-αλ}`
    Exponential { rate: f64 },
    /// constant `γ`
    White { strength: f64 },
}

impl VarianceLaw {
    pub fn variance(&self, lambda: f64) -> f64 {
        match *self {
            VarianceLaw::PowerLaw { power, mass_sq } => (lambda.powf(power) + mass_sq).recip(),
            VarianceLaw::Exponential { rate } => (-rate * lambda).exp(),
            VarianceLaw::White { strength } => strength,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    model: Arc<SpectralModel>,
    law: VarianceLaw,
    truncation: usize,
    variances: Vec<f64>,
}

impl MeasureSpec {
    /// A zero `truncation` is allowed and describes the point mass at zero.
    pub fn new(model: Arc<SpectralModel>, law: VarianceLaw, truncation: usize) -> Result<Self> {
        if truncation > model.len() {
            return invalid(format!("truncation {truncation} exceeds the {} available modes", model.len()));
        }
        let variances: Vec<f64> = model.eigenvalues()[..truncation].iter().map(|&l| law.variance(l)).collect();
        if let Some((k, v)) = variances.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return invalid(format!("variance of mode {} is {v}; must be positive and finite", k + 1));
        }
        Ok(Self { model, law, truncation, variances })
    }

    pub fn model(&self) -> &Arc<SpectralModel> {
        &self.model
    }

    pub fn law(&self) -> VarianceLaw {
        self.law
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

/// A truncated field `x ↦ Σ_k c_k e_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    model: Arc<SpectralModel>,
    coefficients: Vec<f64>,
}

impl FieldSample {
    pub fn new(model: Arc<SpectralModel>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() > model.len() {
            return invalid("more coefficients than modes");
        }
        Ok(Self { model, coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn model(&self) -> &Arc<SpectralModel> {
        &self.model
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().enumerate().map(|(k, c)| c * self.model.eval(k, x)).sum()
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x])
    }
}

/// Karhunen–Loève draws: sample `i` uses random stream `i` of `seed`.
pub fn sample_kl(spec: &MeasureSpec, seed: u64, count: usize) -> Result<Vec<FieldSample>> {
    if count == 0 {
        return invalid("sample count must be at least 1");
    }
    let sd: Vec<f64> = spec.variances.iter().map(|v| v.sqrt()).collect();
    Ok((0..count)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let coefficients = sd
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    s * z
                })
                .collect();
            FieldSample { model: Arc::clone(&spec.model), coefficients }
        })
        .collect())
}

/// `Z[j] = exp(-½ Σ_k v(λ_k) j_k²)`.
pub fn characteristic_functional(spec: &MeasureSpec, source: &[f64]) -> Result<f64> {
    if source.len() > spec.truncation {
        return invalid(format!(
            "source has {} entries but the measure has {} modes",
            source.len(),
            spec.truncation
        ));
    }
    let quad_form: f64 = source.iter().zip(&spec.variances).map(|(j, v)| v * j * j).sum();
    Ok((-0.5 * quad_form).exp())
}

/// Monte Carlo estimate of `E cos⟨j, c⟩` from KL samples.
pub fn empirical_characteristic(samples: &[FieldSample], source: &[f64]) -> Estimate {
    let values: Vec<f64> = samples
        .iter()
        .map(|s| s.coefficients.iter().zip(source).map(|(c, j)| c * j).sum::<f64>().cos())
        .collect();
    stats::iid_estimate(&values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum SupportTag {
    HilbertL2,
    WeightedSequence { p: u32 },
    TemperedDistribution,
    SmoothFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportEvidence {
    /// `S_N = Σ_{k≤N} v_k`.
    pub partial_sum: f64,
    /// log-log slope of `v_k` over the upper half of the sequence.
    pub tail_exponent: f64,
    /// log-log slope of `S_n` over the upper half, with its R².
    pub growth_exponent: f64,
    pub growth_r_squared: f64,
    /// slope of `ln(-ln v_k)` against `ln k`; ≥ 1 means exponential decay.
    pub decay_order: Option<f64>,
    /// `max_n S_n / φ(n)`, the Theorem-style growth bound statistic.
    pub max_growth_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportLabel {
    pub tag: SupportTag,
    pub evidence: SupportEvidence,
}

const MIN_FIT_R2: f64 = 0.99;

fn log_log_fit(ks: &[usize], ys: &[f64]) -> Result<LinearFit> {
    let lx: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    stats::linear_fit(&lx, &ly)
}

/// Classifies where a Gaussian measure with whitened variances `v_k` lives.
///
/// Rules, applied in order:
/// 1. exponential or faster decay of `v_k` → `SmoothFunction`;
/// 2. summable `v_k` (tail exponent below −1) → `HilbertL2`;
/// 3. partial sums growing polynomially with exponent `p > 1.1` →
///    `WeightedSequence(round p)`;
/// 4. otherwise (linear, white-noise growth, or super-polynomial growth) →
///    `TemperedDistribution`.
///
/// `growth(n)` is the caller's comparison function φ; its ratio against the
/// partial sums is reported as evidence and does not change the tag.
pub fn support_diagnostic<G: Fn(usize) -> f64>(variances: &[f64], growth: G) -> Result<SupportLabel> {
    let n = variances.len();
    if n == 0 {
        return invalid("variance sequence is empty");
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return invalid(format!("variances must be positive and finite, found {v}"));
    }
    let mut partial = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in variances {
        acc += v;
        partial.push(acc);
    }
    let max_growth_ratio = partial
        .iter()
        .enumerate()
        .map(|(i, s)| s / growth(i + 1))
        .fold(0.0, f64::max);

    if n < 8 {
        // too short for any tail analysis: only a bounded verdict is safe
        let evidence = SupportEvidence {
            partial_sum: acc,
            tail_exponent: f64::NAN,
            growth_exponent: f64::NAN,
            growth_r_squared: f64::NAN,
            decay_order: None,
            max_growth_ratio,
        };
        return Ok(SupportLabel { tag: SupportTag::TemperedDistribution, evidence });
    }

    let tail: Vec<usize> = (n / 2..=n).collect();
    let tail_v: Vec<f64> = tail.iter().map(|&k| variances[k - 1]).collect();
    let tail_fit = log_log_fit(&tail, &tail_v)?;

    let decay_order = if tail_v.iter().all(|&v| v < 1.0) {
        let y: Vec<f64> = tail_v.iter().map(|v| -v.ln()).collect();
        log_log_fit(&tail, &y).ok().map(|f| f.slope)
    } else {
        None
    };

    let upper: Vec<f64> = tail.iter().map(|&k| partial[k - 1]).collect();
    let growth_fit = log_log_fit(&tail, &upper)?;
    let lower: Vec<usize> = (n / 4..=n / 2).filter(|&k| k >= 1).collect();
    let lower_s: Vec<f64> = lower.iter().map(|&k| partial[k - 1]).collect();
    let lower_fit = log_log_fit(&lower, &lower_s)?;

    let evidence = SupportEvidence {
        partial_sum: acc,
        tail_exponent: tail_fit.slope,
        growth_exponent: growth_fit.slope,
        growth_r_squared: growth_fit.r_squared,
        decay_order,
        max_growth_ratio,
    };

    let tag = if decay_order.is_some_and(|d| d >= 0.9) {
        SupportTag::SmoothFunction
    } else if tail_fit.slope < -1.0 && tail_fit.r_squared > MIN_FIT_R2 {
        SupportTag::HilbertL2
    } else {
        let p = growth_fit.slope;
        let polynomial = growth_fit.r_squared > MIN_FIT_R2 && (p - lower_fit.slope).abs() < 0.1 * p.max(1.0);
        if polynomial && p > 1.1 {
            SupportTag::WeightedSequence { p: p.round() as u32 }
        } else {
            SupportTag::TemperedDistribution
        }
    };
    Ok(SupportLabel { tag, evidence })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KakutaniVerdict {
    Equivalent,
    Singular,
    UndecidedAtN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KakutaniResult {
    pub affinity: f64,
    pub log_affinity: f64,
    /// `Σ_{k≤N} (1 - h_k)`.
    pub hellinger_series: f64,
    pub verdict: KakutaniVerdict,
}

/// `h = (2√(ab)/(a+b))^{1/2}` and `1 - h`, the latter without cancellation.
fn hellinger_factor(a: f64, b: f64) -> (f64, f64) {
    let h2 = 2.0 * (a * b).sqrt() / (a + b);
    let one_minus_h2 = (a.sqrt() - b.sqrt()).powi(2) / (a + b);
    let h = h2.sqrt();
    (h, one_minus_h2 / (1.0 + h))
}

/// Hellinger affinity of two product Gaussian measures truncated at `n`
/// modes, and the equivalence/singularity verdict from the tail of
/// `Σ (1 - h_k)`.
pub fn kakutani_affinity(first: &[f64], second: &[f64], n: usize) -> Result<KakutaniResult> {
    if n == 0 || n > first.len() || n > second.len() {
        return invalid(format!("truncation {n} outside the supplied sequences"));
    }
    if first[..n].iter().chain(&second[..n]).any(|v| !(*v > 0.0 && v.is_finite())) {
        return invalid("variance sequences must be positive and finite");
    }
    let mut log_affinity = 0.0;
    let mut series = 0.0;
    let mut terms = Vec::with_capacity(n);
    for (&a, &b) in first[..n].iter().zip(&second[..n]) {
        let (h, t) = hellinger_factor(a, b);
        log_affinity += h.ln();
        series += t;
        terms.push(t);
    }
    let verdict = tail_verdict(&terms);
    Ok(KakutaniResult { affinity: log_affinity.exp(), log_affinity, hellinger_series: series, verdict })
}

fn tail_verdict(terms: &[f64]) -> KakutaniVerdict {
    let n = terms.len();
    if terms.iter().all(|&t| t == 0.0) {
        return KakutaniVerdict::Equivalent;
    }
    if n < 8 {
        return KakutaniVerdict::UndecidedAtN;
    }
    let tail: Vec<usize> = (n / 2..=n).collect();
    let tail_t: Vec<f64> = tail.iter().map(|&k| terms[k - 1]).collect();
    if tail_t.iter().all(|&t| t == 0.0) {
        // the sequences agree beyond a finite prefix
        return KakutaniVerdict::Equivalent;
    }
    if tail_t.contains(&0.0) {
        return KakutaniVerdict::UndecidedAtN;
    }
    let Ok(fit) = log_log_fit(&tail, &tail_t) else {
        return KakutaniVerdict::UndecidedAtN;
    };
    let (lo, hi) = tail_t.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    if fit.slope.abs() < 0.05 && lo >= 0.5 * hi {
        // terms do not tend to zero
        return KakutaniVerdict::Singular;
    }
    if fit.r_squared > MIN_FIT_R2 {
        if fit.slope < -1.1 {
            return KakutaniVerdict::Equivalent;
        }
        if fit.slope > -0.95 {
            return KakutaniVerdict::Singular;
        }
    }
    KakutaniVerdict::UndecidedAtN
}

/// A real sequence indexed from `k = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Sequence {
    /// `scale · k^exponent`
    Power { scale: f64, exponent: f64 },
    Explicit { values: Vec<f64> },
}

impl Sequence {
    pub fn power(scale: f64, exponent: f64) -> Self {
        Sequence::Power { scale, exponent }
    }

    pub fn at(&self, k: usize) -> Option<f64> {
        match self {
            Sequence::Power { scale, exponent } => Some(scale * (k as f64).powf(*exponent)),
            Sequence::Explicit { values } => values.get(k.checked_sub(1)?).copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Undecided,
}

/// Mass of the weighted set `E_(α) = {x : Σ α_k² x_k² < ∞}` under the
/// product Gaussian with standard deviations `σ_k`, plus a membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSetAnalysis {
    pub mass: f64,
    pub log_mass: f64,
    pub weighted_trace: f64,
    weights: Sequence,
}

impl SupportSetAnalysis {
    /// Decides whether `Σ α_k² x_k²` converges.
    ///
    /// Only products of power laws are decided (exact p-series test); any
    /// other sequence yields `Undecided`.
    pub fn contains(&self, point: &Sequence) -> Membership {
        match (&self.weights, point) {
            (Sequence::Power { scale: a, exponent: p }, Sequence::Power { scale: x, exponent: q }) => {
                if *a == 0.0 || *x == 0.0 || 2.0 * (p + q) < -1.0 {
                    Membership::Member
                } else {
                    Membership::NonMember
                }
            }
            _ => Membership::Undecided,
        }
    }
}

/// `Π_{k≤N} (1 + 2ε α_k² σ_k²)^{-1/2}` for the regulator `ε`.
pub fn support_set_analysis(
    sigma: &Sequence,
    weights: &Sequence,
    regulator: f64,
    truncation: usize,
) -> Result<SupportSetAnalysis> {
    if !(regulator > 0.0 && regulator.is_finite()) {
        return invalid(format!("regulator must be positive, got {regulator}"));
    }
    if truncation == 0 {
        return invalid("truncation must be at least 1");
    }
    let mut log_mass = 0.0;
    let mut weighted_trace = 0.0;
    for k in 1..=truncation {
        let (Some(s), Some(a)) = (sigma.at(k), weights.at(k)) else {
            return invalid(format!("sequence shorter than truncation ({k})"));
        };
        if !(s > 0.0 && a > 0.0) {
            return invalid(format!("sequences must be positive (k = {k})"));
        }
        let t = a * a * s * s;
        weighted_trace += t;
        log_mass -= 0.5 * (2.0 * regulator * t).ln_1p();
    }
    Ok(SupportSetAnalysis { mass: log_mass.exp(), log_mass, weighted_trace, weights: weights.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub std_error: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum HolderOutcome {
    Estimated(HolderEstimate),
    Undefined,
}

/// Dyadic scales `h = 2L · 2^{-j}`, `j = 3..=9`.
pub const HOLDER_LEVELS: std::ops::RangeInclusive<u32> = 3..=9;
const HOLDER_GROUPS: usize = 10;

/// Hölder exponent of sampled paths from the slope of
/// `ln E|f(x+h) - f(x)|` against `ln h`.
///
/// Paths are evaluated on `2^9 + 1` nodes spanning the interval; the
/// standard error is the spread of slopes over ten disjoint sample groups.
pub fn holder_exponent_estimate(spec: &MeasureSpec, samples: usize, seed: u64) -> Result<HolderOutcome> {
    if spec.model.dimension() != 1 {
        return invalid("Hölder estimation needs a one-dimensional domain");
    }
    if samples < 100 {
        return invalid(format!("need at least 100 samples, got {samples}"));
    }
    if spec.truncation == 0 {
        return Ok(HolderOutcome::Undefined);
    }
    let levels = *HOLDER_LEVELS.end();
    let nodes = (1usize << levels) + 1;
    let l = spec.model.domain().half_width();
    let dx = 2.0 * l / (nodes - 1) as f64;
    let modes = spec.truncation;
    let basis: Vec<Vec<f64>> =
        (0..modes).map(|k| (0..nodes).map(|i| spec.model.eval1(k, -l + i as f64 * dx)).collect()).collect();

    let draws = sample_kl(spec, seed, samples)?;
    let nlev = HOLDER_LEVELS.count();
    // sums[group][level]
    let mut sums = vec![vec![0.0; nlev]; HOLDER_GROUPS];
    let mut counts = vec![vec![0usize; nlev]; HOLDER_GROUPS];
    let mut path = vec![0.0; nodes];
    for (s, draw) in draws.iter().enumerate() {
        path.iter_mut().for_each(|p| *p = 0.0);
        for (c, row) in draw.coefficients.iter().zip(&basis) {
            path.iter_mut().zip(row).for_each(|(p, e)| *p += c * e);
        }
        let g = s % HOLDER_GROUPS;
        for (li, j) in HOLDER_LEVELS.enumerate() {
            let stride = 1usize << (levels - j);
            let mut acc = 0.0;
            for i in 0..nodes - stride {
                acc += (path[i + stride] - path[i]).abs();
            }
            sums[g][li] += acc;
            counts[g][li] += nodes - stride;
        }
    }
    let log_h: Vec<f64> = HOLDER_LEVELS.map(|j| (2.0 * l * 0.5f64.powi(j as i32)).ln()).collect();
    let fit_of = |sum: &[f64], cnt: &[usize]| -> Option<LinearFit> {
        let ly: Vec<f64> = sum.iter().zip(cnt).map(|(s, c)| (s / *c as f64).ln()).collect();
        if ly.iter().any(|y| !y.is_finite()) {
            return None;
        }
        stats::linear_fit(&log_h, &ly).ok()
    };
    let total_s: Vec<f64> = (0..nlev).map(|li| sums.iter().map(|g| g[li]).sum()).collect();
    let total_c: Vec<usize> = (0..nlev).map(|li| counts.iter().map(|g| g[li]).sum()).collect();
    let Some(fit) = fit_of(&total_s, &total_c) else {
        return Ok(HolderOutcome::Undefined);
    };
    let group_slopes: Vec<f64> =
        sums.iter().zip(&counts).filter_map(|(s, c)| fit_of(s, c)).map(|f| f.slope).collect();
    let std_error = if group_slopes.len() >= 2 {
        (stats::variance(&group_slopes) / group_slopes.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(HolderOutcome::Estimated(HolderEstimate { exponent: fit.slope, std_error, r_squared: fit.r_squared }))
}

/// Interaction `F` with its declared lower bound `F ≥ -γ`.
pub struct Interaction<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub lower_bound: f64,
}

/// `exp(-g ∫_Ω F(φ(x)) dx)` with a trapezoid rule on `points` nodes.
///
/// Fails if `F` dips below its declared bound at any node, so the returned
/// weight always satisfies `0 < w ≤ e^{gγ·vol(Ω)}`.
pub fn interaction_weight(sample: &FieldSample, interaction: &Interaction, coupling: f64, points: usize) -> Result<f64> {
    if !(coupling >= 0.0 && coupling.is_finite()) {
        return invalid(format!("coupling must be nonnegative, got {coupling}"));
    }
    if sample.model.dimension() != 1 {
        return invalid("interaction weights are evaluated on one-dimensional domains");
    }
    if points < 2 {
        return invalid("quadrature needs at least two nodes");
    }
    let gamma = interaction.lower_bound;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid("lower bound γ must be finite and nonnegative");
    }
    let l = sample.model.domain().half_width();
    let h = 2.0 * l / (points - 1) as f64;
    let mut values = Vec::with_capacity(points);
    for i in 0..points {
        let v = (interaction.f)(sample.eval1(-l + i as f64 * h));
        if v < -gamma {
            return invalid(format!("F = {v} violates the declared bound -{gamma}"));
        }
        values.push(v);
    }
    let integral = quad::trapezoid(&values, h);
    let weight = (-coupling * integral).exp();
    if !weight.is_finite() || !integral.is_finite() {
        return Err(LabError::Overflow(format!("interaction integral {integral} is not finite")));
    }
    let bound = (coupling * gamma * 2.0 * l).exp();
    debug_assert!(weight <= bound * (1.0 + 1e-12));
    Ok(weight.min(bound))
}

/// Mean interaction weight over KL samples: a truncated partition function.
pub fn partition_estimate(
    spec: &MeasureSpec,
    interaction: &Interaction,
    coupling: f64,
    points: usize,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let draws = sample_kl(spec, seed, samples)?;
    let weights = draws
        .iter()
        .map(|s| interaction_weight(s, interaction, coupling, points))
        .collect::<Result<Vec<_>>>()?;
    if weights.len() < 2 {
        return Ok(Estimate::exact(weights[0]));
    }
    Ok(stats::iid_estimate(&weights))
}
