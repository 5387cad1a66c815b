//! Galerkin-truncated Langevin field dynamics and their Gibbs equilibria.
//!
//! The field `U(x, t) = Σ_i a_i(t) φ_i(x)` is projected on `n` eigenmodes.
//! With the energy `H(a) = aᵀKa + ∫_Ω W(Σ a_j φ_j) dx` (`K = diag λ_i` for the
//! Laplacian generator), the dynamics is
//!
//! `da = -∇H(a) dt + √(2 kT) dB`,
//!
//! whose stationary law is `exp(-H/kT)`. In particular for `W ≡ 0` each mode
//! is an Ornstein–Uhlenbeck process with variance `kT / (2λ_i)`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::quad;
use crate::rng;
use crate::spectral::SpectralModel;
use crate::stats::{self, Estimate, Histogram};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nonlinearity `V` together with its antiderivative `W` (`W' = V`).
#[derive(Clone)]
pub struct Nonlinearity {
    force: ScalarFn,
    potential: ScalarFn,
    lipschitz: f64,
    vanishes: bool,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("lipschitz", &self.lipschitz)
            .field("vanishes", &self.vanishes)
            .finish()
    }
}

/// Radius over which the Lipschitz constant of polynomial nonlinearities is declared.
pub const POLYNOMIAL_LIPSCHITZ_RADIUS: f64 = 10.0;

impl Nonlinearity {
    pub fn zero() -> Self {
        Self { force: Arc::new(|_| 0.0), potential: Arc::new(|_| 0.0), lipschitz: 0.0, vanishes: true }
    }

    /// `V(u) = c·u^p`, `W(u) = c·u^{p+1}/(p+1)`.
    pub fn monomial(coefficient: f64, power: u32) -> Self {
        if coefficient == 0.0 {
            return Self::zero();
        }
        let p = power as i32;
        let lipschitz = if power == 0 {
            0.0
        } else {
            coefficient.abs() * power as f64 * POLYNOMIAL_LIPSCHITZ_RADIUS.powi(p - 1)
        };
        Self {
            force: Arc::new(move |u| coefficient * u.powi(p)),
            potential: Arc::new(move |u| coefficient * u.powi(p + 1) / (p + 1) as f64),
            lipschitz,
            vanishes: false,
        }
    }

    pub fn custom(
        force: impl Fn(f64) -> f64 + Send + Sync + 'static,
        potential: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return invalid(format!("declared Lipschitz constant must be finite, got {lipschitz}"));
        }
        Ok(Self { force: Arc::new(force), potential: Arc::new(potential), lipschitz, vanishes: false })
    }

    pub fn force(&self, u: f64) -> f64 {
        (self.force)(u)
    }

    pub fn potential(&self, u: f64) -> f64 {
        (self.potential)(u)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn vanishes(&self) -> bool {
        self.vanishes
    }
}

#[derive(Debug, Clone, PartialEq)]
enum LinearPart {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

/// A truncated field system ready for simulation.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    model: Arc<SpectralModel>,
    modes: usize,
    nonlinearity: Nonlinearity,
    weights: Vec<f64>,
    /// `basis[i][q] = φ_i(x_q)`
    basis: Vec<Vec<f64>>,
    linear: LinearPart,
}

impl GalerkinSystem {
    /// Laplacian generator on the first `modes` eigenmodes with a uniform
    /// trapezoid grid of `grid_points` nodes.
    pub fn new(model: Arc<SpectralModel>, modes: usize, nonlinearity: Nonlinearity, grid_points: usize) -> Result<Self> {
        if model.dimension() != 1 {
            return invalid("Galerkin systems are built on one-dimensional models");
        }
        if modes == 0 || modes > model.len() {
            return invalid(format!("mode count {modes} outside 1..={}", model.len()));
        }
        if grid_points < 3 {
            return invalid("quadrature grid needs at least three nodes");
        }
        let l = model.domain().half_width();
        let dx = 2.0 * l / (grid_points - 1) as f64;
        let k_max = model.eigenvalues()[modes - 1].sqrt();
        if k_max > 0.0 && 2.0 * std::f64::consts::PI / k_max / dx < 8.0 {
            return invalid(format!(
                "grid of {grid_points} nodes gives fewer than 8 points per oscillation of mode {modes}"
            ));
        }
        let mut weights = vec![dx; grid_points];
        weights[0] = 0.5 * dx;
        weights[grid_points - 1] = 0.5 * dx;
        let basis = (0..modes)
            .map(|k| (0..grid_points).map(|q| model.eval1(k, -l + q as f64 * dx)).collect())
            .collect();
        let linear = LinearPart::Diagonal(model.eigenvalues()[..modes].to_vec());
        Ok(Self { model, modes, nonlinearity, weights, basis, linear })
    }

    /// Replaces the Laplacian by an assembled mode-space generator.
    pub fn with_generator(mut self, generator: &AnomalousGenerator) -> Result<Self> {
        if generator.matrix.nrows() != self.modes {
            return invalid("generator dimension differs from the mode count");
        }
        self.linear = LinearPart::Dense(generator.matrix.clone());
        Ok(self)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn model(&self) -> &Arc<SpectralModel> {
        &self.model
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn grid_points(&self) -> usize {
        self.weights.len()
    }

    /// Largest eigenvalue of the linear part `K`.
    pub fn stiffness(&self) -> f64 {
        match &self.linear {
            LinearPart::Diagonal(d) => d.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            LinearPart::Dense(m) => SymmetricEigen::new(m.clone()).eigenvalues.max(),
        }
    }

    /// `Ka`.
    fn apply_linear(&self, a: &[f64], out: &mut [f64]) {
        match &self.linear {
            LinearPart::Diagonal(d) => out.iter_mut().zip(d).zip(a).for_each(|((o, l), x)| *o = l * x),
            LinearPart::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..a.len()).map(|j| m[(i, j)] * a[j]).sum();
                }
            }
        }
    }

    fn field_on_grid(&self, a: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.weights.len()];
        for (c, row) in a.iter().zip(&self.basis) {
            u.iter_mut().zip(row).for_each(|(x, e)| *x += c * e);
        }
        u
    }

    /// `𝒱(a) = ∫_Ω W(Σ a_j φ_j) dx`.
    pub fn nonlinear_energy(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.modes {
            return invalid("coefficient vector length differs from the mode count");
        }
        if self.nonlinearity.vanishes {
            return Ok(0.0);
        }
        let u = self.field_on_grid(a);
        let e: f64 = u.iter().zip(&self.weights).map(|(x, w)| w * self.nonlinearity.potential(*x)).sum();
        if !e.is_finite() {
            return Err(LabError::Overflow(format!("nonlinear energy is {e}")));
        }
        Ok(e)
    }

    /// `H(a) = aᵀKa + 𝒱(a)`.
    pub fn energy(&self, a: &[f64]) -> Result<f64> {
        let mut ka = vec![0.0; a.len()];
        self.apply_linear(a, &mut ka);
        Ok(a.iter().zip(&ka).map(|(x, y)| x * y).sum::<f64>() + self.nonlinear_energy(a)?)
    }

    /// `-∇H(a)`.
    pub fn drift(&self, a: &[f64]) -> Result<Vec<f64>> {
        let proj = project_nonlinearity(self, a)?;
        let mut ka = vec![0.0; a.len()];
        self.apply_linear(a, &mut ka);
        Ok(ka.iter().zip(&proj).map(|(k, p)| -2.0 * k - p).collect())
    }
}

/// `∫_Ω V(Σ_j a_j φ_j(x)) φ_i(x) dx` for each mode `i`; the gradient of
/// [`GalerkinSystem::nonlinear_energy`] under the same quadrature.
pub fn project_nonlinearity(sys: &GalerkinSystem, a: &[f64]) -> Result<Vec<f64>> {
    if a.len() != sys.modes {
        return invalid(format!("expected {} coefficients, got {}", sys.modes, a.len()));
    }
    if sys.nonlinearity.vanishes {
        return Ok(vec![0.0; sys.modes]);
    }
    let u = sys.field_on_grid(a);
    let fw: Vec<f64> = u.iter().zip(&sys.weights).map(|(x, w)| w * sys.nonlinearity.force(*x)).collect();
    let out: Vec<f64> = sys.basis.iter().map(|row| row.iter().zip(&fw).map(|(e, f)| e * f).sum()).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Overflow("projected nonlinearity is not finite".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub dt: f64,
    pub temperature: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// keep every `thin`-th post-burn-in state
    pub thin: usize,
}

impl LangevinConfig {
    pub fn new(dt: f64, temperature: f64, steps: usize, burn_in: usize, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return invalid(format!("temperature must be positive, got {temperature}"));
        }
        if burn_in >= steps {
            return invalid(format!("burn-in {burn_in} must be below the step count {steps}"));
        }
        Ok(Self { dt, temperature, steps, burn_in, seed, thin: 1 })
    }

    pub fn thinned(mut self, thin: usize) -> Self {
        self.thin = thin.max(1);
        self
    }
}

/// Post-burn-in record of a Langevin run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    /// `samples[i]` is the recorded series of mode `i`.
    pub samples: Vec<Vec<f64>>,
    pub means: Vec<Estimate>,
    pub second_moments: Vec<Estimate>,
    pub covariance: Vec<Vec<f64>>,
    pub autocorrelation_times: Vec<f64>,
    pub histograms: Vec<Histogram>,
    pub temperature: f64,
    pub dt: f64,
}

impl TrajectoryStats {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const DIVERGENCE_THRESHOLD: f64 = 1e6;
const STAT_BATCHES: usize = 50;

fn correlated_estimate(xs: &[f64]) -> Estimate {
    stats::batch_means(xs, STAT_BATCHES.min(xs.len() / 2).max(2)).unwrap_or_else(|_| stats::iid_estimate(xs))
}

/// Euler–Maruyama integration of `da = -∇H dt + √(2kT) dB`.
pub fn simulate(sys: &GalerkinSystem, cfg: &LangevinConfig, initial: &[f64]) -> Result<TrajectoryStats> {
    if initial.len() != sys.modes {
        return invalid(format!("initial state has {} entries, system has {} modes", initial.len(), sys.modes));
    }
    let stiffness = sys.stiffness();
    if cfg.dt * 2.0 * stiffness >= 2.0 {
        return Err(LabError::Instability(format!(
            "dt·2λ_max = {} violates the Euler–Maruyama bound 2 (λ_max = {stiffness})",
            cfg.dt * 2.0 * stiffness
        )));
    }
    let n = sys.modes;
    let noise = (2.0 * cfg.temperature * cfg.dt).sqrt();
    let mut r = rng::seeded(cfg.seed);
    let mut a = initial.to_vec();
    let kept = (cfg.steps - cfg.burn_in).div_ceil(cfg.thin);
    let mut samples: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(kept)).collect();
    for step in 0..cfg.steps {
        let drift = sys.drift(&a)?;
        for (x, d) in a.iter_mut().zip(&drift) {
            let z: f64 = StandardNormal.sample(&mut r);
            *x += cfg.dt * d + noise * z;
        }
        if let Some((i, x)) = a.iter().enumerate().find(|(_, x)| !(x.abs() <= DIVERGENCE_THRESHOLD)) {
            return Err(LabError::Instability(format!(
                "mode {i} reached {x:e} at step {step}; dt = {} with λ_max = {stiffness} and declared Lipschitz constant {}",
                cfg.dt,
                sys.nonlinearity.lipschitz
            )));
        }
        if step >= cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.thin) {
            samples.iter_mut().zip(&a).for_each(|(s, x)| s.push(*x));
        }
    }
    summarize(samples, cfg.temperature, cfg.dt)
}

fn summarize(samples: Vec<Vec<f64>>, temperature: f64, dt: f64) -> Result<TrajectoryStats> {
    let len = samples.first().map_or(0, Vec::len);
    if len < 4 {
        return Err(LabError::Undersampled(format!("only {len} recorded states")));
    }
    let means: Vec<Estimate> = samples.iter().map(|s| correlated_estimate(s)).collect();
    let second_moments = samples
        .iter()
        .map(|s| {
            let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
            correlated_estimate(&sq)
        })
        .collect();
    let covariance = samples
        .iter()
        .zip(&means)
        .map(|(si, mi)| {
            samples
                .iter()
                .zip(&means)
                .map(|(sj, mj)| {
                    si.iter().zip(sj).map(|(x, y)| (x - mi.value) * (y - mj.value)).sum::<f64>() / (len as f64 - 1.0)
                })
                .collect()
        })
        .collect();
    // autocorrelation from a bounded prefix keeps the window search cheap
    let autocorrelation_times = samples.iter().map(|s| stats::integrated_autocorr_time(&s[..s.len().min(200_000)])).collect();
    let histograms = samples.iter().map(|s| Histogram::freedman_diaconis(s)).collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryStats { samples, means, second_moments, covariance, autocorrelation_times, histograms, temperature, dt })
}

/// Stationary variance of the Euler–Maruyama OU chain with rate `2λ`:
/// `kT / (2λ(1 - λ dt))`.
pub fn euler_maruyama_ou_variance(lambda: f64, temperature: f64, dt: f64) -> f64 {
    temperature / (2.0 * lambda * (1.0 - lambda * dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsDensity {
    pub density: f64,
    pub log_density: f64,
}

/// Unnormalized `exp(-H(a)/kT)`.
pub fn gibbs_density(sys: &GalerkinSystem, temperature: f64, a: &[f64]) -> Result<GibbsDensity> {
    if !(temperature > 0.0) {
        return invalid("temperature must be positive");
    }
    let log_density = -sys.energy(a)? / temperature;
    Ok(GibbsDensity { density: log_density.exp(), log_density })
}

/// A one-dimensional reference law for a mode marginal.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// Tabulated density on a uniform grid, normalized by quadrature.
    Tabulated { grid: Vec<f64>, cdf: Vec<f64>, second_moment: f64 },
    /// Empirical law of a set of draws.
    Empirical { sorted: Vec<f64>, second_moment: f64 },
}

impl Marginal {
    pub fn empirical(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let second_moment = stats::mean(&samples.iter().map(|x| x * x).collect::<Vec<_>>());
        Marginal::Empirical { sorted, second_moment }
    }

    fn from_density(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let h = grid[1] - grid[0];
        let z = quad::trapezoid(&density, h);
        if !(z > 0.0 && z.is_finite()) {
            return Err(LabError::Overflow(format!("marginal normalization is {z}")));
        }
        let mut cdf = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            cdf[i] = cdf[i - 1] + 0.5 * h * (density[i] + density[i - 1]) / z;
        }
        let m2: Vec<f64> = grid.iter().zip(&density).map(|(x, p)| x * x * p).collect();
        let second_moment = quad::trapezoid(&m2, h) / z;
        Ok(Marginal::Tabulated { grid, cdf, second_moment })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Tabulated { grid, cdf, .. } => {
                if x <= grid[0] {
                    return 0.0;
                }
                let last = grid.len() - 1;
                if x >= grid[last] {
                    return 1.0;
                }
                let h = grid[1] - grid[0];
                let s = (x - grid[0]) / h;
                let i = (s.floor() as usize).min(last - 1);
                let w = s - i as f64;
                (1.0 - w) * cdf[i] + w * cdf[i + 1]
            }
            Marginal::Empirical { sorted, .. } => {
                sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Marginal::Tabulated { second_moment, .. } | Marginal::Empirical { second_moment, .. } => *second_moment,
        }
    }
}

const MARGINAL_NODES: usize = 2001;
const MARGINAL_NODES_JOINT: usize = 121;

/// Gibbs marginals of every mode, normalized by quadrature over
/// `[-span, span]`.
///
/// Separable systems (diagonal `K`, vanishing nonlinearity) and one-mode
/// systems use 1-D quadrature; coupled systems with up to three modes use a
/// tensor grid. Larger coupled systems are rejected.
pub fn gibbs_marginals(sys: &GalerkinSystem, temperature: f64, span: f64) -> Result<Vec<Marginal>> {
    let n = sys.modes;
    let separable = sys.nonlinearity.vanishes && matches!(sys.linear, LinearPart::Diagonal(_));
    if separable || n == 1 {
        return (0..n)
            .map(|i| {
                let grid: Vec<f64> =
                    (0..MARGINAL_NODES).map(|q| -span + 2.0 * span * q as f64 / (MARGINAL_NODES - 1) as f64).collect();
                let mut a = vec![0.0; n];
                let dens = grid
                    .iter()
                    .map(|&x| {
                        a[i] = x;
                        gibbs_density(sys, temperature, &a).map(|g| g.density)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Marginal::from_density(grid, dens)
            })
            .collect();
    }
    if n > 3 {
        return invalid(format!("coupled marginals are only tabulated for up to 3 modes, got {n}"));
    }
    let m = MARGINAL_NODES_JOINT;
    let axis: Vec<f64> = (0..m).map(|q| -span + 2.0 * span * q as f64 / (m - 1) as f64).collect();
    let mut marg = vec![vec![0.0; m]; n];
    let total = m.pow(n as u32);
    let mut a = vec![0.0; n];
    let mut logs = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        for x in a.iter_mut() {
            *x = axis[rem % m];
            rem /= m;
        }
        logs.push(gibbs_density(sys, temperature, &a)?.log_density);
    }
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (flat, lg) in logs.iter().enumerate() {
        let w = (lg - shift).exp();
        let mut rem = flat;
        for row in marg.iter_mut() {
            row[rem % m] += w;
            rem /= m;
        }
    }
    marg.into_iter().map(|d| Marginal::from_density(axis.clone(), d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Undersampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub ks_distance: f64,
    pub empirical_second_moment: Estimate,
    pub reference_second_moment: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub modes: Vec<ModeComparison>,
    pub verdict: Verdict,
}

pub const KS_THRESHOLD: f64 = 0.05;
pub const MOMENT_Z_THRESHOLD: f64 = 3.0;
pub const MIN_EQUILIBRIUM_SAMPLES: usize = 10_000;

/// Compares a trajectory's marginals against reference laws: pass iff every
/// KS distance is below 0.05 and every second moment is within 3 standard
/// errors.
pub fn equilibrium_test_against(stats: &TrajectoryStats, references: &[Marginal]) -> Result<EquilibriumReport> {
    if references.len() != stats.samples.len() {
        return invalid("one reference marginal per mode is required");
    }
    let modes: Vec<ModeComparison> = stats
        .samples
        .iter()
        .zip(&stats.second_moments)
        .zip(references)
        .map(|((s, m2), r)| ModeComparison {
            ks_distance: stats::ks_distance(s, |x| r.cdf(x)),
            empirical_second_moment: *m2,
            reference_second_moment: r.second_moment(),
            z_score: m2.z_score(r.second_moment()),
        })
        .collect();
    let verdict = if stats.len() < MIN_EQUILIBRIUM_SAMPLES {
        Verdict::Undersampled
    } else if modes.iter().all(|m| m.ks_distance < KS_THRESHOLD && m.z_score.abs() <= MOMENT_Z_THRESHOLD) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(EquilibriumReport { modes, verdict })
}

/// [`equilibrium_test_against`] the quadrature-normalized Gibbs marginals at
/// temperature `temperature`.
pub fn equilibrium_test(stats: &TrajectoryStats, sys: &GalerkinSystem, temperature: f64) -> Result<EquilibriumReport> {
    let span = stats
        .samples
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-3)
        * 1.5
        + 1.0;
    let refs = gibbs_marginals(sys, temperature, span)?;
    equilibrium_test_against(stats, &refs)
}

/// Detailed-balance surrogate along recorded transitions `x → y`:
/// compares `ln p(y|x) - ln p(x|y)` for the Euler–Maruyama kernel with the
/// Gibbs log-ratio `ln π(y) - ln π(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailedBalance {
    pub mean_abs_discrepancy: f64,
    pub mean_abs_gibbs_ratio: f64,
    pub relative_discrepancy: f64,
    pub pairs: usize,
}

pub fn detailed_balance_surrogate(sys: &GalerkinSystem, cfg: &LangevinConfig, path: &[Vec<f64>]) -> Result<DetailedBalance> {
    if path.len() < 2 {
        return invalid("need at least one transition");
    }
    let var = 2.0 * cfg.temperature * cfg.dt;
    let log_kernel = |from: &[f64], to: &[f64]| -> Result<f64> {
        let d = sys.drift(from)?;
        Ok(-from
            .iter()
            .zip(to)
            .zip(&d)
            .map(|((x, y), g)| (y - x - cfg.dt * g).powi(2))
            .sum::<f64>()
            / (2.0 * var))
    };
    let (mut disc, mut ratio) = (0.0, 0.0);
    for w in path.windows(2) {
        let (x, y) = (&w[0], &w[1]);
        let kernel_ratio = log_kernel(x, y)? - log_kernel(y, x)?;
        let gibbs = gibbs_density(sys, cfg.temperature, y)?.log_density - gibbs_density(sys, cfg.temperature, x)?.log_density;
        disc += (kernel_ratio - gibbs).abs();
        ratio += gibbs.abs();
    }
    let pairs = path.len() - 1;
    let mean_abs_discrepancy = disc / pairs as f64;
    let mean_abs_gibbs_ratio = ratio / pairs as f64;
    Ok(DetailedBalance {
        mean_abs_discrepancy,
        mean_abs_gibbs_ratio,
        relative_discrepancy: mean_abs_discrepancy / mean_abs_gibbs_ratio,
        pairs,
    })
}

/// Mode-space matrix of `(-Δ)^α + ε + V̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalousGenerator {
    pub matrix: DMatrix<f64>,
    /// `Σ_k 1/(λ_k^α + ε)`
    pub trace_indicator: f64,
    pub trace_class: bool,
}

/// Assembles the anomalous-diffusion generator on the first `modes` modes.
///
/// `potential` holds samples of `V̂` on a uniform grid spanning the domain
/// (endpoints included); matrix elements use the trapezoid rule.
pub fn anomalous_generator(
    model: &SpectralModel,
    modes: usize,
    power: f64,
    potential: &[f64],
    shift: f64,
) -> Result<AnomalousGenerator> {
    let nu = model.dimension() as f64;
    if nu != 1.0 {
        return invalid("anomalous generators are assembled on one-dimensional models");
    }
    if !(power > nu / 2.0) {
        return invalid(format!("power {power} is outside the trace-class regime α > ν/2 = {}", nu / 2.0));
    }
    if !(shift > 0.0) {
        return invalid(format!("shift ε must be positive, got {shift}"));
    }
    if modes == 0 || modes > model.len() {
        return invalid("mode count outside the model");
    }
    if potential.iter().any(|v| !v.is_finite()) {
        return invalid("potential samples must be finite (square-integrable)");
    }
    let mut matrix = DMatrix::zeros(modes, modes);
    let lam = &model.eigenvalues()[..modes];
    for k in 0..modes {
        matrix[(k, k)] = lam[k].powf(power) + shift;
    }
    if potential.len() >= 2 {
        let l = model.domain().half_width();
        let p = potential.len();
        let h = 2.0 * l / (p - 1) as f64;
        let table: Vec<Vec<f64>> =
            (0..modes).map(|k| (0..p).map(|q| model.eval1(k, -l + q as f64 * h)).collect()).collect();
        for i in 0..modes {
            for j in 0..=i {
                let prod: Vec<f64> = (0..p).map(|q| potential[q] * table[i][q] * table[j][q]).collect();
                let v = quad::trapezoid(&prod, h);
                matrix[(i, j)] += v;
                if i != j {
                    matrix[(j, i)] += v;
                }
            }
        }
    } else if potential.len() == 1 {
        return invalid("potential needs at least two samples");
    }
    let trace_indicator = lam.iter().map(|l| (l.powf(power) + shift).recip()).sum();
    Ok(AnomalousGenerator { matrix, trace_indicator, trace_class: power > nu / 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_interval_dirichlet;

    fn system(modes: usize, nl: Nonlinearity) -> GalerkinSystem {
        let model = Arc::new(build_interval_dirichlet(std::f64::consts::FRAC_PI_2, 8).unwrap());
        GalerkinSystem::new(model, modes, nl, 257).unwrap()
    }

    #[test]
    fn linear_nonlinearity_projects_to_identity() {
        let sys = system(4, Nonlinearity::monomial(1.0, 1));
        let a = [0.3, -1.2, 0.5, 2.0];
        let p = project_nonlinearity(&sys, &a).unwrap();
        for (x, y) in p.iter().zip(&a) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn zero_nonlinearity_projects_to_zero() {
        let sys = system(3, Nonlinearity::zero());
        assert_eq!(project_nonlinearity(&sys, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert!(project_nonlinearity(&sys, &[1.0]).is_err());
    }

    #[test]
    fn config_and_grid_validation() {
        assert!(LangevinConfig::new(0.0, 1.0, 10, 1, 0).is_err());
        assert!(LangevinConfig::new(0.1, 1.0, 10, 10, 0).is_err());
        let model = Arc::new(build_interval_dirichlet(1.0, 16).unwrap());
        assert!(GalerkinSystem::new(model, 16, Nonlinearity::zero(), 20).is_err());
    }

    #[test]
    fn stability_bound_enforced() {
        let sys = system(2, Nonlinearity::zero());
        // λ_max = 4: dt·2λ_max = 2.4 ≥ 2
        let cfg = LangevinConfig::new(0.3, 1.0, 10, 1, 0).unwrap();
        assert!(matches!(simulate(&sys, &cfg, &[0.0, 0.0]), Err(LabError::Instability(_))));
    }

    #[test]
    fn seed_determinism() {
        let sys = system(2, Nonlinearity::monomial(1.0, 3));
        let cfg = LangevinConfig::new(0.01, 1.0, 2000, 100, 42).unwrap();
        let a = simulate(&sys, &cfg, &[0.1, 0.0]).unwrap();
        let b = simulate(&sys, &cfg, &[0.1, 0.0]).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn gibbs_density_quadratic_case() {
        let sys = system(2, Nonlinearity::zero());
        let g = gibbs_density(&sys, 2.0, &[1.0, 0.5]).unwrap();
        // H = 1·1² + 4·0.5² = 2
        assert!((g.log_density + 1.0).abs() < 1e-14);
    }

    #[test]
    fn self_comparison_passes() {
        let sys = system(1, Nonlinearity::zero());
        let cfg = LangevinConfig::new(0.05, 1.0, 20_500, 500, 3).unwrap();
        let st = simulate(&sys, &cfg, &[0.0]).unwrap();
        let refs: Vec<Marginal> = st.samples.iter().map(|s| Marginal::empirical(s)).collect();
        let report = equilibrium_test_against(&st, &refs).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert!(report.modes[0].ks_distance <= 1.0 / st.len() as f64 + 1e-15);
    }

    #[test]
    fn undersampled_flag() {
        let sys = system(1, Nonlinearity::zero());
        let cfg = LangevinConfig::new(0.05, 1.0, 600, 100, 3).unwrap();
        let st = simulate(&sys, &cfg, &[0.0]).unwrap();
        assert_eq!(equilibrium_test(&st, &sys, 1.0).unwrap().verdict, Verdict::Undersampled);
    }

    #[test]
    fn anomalous_generator_diagonal_cases() {
        let model = build_interval_dirichlet(1.0, 6).unwrap();
        let g = anomalous_generator(&model, 6, 0.8, &[], 0.5).unwrap();
        for k in 0..6 {
            assert!((g.matrix[(k, k)] - (model.eigenvalues()[k].powf(0.8) + 0.5)).abs() < 1e-14);
        }
        let c = vec![0.7; 2001];
        let gc = anomalous_generator(&model, 6, 0.8, &c, 0.5).unwrap();
        let diff = &gc.matrix - &g.matrix - DMatrix::identity(6, 6) * 0.7;
        assert!(diff.abs().max() < 1e-9);
        assert!(anomalous_generator(&model, 6, 0.4, &[], 0.5).is_err());
        assert!(anomalous_generator(&model, 6, 0.8, &[f64::NAN, 1.0], 0.5).is_err());
        assert!(anomalous_generator(&model, 6, 0.8, &[], 0.0).is_err());
    }
}
