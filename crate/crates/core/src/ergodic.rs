//! Nonlinear lattice string, thermostatted time averages, Gibbs averages and
//! the Brownian-bridge representation of the continuum Gibbs law.
//!
//! Sites `σ_i = -L + i a`, `a = 2L/N`, `i = 0..=N`, with `x_0 = x_N = 0`.
//! The configurational Gibbs law is
//!
//! `π(x) ∝ exp{-(1/2kT) Σ_i a[((x_{i+1} - x_i)/a)² + V(x_i)]}`
//!
//! whose `V ≡ 0` covariance is `kT` times the lattice Dirichlet Green
//! function of `-d²/dσ²`; at the nodes that equals the continuum one, so
//! `⟨x(0)²⟩ = kT·L/2` exactly.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::linalg::{sym_tridiag_mul, TridiagCholesky};
use crate::rng::{self, LabRng};
use crate::stats::{self, Estimate};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// On-site potential `V` with derivative `V'`.
#[derive(Clone)]
pub struct SitePotential {
    value: ScalarFn,
    derivative: ScalarFn,
    /// `Some(c)` when `V(x) = c x²`
    quadratic: Option<f64>,
    even: bool,
}

impl std::fmt::Debug for SitePotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SitePotential").field("quadratic", &self.quadratic).field("even", &self.even).finish()
    }
}

impl SitePotential {
    pub fn zero() -> Self {
        Self::quadratic(0.0)
    }

    /// `V(x) = c x²`.
    pub fn quadratic(c: f64) -> Self {
        Self {
            value: Arc::new(move |x| c * x * x),
            derivative: Arc::new(move |x| 2.0 * c * x),
            quadratic: Some(c),
            even: true,
        }
    }

    /// `V(x) = c x⁴`.
    pub fn quartic(c: f64) -> Self {
        Self {
            value: Arc::new(move |x| c * x.powi(4)),
            derivative: Arc::new(move |x| 4.0 * c * x.powi(3)),
            quadratic: None,
            even: true,
        }
    }

    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        even: bool,
    ) -> Self {
        Self { value: Arc::new(value), derivative: Arc::new(derivative), quadratic: None, even }
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    pub fn quadratic_coefficient(&self) -> Option<f64> {
        self.quadratic
    }

    pub fn is_zero(&self) -> bool {
        self.quadratic == Some(0.0)
    }

    pub fn is_even(&self) -> bool {
        self.even
    }
}

/// Pinned string of `N` bonds on `[-L, L]`.
#[derive(Debug, Clone)]
pub struct LatticeString {
    sites: usize,
    half_length: f64,
    /// displacements at `σ_0..=σ_N`
    x: Vec<f64>,
    /// velocities at `σ_0..=σ_N`
    p: Vec<f64>,
    potential: SitePotential,
}

impl LatticeString {
    /// String at rest.
    pub fn new(sites: usize, half_length: f64, potential: SitePotential) -> Result<Self> {
        if sites < 2 {
            return invalid(format!("need at least 2 bonds, got {sites}"));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return invalid(format!("half-length must be positive, got {half_length}"));
        }
        Ok(Self { sites, half_length, x: vec![0.0; sites + 1], p: vec![0.0; sites + 1], potential })
    }

    /// Sets interior displacements and velocities (`N - 1` values each).
    pub fn with_state(mut self, x: &[f64], p: &[f64]) -> Result<Self> {
        let m = self.sites - 1;
        if x.len() != m || p.len() != m {
            return invalid(format!("expected {m} interior values"));
        }
        if x.iter().chain(p).any(|v| !v.is_finite()) {
            return invalid("state must be finite");
        }
        self.x[1..self.sites].copy_from_slice(x);
        self.p[1..self.sites].copy_from_slice(p);
        Ok(self)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.sites as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..=self.sites).map(|i| -self.half_length + i as f64 * self.spacing()).collect()
    }

    pub fn displacements(&self) -> &[f64] {
        &self.x
    }

    pub fn velocities(&self) -> &[f64] {
        &self.p
    }

    pub fn potential(&self) -> &SitePotential {
        &self.potential
    }

    #[cfg(test)]
    fn config_potential(&self, x: &[f64]) -> f64 {
        lattice_action(x, self.spacing(), &self.potential)
    }
}

/// `½ Σ_i a[((x_{i+1} - x_i)/a)² + V(x_i)]`, the exponent of the Gibbs law in units of `kT`.
fn lattice_action(x: &[f64], a: f64, v: &SitePotential) -> f64 {
    let n = x.len() - 1;
    let grad: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / a;
    let pot: f64 = if v.is_zero() { 0.0 } else { a * x[..n].iter().map(|&y| v.value(y)).sum::<f64>() };
    0.5 * (grad + pot)
}

/// `Σ_i a (p_i²/2 + ½((x_{i+1} - x_i)/a)² + V(x_i))`.
pub fn hamiltonian_energy(s: &LatticeString) -> f64 {
    let a = s.spacing();
    let n = s.sites;
    let kinetic: f64 = s.p.iter().map(|p| 0.5 * p * p).sum::<f64>() * a;
    let grad: f64 = s.x.windows(2).map(|w| 0.5 * (w[1] - w[0]).powi(2)).sum::<f64>() / a;
    let pot: f64 = a * s.x[..n].iter().map(|&y| s.potential.value(y)).sum::<f64>();
    kinetic + grad + pot
}

/// Scalar functional of a pinned configuration `x_0..=x_N` with spacing `a`.
#[derive(Clone)]
pub enum Observable {
    One,
    /// `x(0)`
    Mid,
    /// `x(0)²`
    MidSquare,
    /// `cos(t·x(0))`
    CosMid(f64),
    /// `Σ x_i² a`
    SquaredNorm,
    /// `exp(-Σ x_i² a)`
    ExpSquaredNorm,
    Custom(String, Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::One => "one".into(),
            Observable::Mid => "x_mid".into(),
            Observable::MidSquare => "x_mid_sq".into(),
            Observable::CosMid(t) => format!("cos_{t}_x_mid"),
            Observable::SquaredNorm => "l2_sq".into(),
            Observable::ExpSquaredNorm => "exp_neg_l2_sq".into(),
            Observable::Custom(name, _) => name.clone(),
        }
    }

    pub fn eval(&self, x: &[f64], a: f64) -> f64 {
        let mid = || x[(x.len() - 1) / 2];
        match self {
            Observable::One => 1.0,
            Observable::Mid => mid(),
            Observable::MidSquare => mid().powi(2),
            Observable::CosMid(t) => (t * mid()).cos(),
            Observable::SquaredNorm => a * x.iter().map(|y| y * y).sum::<f64>(),
            Observable::ExpSquaredNorm => (-a * x.iter().map(|y| y * y).sum::<f64>()).exp(),
            Observable::Custom(_, f) => f(x, a),
        }
    }

    fn needs_midpoint(&self) -> bool {
        matches!(self, Observable::Mid | Observable::MidSquare | Observable::CosMid(_))
    }
}

fn check_observables(sites: usize, obs: &[Observable]) -> Result<()> {
    if sites % 2 == 1 && obs.iter().any(Observable::needs_midpoint) {
        return invalid(format!("midpoint observables need an even bond count, got {sites}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// BAOAB Langevin splitting, canonical ensemble
    Langevin,
    /// velocity Verlet, energy shell
    Microcanonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermostatConfig {
    pub friction: f64,
    pub temperature: f64,
    pub dt: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub record_every: usize,
    pub seed: u64,
    pub dynamics: Dynamics,
}

impl ThermostatConfig {
    pub fn new(friction: f64, temperature: f64, dt: f64, steps: usize, seed: u64) -> Result<Self> {
        if !(friction > 0.0 && friction.is_finite()) {
            return invalid(format!("friction must be positive, got {friction}"));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return invalid(format!("temperature must be positive, got {temperature}"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        if steps == 0 {
            return invalid("step count must be positive");
        }
        Ok(Self { friction, temperature, dt, steps, burn_in: steps / 10, record_every: 1, seed, dynamics: Dynamics::Langevin })
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn microcanonical(mut self) -> Self {
        self.dynamics = Dynamics::Microcanonical;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub series: Vec<f64>,
    pub time_average: Estimate,
}

#[derive(Debug, Clone)]
pub struct ThermostatRun {
    pub observables: Vec<ObservableSeries>,
    /// time average of `a p_i²/2` over interior sites
    pub kinetic_per_site: Estimate,
    /// largest `|H - H_0|/|H_0|` along the run (microcanonical diagnostics)
    pub max_relative_energy_drift: f64,
    pub final_state: LatticeString,
}

const DIVERGENCE_THRESHOLD: f64 = 1e6;
const TIME_AVERAGE_BATCHES: usize = 40;

fn batch_estimate(xs: &[f64]) -> Estimate {
    stats::batch_means(xs, TIME_AVERAGE_BATCHES.min(xs.len() / 2).max(2)).unwrap_or_else(|_| stats::iid_estimate(xs))
}

/// `-∂U/∂x_i` on interior sites, `U` the Gibbs exponent above.
fn lattice_force(x: &[f64], a: f64, v: &SitePotential, out: &mut [f64]) {
    let n = x.len() - 1;
    out[0] = 0.0;
    out[n] = 0.0;
    let zero = v.is_zero();
    for i in 1..n {
        let lap = (x[i - 1] - 2.0 * x[i] + x[i + 1]) / a;
        out[i] = lap - if zero { 0.0 } else { 0.5 * a * v.derivative(x[i]) };
    }
}

/// Thermostatted (or free) lattice dynamics with masses `a`, configuration
/// energy matching the Gibbs exponent, recording observables after burn-in.
pub fn thermostat_simulate(s: &LatticeString, cfg: &ThermostatConfig, observables: &[Observable]) -> Result<ThermostatRun> {
    let a = s.spacing();
    if cfg.dt * 2.0 / a >= 1.0 {
        return Err(LabError::Instability(format!(
            "dt·(2/a) = {} must stay below 1 for the stiffest lattice mode",
            cfg.dt * 2.0 / a
        )));
    }
    if cfg.burn_in >= cfg.steps {
        return invalid("burn-in must be shorter than the run");
    }
    check_observables(s.sites, observables)?;
    let n = s.sites;
    let mut x = s.x.clone();
    let mut p = s.p.clone();
    let mut f = vec![0.0; n + 1];
    lattice_force(&x, a, &s.potential, &mut f);
    let mut r = rng::seeded(cfg.seed);
    let decay = (-cfg.friction * cfg.dt).exp();
    let kick = ((1.0 - decay * decay) * cfg.temperature / a).sqrt();
    let half = 0.5 * cfg.dt;
    let energy = |x: &[f64], p: &[f64]| a * p.iter().map(|v| 0.5 * v * v).sum::<f64>() + lattice_action(x, a, &s.potential);
    let e0 = energy(&x, &p);
    let mut drift = 0.0f64;
    let capacity = (cfg.steps - cfg.burn_in) / cfg.record_every + 1;
    let mut series: Vec<Vec<f64>> = observables.iter().map(|_| Vec::with_capacity(capacity)).collect();
    let mut kinetic = Vec::with_capacity(capacity);
    for step in 0..cfg.steps {
        for i in 1..n {
            p[i] += half * f[i] / a;
            x[i] += half * p[i];
        }
        if cfg.dynamics == Dynamics::Langevin {
            for v in p[1..n].iter_mut() {
                let z: f64 = StandardNormal.sample(&mut r);
                *v = decay * *v + kick * z;
            }
        }
        let record = step >= cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.record_every);
        if record {
            // mid-step velocities: the full-step ones carry an O(dt²) bias
            kinetic.push(a * p[1..n].iter().map(|v| 0.5 * v * v).sum::<f64>() / (n - 1) as f64);
        }
        for i in 1..n {
            x[i] += half * p[i];
        }
        lattice_force(&x, a, &s.potential, &mut f);
        for i in 1..n {
            p[i] += half * f[i] / a;
        }
        if let Some(i) = x.iter().position(|v| !(v.abs() <= DIVERGENCE_THRESHOLD)) {
            return Err(LabError::Instability(format!("site {i} diverged at step {step} (dt = {})", cfg.dt)));
        }
        if cfg.dynamics == Dynamics::Microcanonical {
            let e = energy(&x, &p);
            drift = drift.max(((e - e0) / e0.abs().max(f64::MIN_POSITIVE)).abs());
        }
        if record {
            for (o, ser) in observables.iter().zip(series.iter_mut()) {
                ser.push(o.eval(&x, a));
            }
        }
    }
    let observables = observables
        .iter()
        .zip(series)
        .map(|(o, ser)| ObservableSeries { name: o.name(), time_average: batch_estimate(&ser), series: ser })
        .collect();
    let mut final_state = s.clone();
    final_state.x = x;
    final_state.p = p;
    Ok(ThermostatRun {
        observables,
        kinetic_per_site: batch_estimate(&kinetic),
        max_relative_energy_drift: drift,
        final_state,
    })
}

/// Interior precision of the Gaussian part `exp(-½xᵀQx)`:
/// `Q = (1/kT)(tridiag(-1, 2, -1)/a + a c I)`.
fn gaussian_precision(sites: usize, a: f64, temperature: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let m = sites - 1;
    let diag = vec![(2.0 / a + a * c) / temperature; m];
    let off = vec![-1.0 / (a * temperature); m.saturating_sub(1)];
    (diag, off)
}

/// Exact Gibbs covariance `⟨x_i x_j⟩` at an interior site pair, when `V` is quadratic.
pub fn lattice_gaussian_covariance(template: &LatticeString, temperature: f64, i: usize, j: usize) -> Result<f64> {
    let c = template
        .potential
        .quadratic
        .ok_or_else(|| LabError::InvalidArgument("exact covariance needs a quadratic potential".into()))?;
    let n = template.sites;
    if i == 0 || j == 0 || i >= n || j >= n {
        return Ok(0.0);
    }
    let (d, o) = gaussian_precision(n, template.spacing(), temperature, c);
    let chol = TridiagCholesky::new(&d, &o)?;
    let mut e = vec![0.0; n - 1];
    e[j - 1] = 1.0;
    Ok(chol.solve(&e)[i - 1])
}

/// `Z_V / Z_0 = sqrt(det Q_0 / det(Q_0 + (a c/kT) I))` for `V = c x²` on the lattice.
pub fn lattice_partition_ratio(sites: usize, half_length: f64, temperature: f64, c: f64) -> Result<f64> {
    let a = 2.0 * half_length / sites as f64;
    let (d0, o0) = gaussian_precision(sites, a, temperature, 0.0);
    let (d1, o1) = gaussian_precision(sites, a, temperature, c);
    let l0 = TridiagCholesky::new(&d0, &o0)?.log_det();
    let l1 = TridiagCholesky::new(&d1, &o1)?.log_det();
    Ok((0.5 * (l0 - l1)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// exact Gaussian draws when `V` is quadratic, otherwise MALA
    Auto,
    /// preconditioned Crank–Nicolson Langevin proposals with Metropolis correction
    Mala,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsSamplerConfig {
    /// draws (exact) or post-burn-in steps per chain (MALA)
    pub draws: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    pub sampler: Sampler,
}

impl GibbsSamplerConfig {
    pub fn new(draws: usize, seed: u64) -> Self {
        Self { draws, burn_in: draws / 5, chains: 4, seed, sampler: Sampler::Auto }
    }

    pub fn mala(mut self) -> Self {
        self.sampler = Sampler::Mala;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsAverage {
    pub estimates: Vec<Estimate>,
    pub names: Vec<String>,
    pub r_hat: Option<Vec<f64>>,
    pub acceptance: Option<f64>,
    pub exact_sampling: bool,
}

pub const R_HAT_LIMIT: f64 = 1.1;

/// Gibbs averages of `observables` on the template's lattice at temperature `kT`.
pub fn gibbs_average(
    template: &LatticeString,
    temperature: f64,
    observables: &[Observable],
    cfg: &GibbsSamplerConfig,
) -> Result<GibbsAverage> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return invalid(format!("temperature must be positive, got {temperature}"));
    }
    if cfg.draws < 2 {
        return invalid("need at least two draws");
    }
    check_observables(template.sites, observables)?;
    let names = observables.iter().map(Observable::name).collect();
    let exact = cfg.sampler == Sampler::Auto && template.potential.quadratic.is_some();
    if exact {
        let c = template.potential.quadratic.unwrap_or(0.0);
        let n = template.sites;
        let a = template.spacing();
        let (d, o) = gaussian_precision(n, a, temperature, c);
        let chol = TridiagCholesky::new(&d, &o)?;
        let mut r = rng::seeded(cfg.seed);
        let mut values: Vec<Vec<f64>> = observables.iter().map(|_| Vec::with_capacity(cfg.draws)).collect();
        let mut x = vec![0.0; n + 1];
        for _ in 0..cfg.draws {
            let z: Vec<f64> = (0..n - 1).map(|_| StandardNormal.sample(&mut r)).collect();
            x[1..n].copy_from_slice(&chol.solve_upper(&z));
            for (o, v) in observables.iter().zip(values.iter_mut()) {
                v.push(o.eval(&x, a));
            }
        }
        let estimates = values
            .iter()
            .map(|v| {
                let e = stats::iid_estimate(v);
                // constant observables are exact
                if e.std_error == 0.0 { Estimate::exact(e.value) } else { e }
            })
            .collect();
        return Ok(GibbsAverage { estimates, names, r_hat: None, acceptance: None, exact_sampling: true });
    }
    if cfg.chains < 2 {
        return invalid("MALA needs at least two chains for the R̂ diagnostic");
    }
    let mut per_chain: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.chains);
    let mut accepted = 0usize;
    for chain in 0..cfg.chains {
        let mut r = rng::stream(cfg.seed, chain as u64);
        let (vals, acc) = mala_chain(template, temperature, observables, cfg, &mut r)?;
        accepted += acc;
        per_chain.push(vals);
    }
    let mut estimates = Vec::with_capacity(observables.len());
    let mut r_hat = Vec::with_capacity(observables.len());
    for k in 0..observables.len() {
        let chains: Vec<Vec<f64>> = per_chain.iter().map(|c| c[k].clone()).collect();
        let constant = chains.iter().flatten().all(|v| *v == chains[0][0]);
        let rh = if constant { 1.0 } else { stats::gelman_rubin(&chains)? };
        if !(rh < R_HAT_LIMIT) {
            return Err(LabError::Convergence(format!(
                "R̂ = {rh:.4} for {} exceeds {R_HAT_LIMIT} across {} chains",
                observables[k].name(),
                cfg.chains
            )));
        }
        r_hat.push(rh);
        let chain_est: Vec<Estimate> = chains.iter().map(|c| batch_estimate(c)).collect();
        let m = chain_est.len() as f64;
        let value = chain_est.iter().map(|e| e.value).sum::<f64>() / m;
        let std_error = chain_est.iter().map(|e| e.std_error.powi(2)).sum::<f64>().sqrt() / m;
        estimates.push(if constant { Estimate::exact(value) } else { Estimate { value, std_error } });
    }
    let acceptance = accepted as f64 / (cfg.chains * cfg.draws) as f64;
    Ok(GibbsAverage { estimates, names, r_hat: Some(r_hat), acceptance: Some(acceptance), exact_sampling: false })
}

/// One preconditioned Crank–Nicolson Langevin chain: reference Gaussian `N(0, Q_0⁻¹)` (the `V ≡ 0`
/// law) and likelihood `Φ(x) = (a/2kT) Σ V(x_i)`.
fn mala_chain(
    template: &LatticeString,
    temperature: f64,
    observables: &[Observable],
    cfg: &GibbsSamplerConfig,
    r: &mut LabRng,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let n = template.sites;
    let m = n - 1;
    let a = template.spacing();
    let v = &template.potential;
    let (d, o) = gaussian_precision(n, a, temperature, 0.0);
    let chol = TridiagCholesky::new(&d, &o)?;
    let phi = |x: &[f64]| a / (2.0 * temperature) * x.iter().map(|y| v.value(*y)).sum::<f64>();
    let grad = |x: &[f64]| -> Vec<f64> { x.iter().map(|y| a / (2.0 * temperature) * v.derivative(*y)).collect() };
    let draw = |r: &mut LabRng| -> Vec<f64> {
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(r)).collect();
        chol.solve_upper(&z)
    };
    let quad_form = |u: &[f64]| {
        let qu = sym_tridiag_mul(&d, &o, u);
        u.iter().zip(&qu).map(|(p, q)| p * q).sum::<f64>()
    };
    let log_target = |u: &[f64], phi_u: f64| -phi_u - 0.5 * quad_form(u);
    // proposal y ~ N(s((2-δ)x - 2δ C DΦ(x)), 8δ s² C), s = 1/(2+δ)
    let log_proposal = |from: &[f64], cg_from: &[f64], to: &[f64], delta: f64| {
        let s = 1.0 / (2.0 + delta);
        let resid: Vec<f64> =
            (0..m).map(|i| to[i] - s * ((2.0 - delta) * from[i] - 2.0 * delta * cg_from[i])).collect();
        -quad_form(&resid) / (16.0 * delta * s * s)
    };
    let mut x = draw(r);
    let mut phi_x = phi(&x);
    let mut cg_x = chol.solve(&grad(&x));
    let mut delta = 0.5;
    let mut values: Vec<Vec<f64>> = observables.iter().map(|_| Vec::with_capacity(cfg.draws)).collect();
    let mut accepted = 0usize;
    let mut window_acc = 0usize;
    let mut full = vec![0.0; n + 1];
    for step in 0..cfg.burn_in + cfg.draws {
        let w = draw(r);
        let s = 1.0 / (2.0 + delta);
        let y: Vec<f64> = (0..m).map(|i| s * ((2.0 - delta) * x[i] - 2.0 * delta * cg_x[i] + (8.0 * delta).sqrt() * w[i])).collect();
        let phi_y = phi(&y);
        let cg_y = chol.solve(&grad(&y));
        let log_alpha = log_target(&y, phi_y) + log_proposal(&y, &cg_y, &x, delta)
            - log_target(&x, phi_x)
            - log_proposal(&x, &cg_x, &y, delta);
        let u: f64 = r.random();
        if phi_y.is_finite() && u.ln() < log_alpha {
            x = y;
            phi_x = phi_y;
            cg_x = cg_y;
            if step >= cfg.burn_in {
                accepted += 1;
            }
            window_acc += 1;
        }
        if step < cfg.burn_in && (step + 1) % 50 == 0 {
            // steer acceptance toward ~0.6 during burn-in only
            let rate = window_acc as f64 / 50.0;
            delta = (delta * (rate - 0.6).exp()).clamp(1e-4, 2.0);
            window_acc = 0;
        }
        if step >= cfg.burn_in {
            full[1..n].copy_from_slice(&x);
            for (o, vals) in observables.iter().zip(values.iter_mut()) {
                vals.push(o.eval(&full, a));
            }
        }
    }
    Ok((values, accepted))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub draws: usize,
    /// bond count of the coarsest level (even)
    pub resolution: usize,
    /// number of dyadic refinements; extrapolation needs at least 2
    pub levels: usize,
    pub seed: u64,
}

impl BridgeConfig {
    pub fn new(draws: usize, resolution: usize, levels: usize, seed: u64) -> Result<Self> {
        if draws < 2 {
            return invalid("need at least two bridge draws");
        }
        if resolution < 2 || resolution % 2 == 1 {
            return invalid(format!("resolution must be even and at least 2, got {resolution}"));
        }
        if levels == 0 {
            return invalid("need at least one resolution level");
        }
        Ok(Self { draws, resolution, levels, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeLevel {
    pub bonds: usize,
    pub estimate: Estimate,
    /// `E[w]`, the partition ratio `Z_V / Z_0`
    pub mean_weight: Estimate,
    pub effective_sample_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeExpectation {
    pub levels: Vec<BridgeLevel>,
    /// Richardson extrapolation (second order) of the two finest levels,
    /// or the finest level when only one was run
    pub extrapolated: Estimate,
}

pub const MIN_ESS_FRACTION: f64 = 0.01;

/// `E_bridge[F e^{-(1/2kT)∫V}] / E_bridge[e^{-(1/2kT)∫V}]` where the bridge is
/// Brownian motion with diffusion `kT` on `[-L, L]` pinned at both ends.
pub fn bridge_expectation(
    half_length: f64,
    temperature: f64,
    potential: &SitePotential,
    observable: &Observable,
    cfg: &BridgeConfig,
) -> Result<BridgeExpectation> {
    if !(half_length > 0.0 && half_length.is_finite()) {
        return invalid(format!("half-length must be positive, got {half_length}"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return invalid(format!("temperature must be positive, got {temperature}"));
    }
    let mut levels = Vec::with_capacity(cfg.levels);
    for level in 0..cfg.levels {
        let bonds = cfg.resolution << level;
        let mut r = rng::stream(cfg.seed, level as u64);
        levels.push(bridge_level(half_length, temperature, potential, observable, bonds, cfg.draws, &mut r)?);
    }
    let extrapolated = match levels.as_slice() {
        [.., coarse, fine] => {
            let (c, f) = (coarse.estimate, fine.estimate);
            Estimate {
                value: (4.0 * f.value - c.value) / 3.0,
                std_error: (16.0 * f.std_error.powi(2) + c.std_error.powi(2)).sqrt() / 3.0,
            }
        }
        [only] => only.estimate,
        [] => unreachable!("at least one level"),
    };
    Ok(BridgeExpectation { levels, extrapolated })
}

fn bridge_level(
    half_length: f64,
    temperature: f64,
    potential: &SitePotential,
    observable: &Observable,
    bonds: usize,
    draws: usize,
    r: &mut LabRng,
) -> Result<BridgeLevel> {
    let a = 2.0 * half_length / bonds as f64;
    let total = 2.0 * half_length;
    let step_sd = (temperature * a).sqrt();
    let mut w_path = vec![0.0; bonds + 1];
    let mut x = vec![0.0; bonds + 1];
    let mut log_w = Vec::with_capacity(draws);
    let mut f = Vec::with_capacity(draws);
    for _ in 0..draws {
        for i in 1..=bonds {
            let z: f64 = StandardNormal.sample(r);
            w_path[i] = w_path[i - 1] + step_sd * z;
        }
        let end = w_path[bonds];
        for i in 0..=bonds {
            x[i] = w_path[i] - (i as f64 * a / total) * end;
        }
        x[bonds] = 0.0;
        let integral = if potential.is_zero() {
            0.0
        } else {
            // trapezoid rule on the pinned path
            a * (x[1..bonds].iter().map(|y| potential.value(*y)).sum::<f64>() + potential.value(0.0))
        };
        log_w.push(-integral / (2.0 * temperature));
        f.push(observable.eval(&x, a));
    }
    let shift = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(LabError::Reweighting("all bridge weights vanished".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - shift).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let ess = sw * sw / sw2;
    if ess < MIN_ESS_FRACTION * draws as f64 {
        return Err(LabError::Reweighting(format!(
            "effective sample size {ess:.1} is below {:.0}% of {draws} draws at {bonds} bonds",
            MIN_ESS_FRACTION * 100.0
        )));
    }
    let value = w.iter().zip(&f).map(|(wi, fi)| wi * fi).sum::<f64>() / sw;
    let var = w.iter().zip(&f).map(|(wi, fi)| (wi * (fi - value)).powi(2)).sum::<f64>() / (sw * sw);
    let weights_abs: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
    Ok(BridgeLevel {
        bonds,
        estimate: Estimate { value, std_error: var.sqrt() },
        mean_weight: stats::iid_estimate(&weights_abs),
        effective_sample_size: ess,
    })
}
