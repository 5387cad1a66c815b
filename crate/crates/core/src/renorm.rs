//! Probes of the analytic-regularization scheme for `(-Δ)^α` near `α → 1`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::linalg::log_abs_det;
use crate::rng;
use crate::spectral::riesz_green;
use crate::stats::{self, Estimate, LinearFit};

/// Coincident-point separation used on the Green-matrix diagonal.
pub const DEFAULT_REGULATOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulatorConfig {
    pub power: f64,
    pub regulator: f64,
    pub coupling: f64,
    pub interaction_sup: f64,
}

impl RegulatorConfig {
    pub fn new(power: f64, regulator: f64, coupling: f64, interaction_sup: f64) -> Result<Self> {
        if !(power > 0.0) || power == 1.0 {
            return invalid(format!("power must be positive and different from 1, got {power}"));
        }
        if !(regulator > 0.0) {
            return invalid(format!("regulator must be positive, got {regulator}"));
        }
        if !(coupling >= 0.0 && interaction_sup >= 0.0) {
            return invalid("coupling and interaction bound must be nonnegative");
        }
        Ok(Self { power, regulator, coupling, interaction_sup })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BareCoupling {
    Finite(f64),
    /// `α ≥ 1`: the regulator has been removed and the bare coupling blows up.
    Divergent,
}

/// `g_bare = g_ren / (1 - α)^{1/2}`.
pub fn renormalized_coupling(g_ren: f64, power: f64) -> Result<BareCoupling> {
    if !(g_ren >= 0.0 && g_ren.is_finite()) {
        return invalid(format!("renormalized coupling must be nonnegative, got {g_ren}"));
    }
    if !(power >= 0.0) {
        return invalid(format!("power must be nonnegative, got {power}"));
    }
    if power >= 1.0 {
        return Ok(BareCoupling::Divergent);
    }
    Ok(BareCoupling::Finite(g_ren / (1.0 - power).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenDeterminant {
    /// `|det G|^{-1/2}`
    pub value: f64,
    pub log_value: f64,
    pub det_sign: f64,
    /// smallest / largest LU pivot magnitude
    pub pivot_ratio: f64,
}

/// Assembles `G_ij = riesz_green(α, |x_i - x_j|)` with `riesz_green(α, δ)`
/// on the diagonal and returns `|det G|^{-1/2}`.
pub fn green_matrix_det(points: &[[f64; 2]], power: f64, regulator: f64) -> Result<GreenDeterminant> {
    let n = points.len();
    if n == 0 {
        return invalid("need at least one point");
    }
    if power == 1.0 {
        return invalid("power 1 is the unregularized limit");
    }
    if !(regulator > 0.0) {
        return invalid(format!("regulator must be positive, got {regulator}"));
    }
    let diag = riesz_green(power, regulator)?;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = diag;
        for j in 0..i {
            let r = (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
            if r == 0.0 {
                return Err(LabError::CoincidentPoints(format!("points {j} and {i} coincide")));
            }
            let v = riesz_green(power, r)?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let (log_det, det_sign) = log_abs_det(&g)?;
    let lu = g.clone().lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let pivot_ratio = pivots.iter().cloned().fold(f64::INFINITY, f64::min)
        / pivots.iter().cloned().fold(0.0, f64::max);
    if pivot_ratio < 1e3 * f64::EPSILON {
        return Err(LabError::Conditioning(format!(
            "Green matrix is singular at working precision (pivot ratio {pivot_ratio:e}, ln|det| = {log_det})"
        )));
    }
    let log_value = -0.5 * log_det;
    Ok(GreenDeterminant { value: log_value.exp(), log_value, det_sign, pivot_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub power: f64,
    pub value: f64,
    pub log_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSweep {
    pub rows: Vec<SweepRow>,
    /// fitted `p` in `|det|^{-1/2} ∝ |1 - α|^p`
    pub fit: LinearFit,
    /// the `N/2` asymptotics claimed for the same quantity
    pub claimed_exponent: f64,
}

/// Sweeps `α = 1 ± offset` and fits the power of `|1 - α|`.
/// Offsets `|1 - α|` inside the asymptotic regime; at `|1 - α| ≳ 10⁻²` the
/// two sides of `α = 1` separate and the log-log fit loses linearity.
pub const DEFAULT_SWEEP_OFFSETS: [f64; 5] = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3];

pub fn determinant_exponent_sweep(points: &[[f64; 2]], regulator: f64, offsets: &[f64]) -> Result<ExponentSweep> {
    if offsets.is_empty() || offsets.iter().any(|o| !(*o > 0.0 && *o < 1.0)) {
        return invalid("offsets must lie in (0, 1)");
    }
    let mut rows = Vec::new();
    for &o in offsets {
        for power in [1.0 - o, 1.0 + o] {
            let d = green_matrix_det(points, power, regulator)?;
            rows.push(SweepRow { power, value: d.value, log_value: d.log_value });
        }
    }
    let x: Vec<f64> = rows.iter().map(|r| (1.0 - r.power).abs().ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.log_value).collect();
    let fit = stats::linear_fit(&x, &y)?;
    Ok(ExponentSweep { rows, fit, claimed_exponent: points.len() as f64 / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBound {
    /// `partial_sums[n]` includes terms `0..=n`.
    pub partial_sums: Vec<f64>,
    pub bound: f64,
    pub within_bound: bool,
    pub monotone: bool,
}

/// Partial sums of `Σ_n x^n / (n! √n)` (with the `n = 0` term equal to 1)
/// for `x = g_ren · V_sup`, checked against `e^x`.
pub fn series_bound_check(g_ren: f64, v_sup: f64, terms: usize) -> Result<SeriesBound> {
    if terms == 0 {
        return invalid("need at least one term");
    }
    if !(g_ren >= 0.0 && v_sup >= 0.0) {
        return invalid("coupling and bound must be nonnegative");
    }
    let x = g_ren * v_sup;
    let bound = x.exp();
    let mut partial_sums = Vec::with_capacity(terms + 1);
    let mut power_over_fact = 1.0;
    let mut sum = 1.0;
    partial_sums.push(sum);
    for n in 1..=terms {
        power_over_fact *= x / n as f64;
        sum += power_over_fact / (n as f64).sqrt();
        partial_sums.push(sum);
    }
    let within_bound = partial_sums.iter().all(|s| *s <= bound * (1.0 + 4.0 * f64::EPSILON));
    let monotone = partial_sums.windows(2).all(|w| w[1] >= w[0]);
    Ok(SeriesBound { partial_sums, bound, within_bound, monotone })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FubiniCheck {
    /// `exp(½ ⟨w, G w⟩)`
    pub analytic: f64,
    pub monte_carlo: Estimate,
    pub relative_discrepancy: f64,
    /// sign of the quartic exponent produced by the Gaussian integral
    pub quartic_sign: i8,
    /// sign displayed in the effective-action formula being checked
    pub displayed_sign: i8,
}

impl FubiniCheck {
    pub fn sign_matches(&self) -> bool {
        self.quartic_sign == self.displayed_sign
    }
}

/// Monte Carlo check of `E_v[exp(-⟨v, w⟩)] = exp(½⟨w, G w⟩)` for
/// `v ~ Normal(0, G)`, `n ≤ 6`.
pub fn fubini_quartic_check(kernel: &DMatrix<f64>, w: &[f64], draws: usize, seed: u64) -> Result<FubiniCheck> {
    let n = kernel.nrows();
    if n == 0 || n > 6 || !kernel.is_square() {
        return invalid(format!("kernel must be square with dimension 1..=6, got {}x{}", n, kernel.ncols()));
    }
    if w.len() != n {
        return invalid("weight vector length does not match the kernel");
    }
    if w.iter().any(|x| !(*x >= 0.0)) {
        return invalid("weights play the role of |φ|² and must be nonnegative");
    }
    if draws < 2 {
        return invalid("need at least two draws");
    }
    if (kernel - kernel.transpose()).abs().max() > 1e-12 * kernel.abs().max() {
        return invalid("kernel is not symmetric");
    }
    let chol = kernel
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::InvalidArgument("kernel is not positive definite".into()))?;
    let l = chol.l();
    let wv = DVector::from_column_slice(w);
    let quad = wv.dot(&(kernel * &wv));
    let analytic = (0.5 * quad).exp();
    // lᵀw lets each draw cost one dot product: ⟨Lz, w⟩ = ⟨z, Lᵀw⟩
    let lt_w = l.transpose() * &wv;
    let mut r = rng::seeded(seed);
    let mut z = vec![0.0; n];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        z.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut r));
        let dot: f64 = z.iter().zip(lt_w.iter()).map(|(a, b)| a * b).sum();
        let e = (-dot).exp();
        sum += e;
        sum_sq += e * e;
    }
    let m = draws as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean) * m / (m - 1.0);
    let monte_carlo = Estimate { value: mean, std_error: (var.max(0.0) / m).sqrt() };
    Ok(FubiniCheck {
        analytic,
        monte_carlo,
        relative_discrepancy: (mean - analytic).abs() / analytic,
        quartic_sign: if quad > 0.0 { 1 } else { 0 },
        displayed_sign: -1,
    })
}

/// A reproducible, moderately conditioned SPD kernel `A Aᵀ / n + I / 2`
/// with entries of `A` uniform in `[-1/2, 1/2]`.
pub fn random_spd_kernel(n: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut r = rng::seeded(seed);
    let a = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5
}
