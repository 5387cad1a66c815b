//! Per-mode field propagators and their exact lattice oracle.
//!
//! Each mode of the field propagator is a one-dimensional path integral
//! with action `½∫(ċ² + λ²c²)dt - ∫ j c dt` and fixed endpoints. The
//! closed form is available in a trigonometric variant (sin/cos, as the
//! kernel is usually printed) and a hyperbolic one (sinh/cosh, the
//! Euclidean kernel). The lattice oracle evaluates the time-sliced Gaussian
//! integral exactly and adjudicates both.
//!
//! Normalization: kernels carry the prefactor `√(λ/s(λT))`, whose `λ → 0`
//! limit is `√(1/T)`. The lattice oracle is normalized to the same free
//! value, so every comparison is convention-free.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::linalg::{sym_tridiag_mul, TridiagCholesky};
use crate::quad;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Trigonometric,
    Hyperbolic,
}

impl Variant {
    fn s(self, x: f64) -> f64 {
        match self {
            Variant::Trigonometric => x.sin(),
            Variant::Hyperbolic => x.sinh(),
        }
    }

    fn c(self, x: f64) -> f64 {
        match self {
            Variant::Trigonometric => x.cos(),
            Variant::Hyperbolic => x.cosh(),
        }
    }
}

/// One propagator mode.
///
/// `source` holds samples of `j` on a uniform grid over `[0, T]` including
/// both endpoints; an empty vector means `j ≡ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeChannel {
    pub frequency: f64,
    pub horizon: f64,
    pub start: f64,
    pub end: f64,
    pub source: Vec<f64>,
    pub variant: Variant,
}

impl ModeChannel {
    pub fn new(frequency: f64, horizon: f64, start: f64, end: f64, source: Vec<f64>, variant: Variant) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return invalid(format!("mode frequency must be positive, got {frequency}"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return invalid(format!("time horizon must be positive, got {horizon}"));
        }
        if source.len() == 1 {
            return invalid("a source needs at least two samples");
        }
        if variant == Variant::Trigonometric {
            let turns = frequency * horizon / std::f64::consts::PI;
            if (turns - turns.round()).abs() < 1e-12 && turns.round() >= 1.0 {
                return invalid(format!("λT = {} sits on a zero of sin", frequency * horizon));
            }
        }
        Ok(Self { frequency, horizon, start, end, source, variant })
    }

    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        Self::new(self.frequency, self.horizon, self.start, self.end, self.source.clone(), variant)
    }

    pub fn has_source(&self) -> bool {
        self.source.iter().any(|v| *v != 0.0)
    }

    /// Linear interpolation of the source at time `t`.
    pub fn source_at(&self, t: f64) -> f64 {
        source_at(&self.source, self.horizon, t)
    }

    /// The same channel with boundary values swapped and the source reversed
    /// in time.
    pub fn time_reversed(&self) -> Self {
        let mut source = self.source.clone();
        source.reverse();
        Self { start: self.end, end: self.start, source, ..self.clone() }
    }
}

fn source_at(source: &[f64], horizon: f64, t: f64) -> f64 {
    if source.is_empty() {
        return 0.0;
    }
    let n = source.len() - 1;
    let s = (t / horizon * n as f64).clamp(0.0, n as f64);
    let i = (s.floor() as usize).min(n - 1);
    let w = s - i as f64;
    (1.0 - w) * source[i] + w * source[i + 1]
}

/// `ln|K|` and the sign of `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub log_magnitude: f64,
    pub sign: f64,
}

impl KernelValue {
    pub fn value(&self) -> f64 {
        self.sign * self.log_magnitude.exp()
    }
}

/// Default number of Simpson panels for source integrals.
const SOURCE_PANELS: usize = 1024;

/// Closed-form mode kernel:
///
/// `√(λ/s) exp{-λ/(2s)[(φ0² + φT²)c - 2φ0φT] + (φT/s)∫ j s(λt) + (φ0/s)∫ j s(λ(T-t))
///  + (1/(λs))∫_0^T dt ∫_0^t ds j(t) j(s) s(λ(T-t)) s(λs)}`
///
/// with `s, c = sin, cos` or `sinh, cosh` at `λT`. Source integrals use
/// composite Simpson on `SOURCE_PANELS` panels.
pub fn mode_propagator_closed_form(ch: &ModeChannel) -> Result<KernelValue> {
    let lam = ch.frequency;
    let t_end = ch.horizon;
    let v = ch.variant;
    let s = v.s(lam * t_end);
    let c = v.c(lam * t_end);
    if !(s > 0.0) {
        return Err(LabError::Domain(format!(
            "s(λT) = {s} ≤ 0: the square-root prefactor is undefined at λT = {}",
            lam * t_end
        )));
    }
    let (phi0, phi_t) = (ch.start, ch.end);
    let mut exponent = -lam / (2.0 * s) * ((phi0 * phi0 + phi_t * phi_t) * c - 2.0 * phi0 * phi_t);
    if ch.has_source() {
        let n = SOURCE_PANELS;
        let h = t_end / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let j: Vec<f64> = times.iter().map(|&t| ch.source_at(t)).collect();
        let fwd: Vec<f64> = times.iter().zip(&j).map(|(&t, &jt)| jt * v.s(lam * t)).collect();
        let bwd: Vec<f64> = times.iter().zip(&j).map(|(&t, &jt)| jt * v.s(lam * (t_end - t))).collect();
        let i_fwd = quad::simpson(&fwd, h)?;
        let i_bwd = quad::simpson(&bwd, h)?;
        // ∫_0^T dt j(t) s(λ(T-t)) ∫_0^t ds j(s) s(λs)
        let inner = quad::cumulative_simpson(&fwd, h)?;
        let outer: Vec<f64> = bwd.iter().zip(&inner).map(|(b, i)| b * i).collect();
        let double = quad::simpson(&outer, h)?;
        exponent += phi_t / s * i_fwd + phi0 / s * i_bwd + double / (lam * s);
    }
    Ok(KernelValue { log_magnitude: 0.5 * (lam / s).ln() + exponent, sign: 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiModeKernel {
    pub log_magnitude: f64,
    pub sign: f64,
    /// `None` when there are too few modes to judge the tail.
    pub converged: Option<bool>,
}

/// Product of mode kernels as a sum of log-factors, with a tail check on the
/// decay of `|ln K_k|` (power-law exponent below −1 counts as converged).
pub fn multimode_kernel(channels: &[ModeChannel]) -> Result<MultiModeKernel> {
    if channels.is_empty() {
        return invalid("need at least one mode");
    }
    let mut logs = Vec::with_capacity(channels.len());
    let mut sign = 1.0;
    for ch in channels {
        let k = mode_propagator_closed_form(ch)?;
        logs.push(k.log_magnitude);
        sign *= k.sign;
    }
    let n = logs.len();
    let converged = if n < 8 {
        None
    } else {
        let tail: Vec<usize> = (n / 2..=n).collect();
        let mags: Vec<f64> = tail.iter().map(|&k| logs[k - 1].abs().max(f64::MIN_POSITIVE)).collect();
        let lx: Vec<f64> = tail.iter().map(|&k| (k as f64).ln()).collect();
        let ly: Vec<f64> = mags.iter().map(|m| m.ln()).collect();
        Some(stats::linear_fit(&lx, &ly).map(|f| f.slope < -1.0).unwrap_or(false))
    };
    Ok(MultiModeKernel { log_magnitude: logs.iter().sum(), sign, converged })
}

/// Classical path of `(-d²/dt² + λ²)σ = j`, `σ(0) = φ0`, `σ(T) = φT`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `‖(-D² + λ²)σ - j‖_∞` on interior nodes.
    pub residual: f64,
    /// Lattice action `½Σ(Δσ)²/Δt + ½λ²Σ' σ²Δt - Σ' jσΔt` (trapezoid Σ').
    pub action: f64,
}

/// Solves the boundary-value problem by second-order finite differences on
/// `points` nodes (`points ≥ 16`).
pub fn classical_field_bvp(
    frequency: f64,
    horizon: f64,
    source: &[f64],
    start: f64,
    end: f64,
    points: usize,
) -> Result<ClassicalTrajectory> {
    if points < 16 {
        return invalid(format!("grid needs at least 16 points, got {points}"));
    }
    if !(frequency > 0.0 && horizon > 0.0) {
        return invalid("frequency and horizon must be positive");
    }
    if source.len() == 1 {
        return invalid("a source needs at least two samples");
    }
    let slices = points - 1;
    let lat = LatticeProblem::assemble(frequency, horizon, start, end, source, slices)?;
    let chol = TridiagCholesky::new(&lat.diag, &lat.off)
        .map_err(|e| LabError::Conditioning(format!("BVP matrix: {e}")))?;
    let interior = chol.solve(&lat.rhs);
    let mut values = Vec::with_capacity(points);
    values.push(start);
    values.extend_from_slice(&interior);
    values.push(end);
    let dt = lat.dt;
    let times: Vec<f64> = (0..points).map(|i| i as f64 * dt).collect();
    // residual in the differential form (matrix rows divided by Δt)
    let applied = sym_tridiag_mul(&lat.diag, &lat.off, &interior);
    let residual = applied
        .iter()
        .zip(&lat.rhs)
        .map(|(a, b)| ((a - b) / dt).abs())
        .fold(0.0, f64::max);
    let action = lat.action(&interior);
    Ok(ClassicalTrajectory { times, values, residual, action })
}

/// `S(c) = ½ cᵀAc - bᵀc + k` for the time-sliced action on interior nodes.
struct LatticeProblem {
    dt: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
    rhs: Vec<f64>,
    constant: f64,
}

impl LatticeProblem {
    fn assemble(lam: f64, horizon: f64, start: f64, end: f64, source: &[f64], slices: usize) -> Result<Self> {
        if slices < 2 {
            return invalid(format!("need at least 2 slices, got {slices}"));
        }
        let dt = horizon / slices as f64;
        let n = slices - 1;
        let j: Vec<f64> = (0..=slices).map(|i| source_at(source, horizon, i as f64 * dt)).collect();
        let diag = vec![2.0 / dt + lam * lam * dt; n];
        let off = vec![-1.0 / dt; n.saturating_sub(1)];
        let mut rhs: Vec<f64> = (1..slices).map(|i| j[i] * dt).collect();
        rhs[0] += start / dt;
        rhs[n - 1] += end / dt;
        let constant = (start * start + end * end) * (0.5 / dt + 0.25 * lam * lam * dt)
            - 0.5 * dt * (j[0] * start + j[slices] * end);
        Ok(Self { dt, diag, off, rhs, constant })
    }

    fn action(&self, c: &[f64]) -> f64 {
        let ac = sym_tridiag_mul(&self.diag, &self.off, c);
        let quad: f64 = c.iter().zip(&ac).map(|(a, b)| a * b).sum();
        let lin: f64 = c.iter().zip(&self.rhs).map(|(a, b)| a * b).sum();
        0.5 * quad - lin + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeOracle {
    /// Free-normalized `ln K_M`.
    pub log_value: f64,
    /// `ln ∫ Π dc_i e^{-S(c)}` before normalization.
    pub raw_log_integral: f64,
    pub slices: usize,
    /// `(λΔt)² / 12`, the leading relative discretization error.
    pub estimated_relative_error: f64,
    pub resolution_warning: bool,
}

/// Relative error above which the oracle flags its resolution.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

/// Exact value of the `M`-slice Gaussian integral for `ch`, normalized so
/// that the free channel (`λ → 0`, `j = 0`, zero boundary) equals `√(1/T)`.
pub fn lattice_propagator_oracle(ch: &ModeChannel, slices: usize) -> Result<LatticeOracle> {
    let lat = LatticeProblem::assemble(ch.frequency, ch.horizon, ch.start, ch.end, &ch.source, slices)?;
    let chol = TridiagCholesky::new(&lat.diag, &lat.off)?;
    let n = slices - 1;
    let sol = chol.solve(&lat.rhs);
    let bab: f64 = sol.iter().zip(&lat.rhs).map(|(a, b)| a * b).sum();
    let log_det = chol.log_det();
    let raw_log_integral =
        0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det + 0.5 * bab - lat.constant;
    // free matrix tridiag(2, -1)/Δt has determinant M / Δt^{M-1}
    let free_log_det = (slices as f64).ln() - n as f64 * lat.dt.ln();
    let log_value = -0.5 * (log_det - free_log_det) + 0.5 * bab - lat.constant - 0.5 * ch.horizon.ln();
    let estimated_relative_error = (ch.frequency * lat.dt).powi(2) / 12.0;
    Ok(LatticeOracle {
        log_value,
        raw_log_integral,
        slices,
        estimated_relative_error,
        resolution_warning: estimated_relative_error > ORACLE_TOLERANCE,
    })
}

/// Finite-difference residual of `∂_T K - ½∂²_{φT}K + ½λ²φT²K`, relative to
/// `K`, for the hyperbolic source-free kernel, using step `h` in both `T`
/// and `φT`.
pub fn schrodinger_residual(frequency: f64, horizon: f64, start: f64, end: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h < horizon) {
        return invalid("stencil width must be positive and below the horizon");
    }
    let k = |t: f64, x: f64| -> Result<f64> {
        let ch = ModeChannel::new(frequency, t, start, x, Vec::new(), Variant::Hyperbolic)?;
        Ok(mode_propagator_closed_form(&ch)?.value())
    };
    let k0 = k(horizon, end)?;
    let dt = (k(horizon + h, end)? - k(horizon - h, end)?) / (2.0 * h);
    let dxx = (k(horizon, end + h)? - 2.0 * k0 + k(horizon, end - h)?) / (h * h);
    Ok((dt - 0.5 * dxx + 0.5 * frequency * frequency * end * end * k0).abs() / k0.abs())
}

/// Variance of the normalized hyperbolic kernel as a density in `φT`.
pub fn kernel_width_squared(frequency: f64, horizon: f64, start: f64) -> Result<f64> {
    let lam = frequency;
    // Gaussian in φT: exponent -λ coth(λT)/2 (φT - φ0/cosh λT)²
    let coth = 1.0 / (lam * horizon).tanh();
    let centre = start / (lam * horizon).cosh();
    let sd = (lam * coth).recip().sqrt();
    let density = |x: f64| -> f64 {
        ModeChannel::new(lam, horizon, start, x, Vec::new(), Variant::Hyperbolic)
            .and_then(|ch| mode_propagator_closed_form(&ch))
            .map(|k| k.value())
            .unwrap_or(0.0)
    };
    let (a, b) = (centre - 12.0 * sd, centre + 12.0 * sd);
    let z = quad::integrate(density, a, b, 0.0, 1e-12, 500)?.value;
    let m1 = quad::integrate(|x| x * density(x), a, b, 0.0, 1e-12, 500)?.value / z;
    let m2 = quad::integrate(|x| (x - m1).powi(2) * density(x), a, b, 0.0, 1e-12, 500)?.value / z;
    Ok(m2)
}
