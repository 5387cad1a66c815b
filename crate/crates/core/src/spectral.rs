//! Spectral models of elliptic operators and their Green functions.
//!
//! A [`SpectralModel`] is an ascending list of eigenvalues paired with an
//! L²-orthonormal eigenfunction evaluator. Interval, torus and box models use
//! closed-form sine/Fourier modes; the oscillator model is a finite-difference
//! eigensolve tabulated on a grid.

use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{invalid, LabError, Result};
use crate::linalg::sym_tridiag_lowest_eigenpairs;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    IntervalDirichlet,
    Torus,
    BoxDirichlet,
}

/// The cube `[-L, L]^ν` with boundary conditions fixed by `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    kind: DomainKind,
    half_width: f64,
    dimension: usize,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, half_width: f64, dimension: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return invalid(format!("half-width must be positive, got {half_width}"));
        }
        if dimension == 0 {
            return invalid("dimension must be at least 1");
        }
        if kind == DomainKind::IntervalDirichlet && dimension != 1 {
            return invalid("an interval domain is one-dimensional");
        }
        Ok(Self { kind, half_width, dimension })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dimension as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    DirichletSine,
    Fourier,
}

impl Family {
    /// 1-D eigenvalue of mode `m` (0-based) on `[-L, L]`.
    fn eigenvalue(self, m: usize, l: f64) -> f64 {
        match self {
            Family::DirichletSine => ((m + 1) as f64 * PI / (2.0 * l)).powi(2),
            Family::Fourier => (m.div_ceil(2) as f64 * PI / l).powi(2),
        }
    }

    fn eval(self, m: usize, l: f64, x: f64) -> f64 {
        if x.abs() > l {
            return 0.0;
        }
        match self {
            Family::DirichletSine => l.recip().sqrt() * ((m + 1) as f64 * PI * (x + l) / (2.0 * l)).sin(),
            Family::Fourier => {
                if m == 0 {
                    (2.0 * l).recip().sqrt()
                } else {
                    let freq = m.div_ceil(2) as f64 * PI / l;
                    let phase = freq * (x + l);
                    l.recip().sqrt() * if m % 2 == 1 { phase.cos() } else { phase.sin() }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Basis {
    Product { family: Family, half_width: f64, indices: Vec<Vec<usize>> },
    Tabulated { x0: f64, h: f64, vectors: Vec<Vec<f64>> },
}

/// Eigenvalues and orthonormal eigenfunctions of an elliptic operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    domain: DomainSpec,
    eigenvalues: Vec<f64>,
    basis: Basis,
}

impl SpectralModel {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension
    }

    /// `e_k(x)` for 0-based mode index `k`; zero outside the domain.
    pub fn eval(&self, k: usize, x: &[f64]) -> f64 {
        match &self.basis {
            Basis::Product { family, half_width, indices } => indices[k]
                .iter()
                .zip(x)
                .map(|(&m, &xi)| family.eval(m, *half_width, xi))
                .product(),
            Basis::Tabulated { x0, h, vectors } => {
                let v = &vectors[k];
                // Dirichlet zeros sit one step outside the stored nodes
                let s = (x[0] - x0) / h;
                if s <= -1.0 || s >= v.len() as f64 {
                    return 0.0;
                }
                let i = s.floor();
                let t = s - i;
                let at = |j: f64| -> f64 {
                    if j < 0.0 || j >= v.len() as f64 {
                        0.0
                    } else {
                        v[j as usize]
                    }
                };
                (1.0 - t) * at(i) + t * at(i + 1.0)
            }
        }
    }

    /// 1-D convenience wrapper for [`SpectralModel::eval`].
    pub fn eval1(&self, k: usize, x: f64) -> f64 {
        self.eval(k, &[x])
    }

    /// Gram matrix of the first `count` modes under the tensor-product
    /// trapezoid rule with `points` nodes per axis.
    pub fn gram_matrix(&self, count: usize, points: usize) -> Result<Vec<Vec<f64>>> {
        if count > self.len() || points < 2 {
            return invalid("gram_matrix: bad mode or point count");
        }
        let nu = self.dimension();
        let total = points
            .checked_pow(nu as u32)
            .filter(|t| *t <= 50_000_000)
            .ok_or_else(|| LabError::InvalidArgument(format!("{points}^{nu} quadrature nodes is too many")))?;
        let l = self.domain.half_width;
        let h = 2.0 * l / (points - 1) as f64;
        let mut gram = vec![vec![0.0; count]; count];
        let mut x = vec![0.0; nu];
        let mut values = vec![0.0; count];
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for xi in x.iter_mut() {
                let i = rem % points;
                rem /= points;
                *xi = -l + i as f64 * h;
                w *= if i == 0 || i == points - 1 { 0.5 * h } else { h };
            }
            for (k, v) in values.iter_mut().enumerate() {
                *v = self.eval(k, &x);
            }
            for i in 0..count {
                for j in 0..=i {
                    gram[i][j] += w * values[i] * values[j];
                }
            }
        }
        for i in 0..count {
            for j in 0..i {
                gram[j][i] = gram[i][j];
            }
        }
        Ok(gram)
    }
}

/// Lowest `count` Dirichlet modes on `[-L, L]`: `λ_k = (kπ / 2L)²`.
pub fn build_interval_dirichlet(half_width: f64, count: usize) -> Result<SpectralModel> {
    build_product(DomainSpec::new(DomainKind::IntervalDirichlet, half_width, 1)?, count)
}

/// Lowest `count` modes of `-Δ` on the cube, with the boundary conditions of
/// `domain.kind()`. Degenerate eigenvalues are ordered lexicographically by
/// multi-index.
pub fn build_product(domain: DomainSpec, count: usize) -> Result<SpectralModel> {
    if count == 0 {
        return invalid("mode count must be at least 1");
    }
    let family = match domain.kind {
        DomainKind::Torus => Family::Fourier,
        DomainKind::IntervalDirichlet | DomainKind::BoxDirichlet => Family::DirichletSine,
    };
    let l = domain.half_width;
    let nu = domain.dimension;
    let lambda = |idx: &[usize]| idx.iter().map(|&m| family.eigenvalue(m, l)).sum::<f64>();

    // best-first enumeration of multi-indices by eigenvalue
    #[derive(PartialEq)]
    struct Node(f64, Vec<usize>);
    impl Eq for Node {}
    impl PartialOrd for Node {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Node {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
        }
    }
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let start = vec![0usize; nu];
    heap.push(Node(lambda(&start), start.clone()));
    seen.insert(start);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut indices = Vec::with_capacity(count);
    while eigenvalues.len() < count {
        let Node(lam, idx) = heap.pop().expect("mode lattice is infinite");
        for d in 0..nu {
            let mut next = idx.clone();
            next[d] += 1;
            if seen.insert(next.clone()) {
                heap.push(Node(lambda(&next), next));
            }
        }
        eigenvalues.push(lam);
        indices.push(idx);
    }
    Ok(SpectralModel { domain, eigenvalues, basis: Basis::Product { family, half_width: l, indices } })
}

/// Grid used by [`build_oscillator_basis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for OscillatorGrid {
    fn default() -> Self {
        Self { half_width: 10.0, points: 2000 }
    }
}

/// Lowest `count` eigenpairs of `-d²/dx² + x² + V(x)` by a second-order
/// finite-difference stencil with Dirichlet walls at `±half_width`.
///
/// `v_sup` is the caller's bound on `|V|`; it enters the confinement check.
pub fn build_oscillator_basis<V: Fn(f64) -> f64>(
    count: usize,
    potential: V,
    v_sup: f64,
    grid: OscillatorGrid,
) -> Result<SpectralModel> {
    if count == 0 {
        return invalid("mode count must be at least 1");
    }
    if !(v_sup >= 0.0 && v_sup.is_finite()) {
        return invalid("potential bound must be finite and nonnegative");
    }
    let n = grid.points;
    let l = grid.half_width;
    let domain = DomainSpec::new(DomainKind::IntervalDirichlet, l, 1)?;
    let h = 2.0 * l / (n + 1) as f64;
    let x0 = -l + h;
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let x = x0 + i as f64 * h;
        let v = potential(x);
        if !v.is_finite() || v.abs() > v_sup * (1.0 + 1e-12) + 1e-300 {
            return invalid(format!("potential {v} at x = {x} exceeds the declared bound {v_sup}"));
        }
        diag.push(2.0 / (h * h) + x * x + v);
    }
    let off = vec![-1.0 / (h * h); n - 1];
    let (eigenvalues, vectors) = sym_tridiag_lowest_eigenpairs(&diag, &off, count)?;

    // classical turning point of the top mode must sit well inside the box,
    // and the wavelength there must span enough nodes
    let lam_top = eigenvalues[count - 1];
    let turning = (lam_top + v_sup).max(0.0).sqrt();
    if turning > 0.75 * l {
        return Err(LabError::Resolution(format!(
            "mode {count} reaches x = {turning:.3}, too close to the wall at {l}"
        )));
    }
    let k_max = (lam_top + v_sup).max(0.0).sqrt();
    if k_max * h > 0.5 {
        return Err(LabError::Resolution(format!(
            "grid spacing {h:.3e} under-resolves wavenumber {k_max:.3}"
        )));
    }
    let scale = h.sqrt().recip();
    let vectors = vectors
        .into_iter()
        .map(|mut v| {
            // fix sign: first node with appreciable amplitude is positive
            let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = v.iter().find(|x| x.abs() > 1e-3 * peak).copied().unwrap_or(1.0);
            let s = if first < 0.0 { -scale } else { scale };
            v.iter_mut().for_each(|x| *x *= s);
            v
        })
        .collect();
    Ok(SpectralModel { domain, eigenvalues, basis: Basis::Tabulated { x0, h, vectors } })
}

/// Fractional power, mass and infrared shift applied to a base spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    base: SpectralModel,
    power: f64,
    mass_sq: f64,
    ir_cutoff: f64,
}

impl OperatorSpec {
    pub fn new(base: SpectralModel, power: f64, mass_sq: f64, ir_cutoff: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return invalid(format!("power must be positive, got {power}"));
        }
        if !(mass_sq >= 0.0 && ir_cutoff >= 0.0) {
            return invalid("mass² and infrared cutoff must be nonnegative");
        }
        let spec = Self { base, power, mass_sq, ir_cutoff };
        if spec.eigenvalues().iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return invalid("transformed spectrum has a non-positive or non-finite eigenvalue");
        }
        Ok(spec)
    }

    pub fn base(&self) -> &SpectralModel {
        &self.base
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `λ_k^α + m² + ε_IR`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.base.eigenvalues.iter().map(|l| l.powf(self.power) + self.mass_sq + self.ir_cutoff).collect()
    }

    /// Partial trace `Σ_k 1/(λ_k^α + m² + ε_IR)` of the inverse operator.
    pub fn inverse_trace(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.recip()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Ultraviolet,
    Infrared,
}

/// Outcome of a momentum-space trace integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceValue {
    Finite { value: f64, abs_error: f64 },
    Divergent(Divergence),
}

impl TraceValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            TraceValue::Finite { value, .. } => Some(*value),
            TraceValue::Divergent(_) => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, TraceValue::Divergent(_))
    }
}

/// Surface area of the unit sphere `S^{ν-1}`: `2 π^{ν/2} / Γ(ν/2)`.
pub fn sphere_area(dimension: usize) -> f64 {
    let h = dimension as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// `∫ d^ν k (k^{2α} + m²)^{-j}` over all of momentum space (unit volume).
///
/// Convergence is decided from the integrand's power laws: ultraviolet
/// requires `2αj > ν`, infrared (only relevant when `m² = 0`) requires
/// `2αj < ν`. Finite values come from adaptive radial quadrature.
pub fn momentum_trace(dimension: usize, power: f64, mass_sq: f64, j: u32) -> Result<TraceValue> {
    if dimension == 0 {
        return invalid("dimension must be at least 1");
    }
    if !(power > 0.0 && power.is_finite()) {
        return invalid(format!("power must be positive, got {power}"));
    }
    if !(mass_sq >= 0.0 && mass_sq.is_finite()) {
        return invalid(format!("mass² must be nonnegative, got {mass_sq}"));
    }
    if j == 0 {
        return invalid("integer power j must be at least 1");
    }
    let nu = dimension as f64;
    let decay = 2.0 * power * j as f64;
    if decay <= nu {
        return Ok(TraceValue::Divergent(Divergence::Ultraviolet));
    }
    if mass_sq == 0.0 {
        return Ok(TraceValue::Divergent(Divergence::Infrared));
    }
    let integrand = |r: f64| r.powf(nu - 1.0) * (r.powf(2.0 * power) + mass_sq).powi(-(j as i32));
    // split at the crossover scale so both regimes are resolved
    let knee = mass_sq.powf(0.5 / power);
    let inner = quad::integrate(integrand, 0.0, knee, 1e-15, 1e-12, 2000)?;
    let outer = quad::integrate_to_infinity(|r| integrand(knee + r), 0.0, 1e-15, 1e-12)?;
    let area = sphere_area(dimension);
    Ok(TraceValue::Finite {
        value: area * (inner.value + outer.value),
        abs_error: area * (inner.abs_error + outer.abs_error),
    })
}

/// Least-squares fit of the normalization `C̄(ν)` in
/// `∫ d^ν k/(k^{2α}+m²) = C̄(ν) · m^{ν/α - 2} · (π/2α) · csc(νπ/2α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCalibration {
    pub constant: f64,
    pub max_relative_residual: f64,
    pub points: usize,
}

pub fn calibrate_trace_normalization(dimension: usize, params: &[(f64, f64)]) -> Result<TraceCalibration> {
    let nu = dimension as f64;
    let mut ratios = Vec::new();
    for &(power, mass_sq) in params {
        let Some(value) = momentum_trace(dimension, power, mass_sq, 1)?.value() else {
            continue;
        };
        let mass = mass_sq.sqrt();
        let shape = mass.powf(nu / power - 2.0) * PI / (2.0 * power) / (nu * PI / (2.0 * power)).sin();
        ratios.push((value, shape));
    }
    if ratios.is_empty() {
        return invalid("no convergent (α, m²) pairs to calibrate against");
    }
    // minimise Σ (value - C·shape)²
    let num: f64 = ratios.iter().map(|(v, s)| v * s).sum();
    let den: f64 = ratios.iter().map(|(_, s)| s * s).sum();
    let constant = num / den;
    let max_relative_residual =
        ratios.iter().map(|(v, s)| ((v - constant * s) / v).abs()).fold(0.0, f64::max);
    Ok(TraceCalibration { constant, max_relative_residual, points: ratios.len() })
}

/// Green function of the α-Laplacian: `r^{2(1-α)} Γ(1-α)/Γ(α)`.
pub fn riesz_green(power: f64, separation: f64) -> Result<f64> {
    if !(power > 0.0 && power.is_finite()) {
        return invalid(format!("power must be positive, got {power}"));
    }
    if power.fract() == 0.0 {
        return Err(LabError::GammaPole(power));
    }
    if separation == 0.0 {
        return Err(LabError::CoincidentPoints("Riesz kernel at zero separation".into()));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return invalid(format!("separation must be positive, got {separation}"));
    }
    Ok(separation.powf(2.0 * (1.0 - power)) * gamma(1.0 - power) / gamma(power))
}

/// `ln |Γ(1-α)/Γ(α)|` without overflow; used by determinant sweeps.
pub fn riesz_log_prefactor(power: f64) -> f64 {
    ln_gamma_abs(1.0 - power) - ln_gamma(power)
}

fn ln_gamma_abs(x: f64) -> f64 {
    if x > 0.0 {
        ln_gamma(x)
    } else {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x)
    }
}

/// Dirichlet Green function of `-d²/dσ² + m²` on `[-L, L]`:
/// `sinh(m(min+L)) sinh(m(L-max)) / (m sinh(2mL))`.
///
/// Evaluated in an overflow-free exponential form; tends to `e^{-m|x-y|}/2m`
/// as `L → ∞`.
pub fn dirichlet_green_volume_limit(mass: f64, half_width: f64, x: f64, y: f64) -> Result<f64> {
    if !(mass > 0.0 && mass.is_finite()) {
        return invalid(format!("mass must be positive, got {mass}"));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return invalid(format!("half-width must be positive, got {half_width}"));
    }
    if x.abs() >= half_width || y.abs() >= half_width {
        return Err(LabError::OutOfDomain(format!("({x}, {y}) not inside (-{half_width}, {half_width})")));
    }
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let a = mass * (lo + half_width);
    let b = mass * (half_width - hi);
    let c = 2.0 * mass * half_width;
    let num = (-(-2.0 * a).exp_m1()) * (-(-2.0 * b).exp_m1());
    let den = 2.0 * mass * (-(-2.0 * c).exp_m1());
    Ok(num / den * (-(mass * (hi - lo))).exp())
}
