//! Tridiagonal kernels and small dense helpers.
//!
//! Every lattice problem in the crate (Dirichlet chains, path slices,
//! finite-difference Hamiltonians) reduces to a symmetric tridiagonal matrix,
//! so these routines avoid dense O(n³) work on the hot paths.

use nalgebra::DMatrix;

use crate::error::{invalid, LabError, Result};

/// Solves a general tridiagonal system with the Thomas algorithm.
///
/// `sub[i]` couples row `i + 1` to column `i`; `sup[i]` couples row `i` to
/// column `i + 1`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return invalid("tridiagonal system dimensions do not match");
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(LabError::Conditioning("zero pivot in row 0".into()));
    }
    c[0] = if n > 1 { sup[0] / pivot } else { 0.0 };
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(LabError::Conditioning(format!("zero pivot in row {i}")));
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Cholesky factor `L` (lower bidiagonal) of a symmetric positive-definite
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
#[derive(Debug, Clone)]
pub struct TridiagCholesky {
    l_diag: Vec<f64>,
    l_sub: Vec<f64>,
}

impl TridiagCholesky {
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || off.len() + 1 != n {
            return invalid("tridiagonal Cholesky: dimension mismatch");
        }
        let mut l_diag = vec![0.0; n];
        let mut l_sub = vec![0.0; n - 1];
        let mut prev_sub = 0.0;
        for i in 0..n {
            let d = diag[i] - prev_sub * prev_sub;
            if !(d > 0.0) {
                return Err(LabError::Conditioning(format!(
                    "matrix is not positive definite (pivot {d:e} at row {i})"
                )));
            }
            l_diag[i] = d.sqrt();
            if i + 1 < n {
                l_sub[i] = off[i] / l_diag[i];
                prev_sub = l_sub[i];
            }
        }
        Ok(Self { l_diag, l_sub })
    }

    pub fn dim(&self) -> usize {
        self.l_diag.len()
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l_diag.iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = self.solve_lower(b);
        self.solve_upper(&y)
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let carry = if i > 0 { self.l_sub[i - 1] * y[i - 1] } else { 0.0 };
            y[i] = (b[i] - carry) / self.l_diag[i];
        }
        y
    }

    /// Solves `Lᵀ x = y`. With `y` standard normal, `x ~ Normal(0, A⁻¹)`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let carry = if i + 1 < n { self.l_sub[i] * x[i + 1] } else { 0.0 };
            x[i] = (y[i] - carry) / self.l_diag[i];
        }
        x
    }

    /// `ε ↦ L ε`; maps standard normals to `Normal(0, A)`.
    pub fn mul_lower(&self, e: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let carry = if i > 0 { self.l_sub[i - 1] * e[i - 1] } else { 0.0 };
                self.l_diag[i] * e[i] + carry
            })
            .collect()
    }
}

/// Symmetric tridiagonal matrix–vector product.
pub fn sym_tridiag_mul(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += off[i] * x[i + 1];
            }
            s
        })
        .collect()
}

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `k` eigenpairs of a symmetric tridiagonal matrix.
///
/// Eigenvalues come from Sturm-sequence bisection; eigenvectors from inverse
/// iteration with Gram–Schmidt against lower vectors. Vectors are returned
/// with unit Euclidean norm.
pub fn sym_tridiag_lowest_eigenpairs(
    diag: &[f64],
    off: &[f64],
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return invalid("tridiagonal eigenproblem: dimension mismatch");
    }
    if k == 0 || k > n {
        return invalid(format!("requested {k} eigenpairs of an {n}x{n} matrix"));
    }
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = hi.abs().max(lo.abs()).max(1.0);
    let mut values = Vec::with_capacity(k);
    for idx in 0..k {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if sturm_count(diag, off, m) > idx {
                b = m;
            } else {
                a = m;
            }
            if b - a <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        values.push(0.5 * (a + b));
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (idx, &lam) in values.iter().enumerate() {
        let shift = lam + 1e-10 * scale * (1.0 + idx as f64 * 1e-3);
        let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7 + idx * 13) % 11) as f64 * 0.01).collect();
        for _ in 0..4 {
            v = solve_tridiagonal(off, &shifted, off, &v)?;
            for w in &vectors {
                let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(w).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(LabError::Conditioning("inverse iteration collapsed".into()));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}

/// `ln |det A|` and sign via partial-pivot LU.
pub fn log_abs_det(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !a.is_square() {
        return invalid("determinant of a non-square matrix");
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut log = 0.0;
    let mut sign = lu.p().determinant::<f64>();
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return Err(LabError::Conditioning(format!("zero pivot {i} in LU factorization")));
        }
        log += d.abs().ln();
        sign *= d.signum();
    }
    Ok((log, sign))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let (d, o) = laplacian(6);
        let b: Vec<f64> = (0..6).map(|i| i as f64 - 2.0).collect();
        let x = solve_tridiagonal(&o, &d, &o, &b).unwrap();
        let back = sym_tridiag_mul(&d, &o, &x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_log_det_of_laplacian() {
        // det tridiag(-1, 2, -1) of size n is n + 1
        let (d, o) = laplacian(9);
        let c = TridiagCholesky::new(&d, &o).unwrap();
        assert!((c.log_det() - 10f64.ln()).abs() < 1e-12);
        let b = vec![1.0; 9];
        let x = c.solve(&b);
        let back = sym_tridiag_mul(&d, &o, &x);
        assert!(back.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(TridiagCholesky::new(&[1.0, 1.0], &[2.0]).is_err());
    }

    #[test]
    fn sturm_eigenpairs_match_closed_form() {
        let n = 50;
        let (d, o) = laplacian(n);
        let (vals, vecs) = sym_tridiag_lowest_eigenpairs(&d, &o, 4).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let theta = (k + 1) as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64);
            let exact = 4.0 * theta.sin().powi(2);
            assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        }
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lu_log_det_tracks_sign() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0]);
        let (log, sign) = log_abs_det(&a).unwrap();
        assert!((log - 6f64.ln()).abs() < 1e-14);
        assert_eq!(sign, -1.0);
    }
}
