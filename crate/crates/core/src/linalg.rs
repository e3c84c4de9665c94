//! Dense linear algebra helpers with flop accounting.
//!
//! Costs follow the usual conventions: an `m×k` by `k×n` product costs
//! `mn(2k−1)`, a Cholesky factorisation `n³/3 + n²/2 + n/6` and a full
//! Cholesky-based inverse `2n³/3 + 3n²/2 + 5n/6`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::complexity::counter;
use crate::error::{Error, Result};

/// Relative pivot threshold below which a covariance is treated as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

fn product_cost(m: usize, k: usize, n: usize) -> f64 {
    (m * n) as f64 * (2.0 * k as f64 - 1.0).max(0.0)
}

pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    counter::add(product_cost(a.nrows(), a.ncols(), b.ncols()));
    a * b
}

/// `a · bᵀ`
pub fn matmul_tr(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    counter::add(product_cost(a.nrows(), a.ncols(), b.nrows()));
    a * b.transpose()
}

/// `aᵀ · b`
pub fn tr_matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    counter::add(product_cost(a.ncols(), a.nrows(), b.ncols()));
    a.tr_mul(b)
}

pub fn matvec(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    counter::add(product_cost(a.nrows(), a.ncols(), 1));
    a * x
}

/// `aᵀ · x`
pub fn tr_matvec(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    counter::add(product_cost(a.ncols(), a.nrows(), 1));
    a.tr_mul(x)
}

/// `a · c · aᵀ`, symmetrised.
pub fn congruence(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let ac = matmul(a, c);
    symmetrize(&matmul_tr(&ac, a))
}

pub fn add(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    counter::add((a.nrows() * a.ncols()) as f64);
    a + b
}

pub fn sub(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    counter::add((a.nrows() * a.ncols()) as f64);
    a - b
}

pub fn add_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    counter::add(a.len() as f64);
    a + b
}

pub fn sub_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    counter::add(a.len() as f64);
    a - b
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute asymmetry relative to the largest entry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() / scale
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() + b.nrows();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Spd {
    chol: Cholesky<f64, Dyn>,
    /// Set when the factorised matrix is diagonal.
    diag: Option<DVector<f64>>,
}

impl Spd {
    /// Factorises `m`. Fails with [`Error::SingularCovariance`] when a
    /// pivot falls below `SINGULAR_RTOL · trace(m)` or the matrix is not
    /// positive definite.
    pub fn new(m: &DMatrix<f64>) -> Result<Spd> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
        }
        counter::add({
            let n = n as f64;
            n * n * n / 3.0 + n * n / 2.0 + n / 6.0
        });
        let trace = m.trace();
        if !trace.is_finite() || trace <= 0.0 {
            return Err(Error::SingularCovariance);
        }
        let chol = Cholesky::new(m.clone()).ok_or(Error::SingularCovariance)?;
        let floor = SINGULAR_RTOL * trace;
        let l = chol.l_dirty();
        if (0..n).any(|i| l[(i, i)] * l[(i, i)] <= floor || !l[(i, i)].is_finite()) {
            return Err(Error::SingularCovariance);
        }
        let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
        let diag = is_diag.then(|| m.diagonal());
        Ok(Spd { chol, diag })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim() as f64;
        counter::add(n * n * n / 3.0 + n * n);
        symmetrize(&self.chol.inverse())
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim() as f64;
        counter::add(2.0 * n * n);
        self.chol.solve(b)
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim() as f64;
        counter::add(2.0 * n * n * b.ncols() as f64);
        self.chol.solve(b)
    }

    /// `rᵀ M⁻¹ r`
    pub fn mahalanobis(&self, r: &DVector<f64>) -> f64 {
        let n = self.dim() as f64;
        if let Some(d) = &self.diag {
            counter::add(3.0 * n);
            return r.iter().zip(d.iter()).map(|(r, d)| r * r / d).sum();
        }
        counter::add(n * n + 2.0 * n);
        let l = self.chol.l_dirty();
        let mut z = r.clone();
        let dim = z.len();
        for i in 0..dim {
            let mut s = z[i];
            for j in 0..i {
                s -= l[(i, j)] * z[j];
            }
            z[i] = s / l[(i, i)];
        }
        z.norm_squared()
    }

    /// `log N(r; 0, M)`
    pub fn log_density(&self, r: &DVector<f64>) -> f64 {
        let n = self.dim() as f64;
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.log_det() + self.mahalanobis(r))
    }
}

/// Inverse of a symmetric positive definite matrix through its Cholesky
/// factor, counted with the full inversion cost.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let spd = Spd::new(m)?;
    Ok(spd.inverse())
}

/// A matrix `S` with `S Sᵀ = m` for a symmetric positive semidefinite `m`.
/// Uses Cholesky when possible and falls back to an eigendecomposition for
/// singular inputs.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        let l = c.l();
        if l.iter().all(|v| v.is_finite()) {
            return Ok(l);
        }
    }
    let eig = symmetrize(m).symmetric_eigen();
    let tol = 1e-10 * m.trace().abs().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l < -tol) {
        return Err(Error::InvalidCovariance);
    }
    let mut s = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let r = lambda.max(0.0).sqrt();
        s.column_mut(j).scale_mut(r);
    }
    Ok(s)
}

/// Checks symmetry and positive semidefiniteness with the library's
/// tolerances.
pub fn check_covariance(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    if m.iter().any(|v| !v.is_finite()) || asymmetry(m) > 1e-12 {
        return Err(Error::InvalidCovariance);
    }
    let trace = m.trace();
    let min = symmetrize(m).symmetric_eigenvalues().min();
    if min < -1e-10 * trace.abs() {
        return Err(Error::InvalidCovariance);
    }
    Ok(())
}
