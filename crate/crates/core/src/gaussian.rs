//! Gaussian messages in moment form `(η, C)` and canonical form `(W, w)`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Spd};

/// Multivariate normal in moment form.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Multivariate normal in precision form. A zero precision is a flat message.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalGaussian {
    prec: DMatrix<f64>,
    tmean: DVector<f64>,
}

impl GaussianBelief {
    /// Validated constructor: the covariance must be symmetric positive
    /// semidefinite.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), found: cov.nrows() });
        }
        linalg::check_covariance(&cov)?;
        Ok(Self { mean, cov: linalg::symmetrize(&cov) })
    }

    /// Skips the eigenvalue check. Used on hot paths where the covariance is
    /// PSD by construction; the matrix is still symmetrised.
    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        debug_assert_eq!(mean.len(), cov.nrows());
        Self { mean, cov: linalg::symmetrize(&cov) }
    }

    pub fn isotropic(mean: DVector<f64>, var: f64) -> Self {
        let n = mean.len();
        Self { mean, cov: DMatrix::identity(n, n) * var }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }
}

impl CanonicalGaussian {
    pub fn new(prec: DMatrix<f64>, tmean: DVector<f64>) -> Result<Self> {
        if prec.nrows() != tmean.len() {
            return Err(Error::DimensionMismatch { expected: tmean.len(), found: prec.nrows() });
        }
        linalg::check_covariance(&prec)?;
        Ok(Self { prec: linalg::symmetrize(&prec), tmean })
    }

    pub fn from_parts(prec: DMatrix<f64>, tmean: DVector<f64>) -> Self {
        Self { prec: linalg::symmetrize(&prec), tmean }
    }

    /// The uninformative message of the given dimension.
    pub fn flat(dim: usize) -> Self {
        Self { prec: DMatrix::zeros(dim, dim), tmean: DVector::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.tmean.len()
    }

    pub fn prec(&self) -> &DMatrix<f64> {
        &self.prec
    }

    pub fn tmean(&self) -> &DVector<f64> {
        &self.tmean
    }
}

pub fn to_canonical(g: &GaussianBelief) -> Result<CanonicalGaussian> {
    let spd = Spd::new(&g.cov)?;
    let prec = spd.inverse();
    let tmean = linalg::matvec(&prec, &g.mean);
    Ok(CanonicalGaussian { prec, tmean })
}

pub fn from_canonical(c: &CanonicalGaussian) -> Result<GaussianBelief> {
    let spd = Spd::new(&c.prec)?;
    let cov = spd.inverse();
    let mean = linalg::matvec(&cov, &c.tmean);
    Ok(GaussianBelief { mean, cov })
}

/// Unnormalised product of two densities.
pub fn gaussian_product(a: &CanonicalGaussian, b: &CanonicalGaussian) -> Result<CanonicalGaussian> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(CanonicalGaussian {
        prec: linalg::add(&a.prec, &b.prec),
        tmean: linalg::add_vec(&a.tmean, &b.tmean),
    })
}

/// Pushes `g` through `x ↦ A x + b + w`, `w ~ N(0, Q)`.
pub fn affine_predict(
    g: &GaussianBelief,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    q: &DMatrix<f64>,
) -> Result<GaussianBelief> {
    if a.ncols() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: a.ncols() });
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    if q.nrows() != a.nrows() || q.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: q.nrows() });
    }
    let mean = linalg::add_vec(&linalg::matvec(a, &g.mean), b);
    let cov = linalg::symmetrize(&linalg::add(&linalg::congruence(a, &g.cov), q));
    Ok(GaussianBelief { mean, cov })
}

pub fn block_marginal(g: &GaussianBelief, range: Range<usize>) -> Result<GaussianBelief> {
    if range.start > range.end || range.end > g.dim() {
        return Err(Error::IndexOutOfRange { start: range.start, end: range.end, dim: g.dim() });
    }
    let n = range.len();
    Ok(GaussianBelief {
        mean: g.mean.rows(range.start, n).into_owned(),
        cov: g.cov.view((range.start, range.start), (n, n)).into_owned(),
    })
}

pub fn log_density_at(g: &GaussianBelief, x: &DVector<f64>) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: x.len() });
    }
    let spd = Spd::new(&g.cov)?;
    Ok(spd.log_density(&(x - &g.mean)))
}

pub fn density_at(g: &GaussianBelief, x: &DVector<f64>) -> Result<f64> {
    log_density_at(g, x).map(f64::exp)
}

/// `log ∫ N(z; a.η, a.C) N(z; b.η, b.C) dz = log N(a.η; b.η, a.C + b.C)`
pub fn log_gaussian_correlation(a: &GaussianBelief, b: &GaussianBelief) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let spd = Spd::new(&linalg::add(&a.cov, &b.cov))?;
    Ok(spd.log_density(&(&a.mean - &b.mean)))
}

pub fn gaussian_correlation(a: &GaussianBelief, b: &GaussianBelief) -> Result<f64> {
    log_gaussian_correlation(a, b).map(f64::exp)
}

/// One term of a point-mass × Gaussian mixture. The full vector is
/// `[gauss; point]`; with no Gaussian part the component is a point mass.
#[derive(Clone, Debug)]
pub struct MixtureComponent {
    pub weight: f64,
    pub point: DVector<f64>,
    pub gauss: Option<GaussianBelief>,
}

/// Single Gaussian with the exact mean and covariance of the mixture.
///
/// All components must agree on whether a Gaussian part is present and on
/// its dimension.
pub fn moment_match_mixture(components: &[MixtureComponent]) -> Result<GaussianBelief> {
    let first = components.first().ok_or(Error::EmptyMixture)?;
    let dp = first.point.len();
    let dg = first.gauss.as_ref().map_or(0, GaussianBelief::dim);
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if !(total > 0.0) || components.iter().any(|c| c.weight < 0.0) {
        return Err(Error::EmptyMixture);
    }
    let d = dg + dp;
    let mut mean = DVector::zeros(d);
    for c in components {
        if c.point.len() != dp {
            return Err(Error::DimensionMismatch { expected: dp, found: c.point.len() });
        }
        let cg = c.gauss.as_ref().map_or(0, GaussianBelief::dim);
        if cg != dg {
            return Err(Error::DimensionMismatch { expected: dg, found: cg });
        }
        let w = c.weight / total;
        if let Some(g) = &c.gauss {
            mean.rows_mut(0, dg).axpy(w, &g.mean, 1.0);
        }
        mean.rows_mut(dg, dp).axpy(w, &c.point, 1.0);
    }
    let mut cov = DMatrix::zeros(d, d);
    let mut full = DVector::zeros(d);
    for c in components {
        let w = c.weight / total;
        if let Some(g) = &c.gauss {
            full.rows_mut(0, dg).copy_from(&g.mean);
            let mut block = cov.view_mut((0, 0), (dg, dg));
            block += &g.cov * w;
        }
        full.rows_mut(dg, dp).copy_from(&c.point);
        let dev = &full - &mean;
        cov.ger(w, &dev, &dev, 1.0);
    }
    Ok(GaussianBelief { mean, cov: linalg::symmetrize(&cov) })
}
