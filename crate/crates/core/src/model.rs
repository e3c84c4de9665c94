//! State-space model descriptions.
//!
//! Every state vector is laid out as `[x^L; x^N]`: the conditionally linear
//! block first, the nonlinear block second.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg;

/// Time-indexed vector callback.
pub type VecFn = Arc<dyn Fn(usize, &DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Time-indexed matrix callback.
pub type MatFn = Arc<dyn Fn(usize, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// `x_{k+1} = f_k(x_k) + w_k`, `y_k = h_k(x_k) + e_k`.
#[derive(Clone)]
pub struct GeneralSsm {
    state_dim: usize,
    meas_dim: usize,
    f: VecFn,
    h: VecFn,
    jac_f: Option<MatFn>,
    jac_h: Option<MatFn>,
    cov_w: DMatrix<f64>,
    cov_e: DMatrix<f64>,
    sqrt_w: DMatrix<f64>,
    sqrt_e: DMatrix<f64>,
}

impl fmt::Debug for GeneralSsm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralSsm")
            .field("state_dim", &self.state_dim)
            .field("meas_dim", &self.meas_dim)
            .field("analytic_jacobians", &(self.jac_f.is_some(), self.jac_h.is_some()))
            .finish()
    }
}

impl GeneralSsm {
    pub fn new(f: VecFn, h: VecFn, cov_w: DMatrix<f64>, cov_e: DMatrix<f64>) -> Result<Self> {
        linalg::check_covariance(&cov_w)?;
        linalg::check_covariance(&cov_e)?;
        let sqrt_w = linalg::psd_sqrt(&cov_w)?;
        let sqrt_e = linalg::psd_sqrt(&cov_e)?;
        Ok(Self {
            state_dim: cov_w.nrows(),
            meas_dim: cov_e.nrows(),
            f,
            h,
            jac_f: None,
            jac_h: None,
            cov_w,
            cov_e,
            sqrt_w,
            sqrt_e,
        })
    }

    /// Supplies analytic Jacobians `∂f/∂x` (D×D) and `∂h/∂x` (P×D).
    pub fn with_jacobians(mut self, jac_f: MatFn, jac_h: MatFn) -> Self {
        self.jac_f = Some(jac_f);
        self.jac_h = Some(jac_h);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn meas_dim(&self) -> usize {
        self.meas_dim
    }

    pub fn cov_w(&self) -> &DMatrix<f64> {
        &self.cov_w
    }

    pub fn cov_e(&self) -> &DMatrix<f64> {
        &self.cov_e
    }

    pub fn transition(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(k, x)
    }

    pub fn measurement(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        (self.h)(k, x)
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.jac_f.is_some() && self.jac_h.is_some()
    }

    pub fn transition_jacobian(&self, k: usize, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_f {
            Some(j) => j(k, x),
            None => finite_difference_jacobian(|x| (self.f)(k, x), x),
        }
    }

    /// `∂h/∂x`, a P×D matrix.
    pub fn measurement_jacobian(&self, k: usize, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_h {
            Some(j) => j(k, x),
            None => finite_difference_jacobian(|x| (self.h)(k, x), x),
        }
    }

    pub fn sample_transition<R: Rng + ?Sized>(&self, k: usize, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        self.transition(k, x) + &self.sqrt_w * standard_normal(self.state_dim, rng)
    }

    pub fn sample_measurement<R: Rng + ?Sized>(&self, k: usize, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        self.measurement(k, x) + &self.sqrt_e * standard_normal(self.meas_dim, rng)
    }
}

pub fn standard_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draws from `N(mean, S Sᵀ)` given a square root `S`.
pub fn sample_gaussian<R: Rng + ?Sized>(mean: &DVector<f64>, sqrt: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    mean + sqrt * standard_normal(sqrt.ncols(), rng)
}

/// Central differences with step `1e-6·(1+|x_i|)`.
pub fn finite_difference_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        jac.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Affine surrogates `f(x) ≈ F x + u` and `h(x) ≈ Hᵀ x + v`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedModel {
    pub f: DMatrix<f64>,
    pub u: DVector<f64>,
    /// D×P, so that `Hᵀ` multiplies the state.
    pub h: DMatrix<f64>,
    pub v: DVector<f64>,
}

/// Linearises the transition around `x_fe` and the measurement around `x_fp`.
pub fn linearize(m: &GeneralSsm, x_fe: &DVector<f64>, x_fp: &DVector<f64>, k: usize) -> LinearizedModel {
    let f = m.transition_jacobian(k, x_fe);
    let u = m.transition(k, x_fe) - &f * x_fe;
    let ht = m.measurement_jacobian(k, x_fp);
    let v = m.measurement(k, x_fp) - &ht * x_fp;
    LinearizedModel { f, u, h: ht.transpose(), v }
}

/// Conditionally linear Gaussian model:
///
/// ```text
/// x^L_{k+1} = A^L(x^N) x^L + f^L(x^N) + w^L
/// x^N_{k+1} = A^N(x^N) x^L + f^N(x^N) + w^N
/// y_k       = B(x^N) x^L + g(x^N) + e
/// ```
///
/// All callbacks receive `(k, x^N)`.
#[derive(Clone)]
pub struct ClgModel {
    pub dim_l: usize,
    pub dim_n: usize,
    pub meas_dim: usize,
    pub a_n: MatFn,
    pub f_n: VecFn,
    pub a_l: MatFn,
    pub f_l: VecFn,
    pub g: VecFn,
    pub b: MatFn,
    pub cov_w_l: DMatrix<f64>,
    pub cov_w_n: DMatrix<f64>,
    pub cov_e: DMatrix<f64>,
}

impl fmt::Debug for ClgModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClgModel")
            .field("dim_l", &self.dim_l)
            .field("dim_n", &self.dim_n)
            .field("meas_dim", &self.meas_dim)
            .finish()
    }
}

impl ClgModel {
    pub fn dim(&self) -> usize {
        self.dim_l + self.dim_n
    }

    pub fn validate(&self) -> Result<()> {
        let check = |m: &DMatrix<f64>, n: usize| -> Result<()> {
            if m.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
            }
            linalg::check_covariance(m)
        };
        check(&self.cov_w_l, self.dim_l)?;
        check(&self.cov_w_n, self.dim_n)?;
        check(&self.cov_e, self.meas_dim)
    }

    pub fn linear_part<'a>(&self, x: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        x.rows(0, self.dim_l)
    }

    pub fn nonlinear_part(&self, x: &DVector<f64>) -> DVector<f64> {
        x.rows(self.dim_l, self.dim_n).into_owned()
    }

    /// Noise-free transition composed from the CLG pieces.
    pub fn transition(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        let xl = x.rows(0, self.dim_l).into_owned();
        let xn = self.nonlinear_part(x);
        let next_l = (self.a_l)(k, &xn) * &xl + (self.f_l)(k, &xn);
        let next_n = (self.a_n)(k, &xn) * &xl + (self.f_n)(k, &xn);
        stack(&next_l, &next_n)
    }

    /// Noise-free measurement composed from the CLG pieces.
    pub fn measurement(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        let xl = x.rows(0, self.dim_l).into_owned();
        let xn = self.nonlinear_part(x);
        (self.b)(k, &xn) * xl + (self.g)(k, &xn)
    }

    /// Block-diagonal process noise covariance.
    pub fn cov_w(&self) -> DMatrix<f64> {
        linalg::block_diag(&self.cov_w_l, &self.cov_w_n)
    }

    /// General form with finite-difference Jacobians.
    pub fn to_general(&self) -> Result<GeneralSsm> {
        let a = self.clone();
        let b = self.clone();
        GeneralSsm::new(
            Arc::new(move |k, x| a.transition(k, x)),
            Arc::new(move |k, x| b.measurement(k, x)),
            self.cov_w(),
            self.cov_e.clone(),
        )
    }
}

pub fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// A model available in both representations.
#[derive(Clone, Debug)]
pub struct ClgSystem {
    pub general: GeneralSsm,
    pub clg: ClgModel,
}

impl ClgSystem {
    pub fn new(general: GeneralSsm, clg: ClgModel) -> Result<Self> {
        clg.validate()?;
        if general.state_dim() != clg.dim() {
            return Err(Error::DimensionMismatch { expected: clg.dim(), found: general.state_dim() });
        }
        if general.meas_dim() != clg.meas_dim {
            return Err(Error::DimensionMismatch { expected: clg.meas_dim, found: general.meas_dim() });
        }
        Ok(Self { general, clg })
    }

    /// Builds the general form from the CLG pieces.
    pub fn from_clg(clg: ClgModel) -> Result<Self> {
        let general = clg.to_general()?;
        Self::new(general, clg)
    }
}

/// Ground truth of one simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }
}

/// Draws `x_1` from `prior` and rolls the model forward for `t` steps.
pub fn simulate<R: Rng + ?Sized>(m: &GeneralSsm, x1_prior: &GaussianBelief, t: usize, rng: &mut R) -> Result<Trajectory> {
    if x1_prior.dim() != m.state_dim() {
        return Err(Error::DimensionMismatch { expected: m.state_dim(), found: x1_prior.dim() });
    }
    let mut states = Vec::with_capacity(t);
    let mut measurements = Vec::with_capacity(t);
    if t == 0 {
        return Ok(Trajectory { states, measurements });
    }
    let mut x = sample_gaussian(x1_prior.mean(), &linalg::psd_sqrt(x1_prior.cov())?, rng);
    for k in 0..t {
        if k > 0 {
            x = m.sample_transition(k - 1, &x, rng);
        }
        measurements.push(m.sample_measurement(k, &x, rng));
        states.push(x.clone());
    }
    Ok(Trajectory { states, measurements })
}

/// Outcome of comparing the CLG and general representations.
#[derive(Clone, Debug, PartialEq)]
pub struct ClgReport {
    pub samples: usize,
    pub max_transition_error: f64,
    pub max_measurement_error: f64,
}

impl ClgReport {
    pub const TOLERANCE: f64 = 1e-8;

    pub fn max_error(&self) -> f64 {
        self.max_transition_error.max(self.max_measurement_error)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= Self::TOLERANCE
    }
}

/// Evaluates both representations at states drawn uniformly from
/// `[-10, 10]^D` and reports the largest absolute discrepancy.
pub fn clg_check<R: Rng + ?Sized>(m: &ClgModel, g: &GeneralSsm, samples: usize, rng: &mut R) -> ClgReport {
    let mut report = ClgReport { samples, max_transition_error: 0.0, max_measurement_error: 0.0 };
    for s in 0..samples {
        let x = DVector::from_fn(m.dim(), |_, _| rng.random_range(-10.0..10.0));
        let dt = (m.transition(s, &x) - g.transition(s, &x)).amax();
        let dm = (m.measurement(s, &x) - g.measurement(s, &x)).amax();
        report.max_transition_error = report.max_transition_error.max(dt);
        report.max_measurement_error = report.max_measurement_error.max(dm);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn identity_model(d: usize) -> GeneralSsm {
        GeneralSsm::new(
            Arc::new(|_, x| x.clone()),
            Arc::new(|_, x| x.clone()),
            DMatrix::zeros(d, d),
            DMatrix::zeros(d, d),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_identity_is_constant() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let prior = GaussianBelief::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::identity(2, 2)).unwrap();
        let tr = simulate(&identity_model(2), &prior, 20, &mut rng).unwrap();
        assert_eq!(tr.horizon(), 20);
        assert!(tr.states.iter().all(|s| s == &tr.states[0]));
        assert!(tr.measurements.iter().all(|y| y == &tr.states[0]));
    }

    #[test]
    fn zero_horizon_is_empty() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let prior = GaussianBelief::isotropic(DVector::zeros(1), 1.0);
        let tr = simulate(&identity_model(1), &prior, 0, &mut rng).unwrap();
        assert!(tr.states.is_empty() && tr.measurements.is_empty());
    }

    #[test]
    fn norm_measurement_linearization() {
        let m = GeneralSsm::new(
            Arc::new(|_, x| x.clone()),
            Arc::new(|_, x| DVector::from_element(1, x.norm())),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let x = DVector::from_vec(vec![3.0, 4.0]);
        let lin = linearize(&m, &x, &x, 0);
        assert_relative_eq!(lin.h[(0, 0)], 0.6, epsilon = 1e-8);
        assert_relative_eq!(lin.h[(1, 0)], 0.8, epsilon = 1e-8);
        assert!(lin.v[0].abs() < 1e-8);
    }

    #[test]
    fn linear_model_linearization_is_constant() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.9]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, -2.0]);
        let (a1, c1) = (a.clone(), c.clone());
        let m = GeneralSsm::new(
            Arc::new(move |_, x| &a1 * x + DVector::from_vec(vec![0.5, -0.5])),
            Arc::new(move |_, x| &c1 * x + DVector::from_element(1, 3.0)),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        for p in [[0.0, 0.0], [5.0, -3.0]] {
            let x = DVector::from_column_slice(&p);
            let lin = linearize(&m, &x, &x, 0);
            assert_relative_eq!(lin.f, a, epsilon = 1e-8);
            assert_relative_eq!(lin.h, c.transpose(), epsilon = 1e-8);
            assert_relative_eq!(lin.u, DVector::from_vec(vec![0.5, -0.5]), epsilon = 1e-7);
            assert_relative_eq!(lin.v[0], 3.0, epsilon = 1e-7);
        }
    }
}
