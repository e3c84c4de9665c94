//! Per-particle Kalman pieces shared by the Rao-Blackwellised filters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg::{self, Spd};

/// Innovation of the linear block for a fixed nonlinear particle:
/// `y ~ N(B η + g, B C Bᵀ + R)`.
pub struct Innovation {
    pub residual: DVector<f64>,
    pub factor: Spd,
    /// `B C`, reused by the gain.
    pub bc: DMatrix<f64>,
}

/// Factor of `B C Bᵀ + R`, reusing `r_factor` when `B C Bᵀ` vanishes.
pub fn innovation(
    b: &DMatrix<f64>,
    offset: &DVector<f64>,
    lin: &GaussianBelief,
    r: &DMatrix<f64>,
    r_factor: Option<&Spd>,
    y: &DVector<f64>,
) -> Result<Innovation> {
    let predicted = linalg::add_vec(&linalg::matvec(b, lin.mean()), offset);
    let residual = linalg::sub_vec(y, &predicted);
    let bc = linalg::matmul(b, lin.cov());
    let bcb = linalg::symmetrize(&linalg::matmul_tr(&bc, b));
    let factor = match r_factor {
        Some(f) if bcb.iter().all(|v| *v == 0.0) => f.clone(),
        _ => Spd::new(&linalg::add(&bcb, r))?,
    };
    Ok(Innovation { residual, factor, bc })
}

impl Innovation {
    pub fn log_likelihood(&self) -> f64 {
        self.factor.log_density(&self.residual)
    }

    /// Conditional Kalman update of `lin` with this innovation.
    pub fn update(&self, lin: &GaussianBelief) -> GaussianBelief {
        if self.bc.iter().all(|v| *v == 0.0) {
            return lin.clone();
        }
        // gain Kᵀ = S⁻¹ B C
        let kt = self.factor.solve(&self.bc);
        let mean = linalg::add_vec(lin.mean(), &linalg::tr_matvec(&kt, &self.residual));
        let cov = linalg::sub(lin.cov(), &linalg::tr_matmul(&self.bc, &kt));
        GaussianBelief::from_parts(mean, cov)
    }
}

/// Conditional law of the leading `dim_l` coordinates of `prior` given the
/// trailing block equals `x_n`. Falls back to the marginal when the trailing
/// block's covariance is singular.
pub fn conditional_linear_prior(prior: &GaussianBelief, dim_l: usize, x_n: &DVector<f64>) -> Result<GaussianBelief> {
    let d = prior.dim();
    if dim_l > d || x_n.len() != d - dim_l {
        return Err(Error::DimensionMismatch { expected: d - dim_l.min(d), found: x_n.len() });
    }
    let dn = d - dim_l;
    let c = prior.cov();
    let c_ll = c.view((0, 0), (dim_l, dim_l)).into_owned();
    let c_ln = c.view((0, dim_l), (dim_l, dn)).into_owned();
    let eta_l = prior.mean().rows(0, dim_l).into_owned();
    if c_ln.iter().all(|v| *v == 0.0) {
        return Ok(GaussianBelief::from_parts(eta_l, c_ll));
    }
    let c_nn = c.view((dim_l, dim_l), (dn, dn)).into_owned();
    match Spd::new(&c_nn) {
        Ok(f) => {
            let dev = x_n - prior.mean().rows(dim_l, dn);
            let gain_t = f.solve(&c_ln.transpose());
            let mean = eta_l + gain_t.transpose() * dev;
            let cov = c_ll - &c_ln * gain_t;
            Ok(GaussianBelief::from_parts(mean, cov))
        }
        Err(_) => Ok(GaussianBelief::from_parts(eta_l, c_ll)),
    }
}
