//! Single agent with position/velocity dependent forces.
//!
//! State `[p; v]`: position is the conditionally linear block, velocity the
//! nonlinear one. The measurement is `[p; ‖v‖] + e`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClgModel, ClgSystem, GeneralSsm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ssm1Params {
    pub rho: f64,
    pub ts: f64,
    pub sigma_p: f64,
    pub sigma_ep: f64,
    pub sigma_ev: f64,
    pub a0: f64,
    pub a0_tilde: f64,
    pub d0: f64,
    pub v0: f64,
    pub p_init: [f64; 2],
    pub v_init: [f64; 2],
    pub horizon: usize,
}

impl Default for Ssm1Params {
    fn default() -> Self {
        Self {
            rho: 0.99,
            ts: 0.1,
            sigma_p: 0.01,
            sigma_ep: 0.05,
            sigma_ev: 0.05,
            a0: 1.5,
            a0_tilde: 0.05,
            d0: 0.5,
            v0: 1.0,
            p_init: [5.0, 8.0],
            v_init: [4.0, 4.0],
            horizon: 300,
        }
    }
}

impl Ssm1Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        let scales = [self.ts, self.sigma_p, self.sigma_ep, self.sigma_ev, self.a0, self.a0_tilde, self.d0, self.v0];
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("ssm1 scales must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.p_init[0], self.p_init[1], self.v_init[0], self.v_init[1]])
    }

    /// Drag term `ã₀ (‖v‖/v₀)³ v/‖v‖`, written in the form that stays
    /// defined at `v = 0`.
    fn drag(&self, v: &Vector2<f64>) -> Vector2<f64> {
        v * (self.a0_tilde * v.norm_squared() / self.v0.powi(3))
    }

    /// Jacobian of [`Self::drag`] with respect to `v`.
    fn drag_jacobian(&self, v: &Vector2<f64>) -> nalgebra::Matrix2<f64> {
        let c = self.a0_tilde / self.v0.powi(3);
        (nalgebra::Matrix2::identity() * v.norm_squared() + v * v.transpose() * 2.0) * c
    }
}

/// `a(p, v) = −(a₀/d₀) p − ã₀ (‖v‖/v₀)³ u_v`
pub fn ssm1_accel(p: &Vector2<f64>, v: &Vector2<f64>, params: &Ssm1Params) -> Result<Vector2<f64>> {
    let speed = v.norm();
    if speed < 1e-12 {
        return Err(Error::ZeroVelocity);
    }
    let fv = (speed / params.v0).powi(3);
    Ok(-p * (params.a0 / params.d0) - v / speed * (params.a0_tilde * fv))
}

fn v2(x: &DVector<f64>, at: usize) -> Vector2<f64> {
    Vector2::new(x[at], x[at + 1])
}

/// Both representations of the model.
pub fn ssm1_build(params: &Ssm1Params) -> Result<ClgSystem> {
    params.validate()?;
    let ts = params.ts;
    let k_p = params.a0 / params.d0;

    let pr = params.clone();
    let f = Arc::new(move |_k: usize, x: &DVector<f64>| {
        let (p, v) = (v2(x, 0), v2(x, 2));
        let a = -p * k_p - pr.drag(&v);
        let v_next = v * pr.rho + a * ts;
        let p_next = p + v * ts + a * (0.5 * ts * ts);
        DVector::from_vec(vec![p_next[0], p_next[1], v_next[0], v_next[1]])
    });
    let pr = params.clone();
    let jac_f = Arc::new(move |_k: usize, x: &DVector<f64>| {
        let v = v2(x, 2);
        let da_dv = -pr.drag_jacobian(&v);
        let i2 = nalgebra::Matrix2::<f64>::identity();
        let dp_dp = i2 * (1.0 - 0.5 * k_p * ts * ts);
        let dp_dv = i2 * ts + da_dv * (0.5 * ts * ts);
        let dv_dp = i2 * (-k_p * ts);
        let dv_dv = i2 * pr.rho + da_dv * ts;
        let mut j = DMatrix::zeros(4, 4);
        j.view_mut((0, 0), (2, 2)).copy_from(&dp_dp);
        j.view_mut((0, 2), (2, 2)).copy_from(&dp_dv);
        j.view_mut((2, 0), (2, 2)).copy_from(&dv_dp);
        j.view_mut((2, 2), (2, 2)).copy_from(&dv_dv);
        j
    });
    let h = Arc::new(|_k: usize, x: &DVector<f64>| DVector::from_vec(vec![x[0], x[1], v2(x, 2).norm()]));
    let jac_h = Arc::new(|_k: usize, x: &DVector<f64>| {
        let v = v2(x, 2);
        let s = v.norm();
        let mut j = DMatrix::zeros(3, 4);
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        if s > 0.0 {
            j[(2, 2)] = v[0] / s;
            j[(2, 3)] = v[1] / s;
        }
        j
    });

    let cov_w_l = DMatrix::identity(2, 2) * params.sigma_p.powi(2);
    let cov_w_n = DMatrix::identity(2, 2) * (1.0 - params.rho).powi(2);
    let cov_e = DMatrix::from_diagonal(&DVector::from_vec(vec![
        params.sigma_ep.powi(2),
        params.sigma_ep.powi(2),
        params.sigma_ev.powi(2),
    ]));
    let general = GeneralSsm::new(
        f,
        h,
        crate::linalg::block_diag(&cov_w_l, &cov_w_n),
        cov_e.clone(),
    )?
    .with_jacobians(jac_f, jac_h);

    let pr_n = params.clone();
    let pr_l = params.clone();
    let clg = ClgModel {
        dim_l: 2,
        dim_n: 2,
        meas_dim: 3,
        a_n: Arc::new(move |_, _| DMatrix::identity(2, 2) * (-k_p * ts)),
        f_n: Arc::new(move |_, v| {
            let v = v2(v, 0);
            let out = v * pr_n.rho - pr_n.drag(&v) * ts;
            DVector::from_column_slice(out.as_slice())
        }),
        a_l: Arc::new(move |_, _| DMatrix::identity(2, 2) * (1.0 - 0.5 * k_p * ts * ts)),
        f_l: Arc::new(move |_, v| {
            let v = v2(v, 0);
            let out = v * ts - pr_l.drag(&v) * (0.5 * ts * ts);
            DVector::from_column_slice(out.as_slice())
        }),
        g: Arc::new(|_, v| DVector::from_vec(vec![0.0, 0.0, v2(v, 0).norm()])),
        b: Arc::new(|_, _| DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])),
        cov_w_l,
        cov_w_n,
        cov_e,
    };
    ClgSystem::new(general, clg)
}
