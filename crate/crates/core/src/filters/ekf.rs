use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg::{self, Spd};
use crate::model::GeneralSsm;

use super::{check_belief, Filter};

/// Forward prediction and, once a measurement has been processed, the
/// forward estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EkfState {
    pub pred: GaussianBelief,
    pub filt: Option<GaussianBelief>,
}

impl EkfState {
    pub fn new(prior: GaussianBelief) -> Self {
        Self { pred: prior, filt: None }
    }
}

/// Posterior of a linearised measurement update, kept in both forms.
#[derive(Clone, Debug)]
pub struct InformationPosterior {
    pub prec: DMatrix<f64>,
    pub tmean: DVector<f64>,
    pub belief: GaussianBelief,
}

/// Combines the prediction with the likelihood message
/// `W₁ = H W_e Hᵀ`, `w₁ = H W_e (y − v)` in precision form.
pub fn information_update(
    pred: &GaussianBelief,
    h: &DMatrix<f64>,
    v: &DVector<f64>,
    w_e: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<InformationPosterior> {
    let w_fp = Spd::new(pred.cov())?.inverse();
    let tm_fp = linalg::matvec(&w_fp, pred.mean());
    let hw = linalg::matmul(h, w_e);
    let prec = linalg::symmetrize(&linalg::add(&w_fp, &linalg::matmul_tr(&hw, h)));
    let tmean = linalg::add_vec(&tm_fp, &linalg::matvec(&hw, &linalg::sub_vec(y, v)));
    let cov = Spd::new(&prec)?.inverse();
    let mean = linalg::matvec(&cov, &tmean);
    Ok(InformationPosterior { prec, tmean, belief: GaussianBelief::from_parts(mean, cov) })
}

/// Measurement update around the prediction mean, then time update around
/// the filtered mean.
pub fn ekf_step(s: &EkfState, m: &GeneralSsm, w_e: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<EkfState> {
    let x_fp = s.pred.mean();
    let ht = m.measurement_jacobian(k, x_fp);
    let v = m.measurement(k, x_fp) - &ht * x_fp;
    let post = information_update(&s.pred, &ht.transpose(), &v, w_e, y).map_err(Error::diverged)?;
    let filt = post.belief;
    check_belief(&filt)?;
    let pred = time_update(m, &filt, k);
    check_belief(&pred)?;
    Ok(EkfState { pred, filt: Some(filt) })
}

/// `N(F η + u, C_w + F C Fᵀ)` with `F` taken at the belief's mean.
pub fn time_update(m: &GeneralSsm, filt: &GaussianBelief, k: usize) -> GaussianBelief {
    let f = m.transition_jacobian(k, filt.mean());
    let u = m.transition(k, filt.mean()) - &f * filt.mean();
    GaussianBelief::from_parts(
        linalg::add_vec(&linalg::matvec(&f, filt.mean()), &u),
        linalg::add(m.cov_w(), &linalg::congruence(&f, filt.cov())),
    )
}

/// Extended Kalman filter over the full state.
#[derive(Clone, Debug)]
pub struct Ekf {
    model: GeneralSsm,
    w_e: DMatrix<f64>,
    state: EkfState,
}

impl Ekf {
    pub fn new(model: GeneralSsm, prior: GaussianBelief) -> Result<Self> {
        if prior.dim() != model.state_dim() {
            return Err(Error::DimensionMismatch { expected: model.state_dim(), found: prior.dim() });
        }
        let w_e = Spd::new(model.cov_e())?.inverse();
        Ok(Self { model, w_e, state: EkfState::new(prior) })
    }

    /// Uses a caller-supplied measurement precision, e.g. zero for an
    /// uninformative sensor.
    pub fn with_measurement_precision(model: GeneralSsm, prior: GaussianBelief, w_e: DMatrix<f64>) -> Self {
        Self { model, w_e, state: EkfState::new(prior) }
    }

    pub fn state(&self) -> &EkfState {
        &self.state
    }

    pub fn update(&mut self, k: usize, y: &DVector<f64>) -> Result<&GaussianBelief> {
        self.state = ekf_step(&self.state, &self.model, &self.w_e, y, k)?;
        Ok(self.state.filt.as_ref().expect("filtered belief set by ekf_step"))
    }
}

impl Filter for Ekf {
    fn name(&self) -> &str {
        "ekf"
    }

    fn step(&mut self, k: usize, y: &DVector<f64>, _rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        Ok(self.update(k, y)?.mean().clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn scalar_walk(cw: f64, ce: f64) -> GeneralSsm {
        GeneralSsm::new(
            Arc::new(|_, x| x.clone()),
            Arc::new(|_, x| x.clone()),
            DMatrix::from_element(1, 1, cw),
            DMatrix::from_element(1, 1, ce),
        )
        .unwrap()
        .with_jacobians(Arc::new(|_, _| DMatrix::identity(1, 1)), Arc::new(|_, _| DMatrix::identity(1, 1)))
    }

    #[test]
    fn scalar_kalman_arithmetic() {
        let prior = GaussianBelief::isotropic(DVector::zeros(1), 1.0);
        let mut f = Ekf::new(scalar_walk(1.0, 1.0), prior).unwrap();
        f.update(0, &DVector::from_element(1, 1.0)).unwrap();
        let s = f.state();
        let filt = s.filt.as_ref().unwrap();
        assert_relative_eq!(filt.mean()[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(filt.cov()[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(s.pred.mean()[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(s.pred.cov()[(0, 0)], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn uninformative_measurement_keeps_prediction() {
        let prior = GaussianBelief::isotropic(DVector::from_element(1, 0.3), 2.0);
        let mut f = Ekf::with_measurement_precision(scalar_walk(1.0, 1.0), prior.clone(), DMatrix::zeros(1, 1));
        let filt = f.update(0, &DVector::from_element(1, 100.0)).unwrap();
        assert_relative_eq!(filt.mean(), prior.mean(), epsilon = 1e-14);
        assert_relative_eq!(filt.cov(), prior.cov(), epsilon = 1e-14);
    }
}
