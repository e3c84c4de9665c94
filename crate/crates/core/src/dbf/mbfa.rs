//! Multiple Bayesian filtering for `N` targets: one extended Kalman filter
//! over the joint state and one particle filter per target position.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::filters::{default_cross_draws, draw_indices, time_update, CrossDraw, Filter};
use crate::gaussian::{block_marginal, GaussianBelief};
use crate::linalg::{self, Spd};
use crate::model::sample_gaussian;
use crate::multitarget::MultiTargetModel;
use crate::particle::{normalize_log_weights, systematic_indices, weighted_mean};

use super::steps::{self, MeasurementWeigher, Phase1};
use super::{DbfConfig, NetworkInfo};

/// Network state between recursions.
#[derive(Clone, Debug)]
pub struct MbfaState {
    /// Joint prediction of the Kalman filter.
    pub f1_pred: GaussianBelief,
    /// Predicted particle set of each target's nonlinear block.
    pub sets: Vec<Vec<DVector<f64>>>,
}

#[derive(Clone, Debug)]
pub struct Mbfa {
    model: MultiTargetModel,
    cfg: DbfConfig,
    cross_draws: usize,
    mode: CrossDraw,
    w_e: DMatrix<f64>,
    e_factor: Spd,
    w_w_n: Option<DMatrix<f64>>,
    state: MbfaState,
}

impl Mbfa {
    /// `cfg.particles` is the total budget; each target gets `⌊N_p/N⌋`.
    pub fn new<R: Rng + ?Sized>(
        model: MultiTargetModel,
        prior: &GaussianBelief,
        cfg: DbfConfig,
        cross_draws: Option<usize>,
        mode: CrossDraw,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = model.targets();
        let m = cfg.particles / n;
        if m == 0 {
            return Err(Error::InvalidParameter(format!("{} particles cannot cover {n} targets", cfg.particles)));
        }
        if prior.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: prior.dim() });
        }
        let mut sets = Vec::with_capacity(n);
        for i in 0..n {
            let marginal = block_marginal(prior, model.nonlinear_range(i))?;
            let sqrt = linalg::psd_sqrt(marginal.cov())?;
            sets.push((0..m).map(|_| sample_gaussian(marginal.mean(), &sqrt, rng)).collect());
        }
        let clg = &model.joint().clg;
        let e_factor = Spd::new(&clg.cov_e)?;
        let w_e = e_factor.inverse();
        let w_w_n = Spd::new(&clg.cov_w_n).ok().map(|f| f.inverse());
        Ok(Self {
            cross_draws: cross_draws.unwrap_or_else(|| default_cross_draws(m)),
            mode,
            w_e,
            e_factor,
            w_w_n,
            state: MbfaState { f1_pred: prior.clone(), sets },
            model,
            cfg,
        })
    }

    pub fn state(&self) -> &MbfaState {
        &self.state
    }

    pub fn network(&self) -> NetworkInfo {
        let t = self.model.template();
        let mut dims = vec![self.model.dim()];
        dims.extend(std::iter::repeat(t.dim_n).take(self.model.targets()));
        NetworkInfo::new(dims, self.model.dim())
    }

    pub fn update<R: Rng + ?Sized>(&mut self, k: usize, y: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        let (next, est) = mbfa_step(self, y, k, rng)?;
        self.state = next;
        Ok(est)
    }
}

/// One network recursion.
pub fn mbfa_step<R: Rng + ?Sized>(f: &Mbfa, y: &DVector<f64>, k: usize, rng: &mut R) -> Result<(MbfaState, DVector<f64>)> {
    let model = &f.model;
    let joint = &model.joint().clg;
    let general = &model.joint().general;
    let tpl = model.template();
    let n_targets = model.targets();
    let dim_l = joint.dim_l;
    let dl = tpl.dim_l;

    let x_fp = f.state.f1_pred.mean();
    let ht = general.measurement_jacobian(k, x_fp);
    let v = general.measurement(k, x_fp) - &ht * x_fp;
    let m2: Phase1 = steps::phase1(&f.state.f1_pred, &ht.transpose(), &v, &f.w_e, y, dim_l)?;

    let mut sets = f.state.sets.clone();
    let m = sets[0].len();
    let mut m4: Option<GaussianBelief> = None;
    let mut filtered_weights = vec![Vec::new(); n_targets];
    let mut predicted = vec![Vec::new(); n_targets];
    let mut filtered_sets = sets.clone();

    for n in 1..=f.cfg.iterations {
        let m3 = steps::combine_with_pseudo(&m2.post, m4.as_ref(), n)?;
        let lin1 = block_marginal(&m3, 0..dim_l)?;
        let mut resampled = Vec::with_capacity(n_targets);
        for i in 0..n_targets {
            let draws = draw_indices(f.mode, n_targets, m, f.cross_draws, rng);
            let draws: &[Vec<usize>] = if n_targets == 1 { &draws[..1] } else { &draws };
            let mut weigher = MeasurementWeigher::new(&lin1, &joint.cov_e, &f.e_factor, y);
            let lin2_i = target_linear(&m2.linear, i, dl)?;
            let lin1_i = target_linear(&lin1, i, dl)?;
            let mut log_w = Vec::with_capacity(m);
            let mut blocks: Vec<&DVector<f64>> = sets.iter().map(|s| &s[0]).collect();
            for x in &sets[i] {
                blocks[i] = x;
                let mut lls = Vec::with_capacity(draws.len());
                for draw in draws {
                    for (o, slot) in blocks.iter_mut().enumerate() {
                        if o != i {
                            *slot = &sets[o][draw[o]];
                        }
                    }
                    let xn = model.assemble_nonlinear(&blocks);
                    lls.push(weigher.log_weight(&(joint.b)(k, &xn), &(joint.g)(k, &xn)).map_err(Error::diverged)?);
                }
                let w1 = log_mean_exp(&lls);
                let w3 = steps::feedback_log_weight(&(tpl.a_l)(k, x), &(tpl.f_l)(k, x), &tpl.cov_w_l, &lin2_i, &lin1_i);
                log_w.push((w1, w3));
            }
            let w3_ok = log_w.iter().all(|(_, w3)| w3.is_ok());
            let combined: Vec<f64> = log_w
                .into_iter()
                .map(|(w1, w3)| w1 + if w3_ok { w3.unwrap_or(0.0) } else { 0.0 })
                .collect();
            let weights = normalize_log_weights(&combined)
                .map_err(|_| Error::FilterDiverged(format!("all weights of target {i} vanished")))?;
            let idx = systematic_indices(&weights, m, rng);
            let r: Vec<DVector<f64>> = idx.iter().map(|&j| sets[i][j].clone()).collect();
            predicted[i] = r
                .iter()
                .map(|x| steps::sample_conditional_prediction(&(tpl.a_n)(k, x), &(tpl.f_n)(k, x), &tpl.cov_w_n, &lin1_i, rng))
                .collect::<Result<_>>()
                .map_err(Error::diverged)?;
            filtered_weights[i] = weights;
            resampled.push(r);
        }

        let joint_particles: Vec<DVector<f64>> =
            (0..m).map(|j| model.assemble_nonlinear(&resampled.iter().map(|r| &r[j]).collect::<Vec<_>>())).collect();
        let linear: Vec<Option<GaussianBelief>> = match &f.w_w_n {
            None => vec![None; m],
            Some(w) => (0..m)
                .map(|j| {
                    let x = &joint_particles[j];
                    let x_next = model.assemble_nonlinear(&predicted.iter().map(|p| &p[j]).collect::<Vec<_>>());
                    let z = linalg::sub_vec(&x_next, &(joint.f_n)(k, x));
                    steps::linear_pseudo_posterior(&(joint.a_n)(k, x), w, &z, f.cfg.pm_regularization)
                })
                .collect(),
        };
        m4 = steps::pseudo_measurement_message(&joint_particles, linear)?;
        filtered_sets = std::mem::replace(&mut sets, resampled);
    }

    let m3 = steps::combine_with_pseudo(&m2.post, m4.as_ref(), f.cfg.iterations + 1)?;
    let mut estimate = m3.mean().clone();
    for i in 0..n_targets {
        let r = model.nonlinear_range(i);
        estimate.rows_mut(r.start, r.len()).copy_from(&weighted_mean(&filtered_sets[i], &filtered_weights[i]));
    }
    let pred = time_update(general, &m3, k);
    crate::filters::check_belief(&pred)?;
    Ok((MbfaState { f1_pred: pred, sets: predicted }, estimate))
}

fn target_linear(g: &GaussianBelief, i: usize, dl: usize) -> Result<GaussianBelief> {
    block_marginal(g, i * dl..(i + 1) * dl)
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + (v.iter().map(|x| (x - max).exp()).sum::<f64>() / v.len() as f64).ln()
}

impl Filter for Mbfa {
    fn name(&self) -> &str {
        "mbfa"
    }

    fn step(&mut self, k: usize, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        self.update(k, y, rng)
    }
}
