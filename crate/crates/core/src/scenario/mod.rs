//! The two experimental systems and the filters' initial belief.

mod ssm1;
mod ssm2;

pub use ssm1::{ssm1_accel, ssm1_build, Ssm1Params};
pub use ssm2::{
    segment_distance, ssm2_build, ssm2_model, ssm2_place_targets, ssm2_rss_mean, Ssm2Instance, Ssm2Params,
    PLACEMENT_ATTEMPTS,
};

use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gaussian::GaussianBelief;
use crate::multitarget::MultiTargetModel;

/// Filter prior: centred on the true initial state with independent
/// position and velocity variances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub velocity_var: f64,
    pub position_var: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { velocity_var: 1.0, position_var: 25.0 }
    }
}

/// Everything needed to simulate one run and initialise a filter.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub label: String,
    pub model: MultiTargetModel,
    pub initial_state: DVector<f64>,
    pub prior: GaussianBelief,
    pub horizon: usize,
    pub sensors: Vec<Vector2<f64>>,
    /// Indices of the position coordinates of target `i` in the joint state.
    position_blocks: Vec<[usize; 2]>,
}

impl Scenario {
    pub fn ssm1(params: &Ssm1Params, prior: &PriorConfig) -> Result<Scenario> {
        let system = ssm1_build(params)?;
        let x1 = params.initial_state();
        let var = DVector::from_vec(vec![prior.position_var, prior.position_var, prior.velocity_var, prior.velocity_var]);
        Ok(Scenario {
            label: "ssm1".into(),
            model: MultiTargetModel::single(system)?,
            prior: GaussianBelief::from_parts(x1.clone(), DMatrix::from_diagonal(&var)),
            initial_state: x1,
            horizon: params.horizon,
            sensors: Vec::new(),
            position_blocks: vec![[0, 1]],
        })
    }

    /// Draws a fresh admissible placement from `rng`.
    pub fn ssm2<R: Rng + ?Sized>(params: &Ssm2Params, prior: &PriorConfig, rng: &mut R) -> Result<Scenario> {
        let inst = ssm2_build(params, rng)?;
        let n = params.targets;
        let var = DVector::from_fn(4 * n, |i, _| if i < 2 * n { prior.velocity_var } else { prior.position_var });
        Ok(Scenario {
            label: format!("ssm2_n{n}"),
            prior: GaussianBelief::from_parts(inst.initial_state.clone(), DMatrix::from_diagonal(&var)),
            model: inst.model,
            initial_state: inst.initial_state,
            horizon: params.horizon,
            sensors: inst.sensors,
            position_blocks: (0..n).map(|i| [2 * n + 2 * i, 2 * n + 2 * i + 1]).collect(),
        })
    }

    pub fn targets(&self) -> usize {
        self.model.targets()
    }

    /// Position coordinate indices per target.
    pub fn position_blocks(&self) -> &[[usize; 2]] {
        &self.position_blocks
    }

    /// Degenerate prior at the true initial state, used to simulate truth.
    pub fn truth_prior(&self) -> GaussianBelief {
        let d = self.initial_state.len();
        GaussianBelief::from_parts(self.initial_state.clone(), DMatrix::zeros(d, d))
    }
}
