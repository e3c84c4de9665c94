//! Extended Kalman filter on the planar agent model.

use mbf::filters::Ekf;
use mbf::harness::{rmse, simulate_scenario, ExperimentConfig, ScenarioKind};

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::default();
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, 21)?;
    let mut ekf = Ekf::new(sim.scenario.model.joint().general.clone(), sim.scenario.prior.clone())?;

    let mut estimates = Vec::new();
    for (k, y) in sim.truth.measurements.iter().enumerate() {
        estimates.push(ekf.update(k, y)?.mean().clone());
    }
    let pos = rmse(&sim.truth.states, &estimates, &[vec![0, 1]])?;
    let vel = rmse(&sim.truth.states, &estimates, &[vec![2, 3]])?;
    println!("EKF: RMSE position {pos:.4} m, velocity {vel:.4} m/s");
    println!("final covariance diagonal {:.2e}", ekf.state().pred.cov().diagonal().transpose());
    Ok(())
}
