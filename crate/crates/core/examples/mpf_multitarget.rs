//! Multiple particle filtering: one particle filter per target, each
//! marginalising the others through cross draws.

use mbf::filters::{CrossDraw, Mpf};
use mbf::harness::{lost_track, rmse, simulate_scenario, ExperimentConfig, ScenarioKind};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::default();
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm2, 2, 17)?;
    let model = &sim.scenario.model;
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let mut mpf = Mpf::new(model.clone(), &sim.scenario.prior, 200, None, CrossDraw::Random, &mut rng)?;
    println!("{} filters × {} particles, {} cross draws", model.targets(), mpf.state().particles_per_filter(), mpf.state().cross_draws);

    let est: Vec<_> = sim
        .truth
        .measurements
        .iter()
        .enumerate()
        .map(|(k, y)| mpf.update(k, y, &mut rng))
        .collect::<mbf::Result<_>>()?;
    let positions: Vec<Vec<usize>> = (0..model.targets()).map(|i| model.nonlinear_range(i).collect()).collect();
    println!("position RMSE {:.3} m", rmse(&sim.truth.states, &est, &positions)?);
    println!("lost track: {}", lost_track(&sim.truth.states, &est, sim.scenario.position_blocks(), 100.0, 10));
    Ok(())
}
