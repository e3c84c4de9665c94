//! Multiple Bayesian filtering: an extended Kalman filter over the whole
//! state interconnected with one particle filter per target position.

use mbf::dbf::{DbfConfig, Mbfa};
use mbf::filters::CrossDraw;
use mbf::harness::{lost_track, rmse, simulate_scenario, ExperimentConfig, ScenarioKind};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::default();
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm2, 3, 17)?;
    let model = &sim.scenario.model;
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let mut mbfa = Mbfa::new(model.clone(), &sim.scenario.prior, DbfConfig::new(300, 1), None, CrossDraw::Random, &mut rng)?;
    let net = mbfa.network();
    println!("{} filters, dimensions {:?}, redundancy {}", net.filters(), net.filter_dims, net.redundancy());

    let est: Vec<_> = sim
        .truth
        .measurements
        .iter()
        .enumerate()
        .map(|(k, y)| mbfa.update(k, y, &mut rng))
        .collect::<mbf::Result<_>>()?;
    let positions: Vec<Vec<usize>> = (0..model.targets()).map(|i| model.nonlinear_range(i).collect()).collect();
    println!("position RMSE {:.3} m", rmse(&sim.truth.states, &est, &positions)?);
    println!("lost track: {}", lost_track(&sim.truth.states, &est, sim.scenario.position_blocks(), 100.0, 10));
    Ok(())
}
