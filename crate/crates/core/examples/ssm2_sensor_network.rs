//! The received-signal-strength sensor network: place targets, simulate
//! their motion and print what the sensors see.

use mbf::model::simulate;
use mbf::scenario::{PriorConfig, Scenario, Ssm2Params};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let params = Ssm2Params { targets: 3, ..Ssm2Params::default() };
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let scenario = Scenario::ssm2(&params, &PriorConfig::default(), &mut rng)?;
    let model = &scenario.model;
    println!("{} sensors, {} targets, state dimension {}", scenario.sensors.len(), model.targets(), model.dim());

    let truth = simulate(&model.joint().general, &scenario.truth_prior(), params.horizon, &mut rng)?;
    for i in 0..model.targets() {
        let start = model.target_state(&truth.states[0], i);
        let end = model.target_state(truth.states.last().expect("nonempty"), i);
        println!("target {i}: {:?} → {:?} m", &start.as_slice()[2..], &end.as_slice()[2..]);
    }
    let y = &truth.measurements[0];
    println!("first scan, dB: min {:.2} max {:.2}", y.min(), y.max());
    Ok(())
}
