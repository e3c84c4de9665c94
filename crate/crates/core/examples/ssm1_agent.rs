//! The planar agent model: simulate a trajectory and check that the
//! conditionally linear form agrees with the general model.

use mbf::model::{clg_check, simulate};
use mbf::scenario::{PriorConfig, Scenario, Ssm1Params};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let params = Ssm1Params::default();
    let scenario = Scenario::ssm1(&params, &PriorConfig::default())?;
    let system = scenario.model.joint();
    let mut rng = ChaCha12Rng::seed_from_u64(3);

    let report = clg_check(&system.clg, &system.general, 200, &mut rng);
    println!("CLG form vs general model: {report:?}");

    let truth = simulate(&system.general, &scenario.truth_prior(), params.horizon, &mut rng)?;
    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "k", "p_x", "p_y", "v_x", "v_y");
    for k in (0..params.horizon).step_by(30) {
        let x = &truth.states[k];
        println!("{k:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", x[0], x[1], x[2], x[3]);
    }
    Ok(())
}
