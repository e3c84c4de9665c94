//! The simplified network, whose Gaussian filter covers only the linear
//! block, next to the full dual filter.

use mbf::dbf::{Dbf, DbfConfig, Sdbf};
use mbf::harness::{rmse, simulate_scenario, ExperimentConfig, ScenarioKind};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::default();
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, 21)?;
    let system = sim.scenario.model.joint().clone();
    let prior = &sim.scenario.prior;
    let groups = [vec![0, 1]];

    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let mut sdbf = Sdbf::new(system.clone(), prior, DbfConfig::new(100, 1), &mut rng)?;
    let mut dbf = Dbf::new(system, prior, DbfConfig::new(100, 1), &mut rng)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, y) in sim.truth.measurements.iter().enumerate() {
        a.push(sdbf.update(k, y, &mut rng)?);
        b.push(dbf.update(k, y, &mut rng)?);
    }
    println!("SDBF: RMSE position {:.4} m, redundancy {}", rmse(&sim.truth.states, &a, &groups)?, sdbf.network().redundancy());
    println!("DBF:  RMSE position {:.4} m, redundancy {}", rmse(&sim.truth.states, &b, &groups)?, dbf.network().redundancy());
    Ok(())
}
