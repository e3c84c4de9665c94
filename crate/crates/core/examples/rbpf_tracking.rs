//! Rao-Blackwellised particle filter: particles over velocity, one Kalman
//! filter over position per particle.

use mbf::filters::Rbpf;
use mbf::harness::{rmse, simulate_scenario, ExperimentConfig, ScenarioKind};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::default();
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, 21)?;
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    for n_p in [10, 50, 100] {
        let mut rbpf = Rbpf::new(sim.scenario.model.joint().clg.clone(), &sim.scenario.prior, n_p, &mut rng)?;
        let estimates: Vec<_> = sim
            .truth
            .measurements
            .iter()
            .enumerate()
            .map(|(k, y)| rbpf.update(k, y, &mut rng))
            .collect::<mbf::Result<_>>()?;
        let pos = rmse(&sim.truth.states, &estimates, &[vec![0, 1]])?;
        let vel = rmse(&sim.truth.states, &estimates, &[vec![2, 3]])?;
        println!("RBPF N_p={n_p:>3}: RMSE position {pos:.4} m, velocity {vel:.4} m/s");
    }
    Ok(())
}
