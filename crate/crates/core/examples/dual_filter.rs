//! Dual Bayesian filtering on the planar agent model, driven one message
//! at a time so the exchange between the two filters is visible.

use mbf::dbf::{Dbf, DbfConfig, DbfModel, DbfRecursionState};
use mbf::harness::{rmse, simulate_scenario, ExperimentConfig, ScenarioKind};
use mbf::particle::effective_sample_size;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::default();
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, 21)?;
    let system = sim.scenario.model.joint().clone();
    let mut rng = ChaCha12Rng::seed_from_u64(8);

    // A single recursion, step by step.
    let model = DbfModel::new(system.clone(), DbfConfig::new(100, 2))?;
    let mut st = DbfRecursionState::init(&model, &sim.scenario.prior, &mut rng)?;
    let y = &sim.truth.measurements[0];
    st.phase1(&model, y, 0)?;
    for n in 1..=2 {
        if n > 1 {
            st.f2_set = std::mem::take(&mut st.resampled);
        }
        st.step1(model.dim_l(), n)?;
        st.step2(&model, y, 0)?;
        st.step3(&model, 0)?;
        st.step4(&mut rng)?;
        st.step5(&model, 0, &mut rng)?;
        st.step6(&model, 0)?;
        let pm = st.pm_for_f1.as_ref().map(|g| g.cov().diagonal().transpose());
        println!(
            "iteration {n}: ESS {:.1}, pseudo-measurement variances {:.3e}",
            effective_sample_size(&st.f2_filtered),
            pm.expect("informative message")
        );
    }
    println!("estimate after one recursion {:.4}", st.phase3(&model, 0)?.transpose());

    // The packaged filter over the whole horizon.
    for n_i in [1, 2, 3] {
        let mut dbf = Dbf::new(system.clone(), &sim.scenario.prior, DbfConfig::new(100, n_i), &mut rng)?;
        let est: Vec<_> = sim
            .truth
            .measurements
            .iter()
            .enumerate()
            .map(|(k, y)| dbf.update(k, y, &mut rng))
            .collect::<mbf::Result<_>>()?;
        println!(
            "DBF n_i={n_i}: RMSE position {:.4} m, velocity {:.4} m/s, redundancy {}",
            rmse(&sim.truth.states, &est, &[vec![0, 1]])?,
            rmse(&sim.truth.states, &est, &[vec![2, 3]])?,
            dbf.network().redundancy()
        );
    }
    Ok(())
}
