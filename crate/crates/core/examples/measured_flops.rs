//! Instrumented flop counts of real filter runs next to the closed forms.

use mbf::harness::{analytic_flops, attach_counter, build_filter, simulate_scenario, ExperimentConfig, FilterKind, ScenarioKind};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> mbf::Result<()> {
    let cfg = ExperimentConfig::default();
    let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, 5)?;
    println!("{:<6} {:>14} {:>14}", "filter", "measured", "closed form");
    for kind in [FilterKind::Ekf, FilterKind::Rbpf, FilterKind::Dbf, FilterKind::Sdbf] {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut filter = build_filter(kind, &sim.scenario, &cfg, 100, &mut rng)?;
        let measured = attach_counter(filter.as_mut(), &sim.truth, &mut rng)?;
        let closed = analytic_flops(kind, &sim.scenario, &cfg, 100).unwrap_or(f64::NAN);
        println!("{:<6} {measured:>14.1} {closed:>14.1}", kind.name());
    }
    Ok(())
}
