//! Property-based checks of the message algebra and the cost models.

mod common;

use mbf::complexity::{flop_ledger, flops_total, Algorithm, Dims};
use proptest::prelude::*;

macro_rules! invariant {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = common::$name() {
                    panic!("{e}");
                }
            }
        )*
    };
}

invariant!(
    product_commutes,
    product_associates,
    correlation_matches_quadrature,
    moment_matching_is_exact,
    weights_normalise,
    resampling_conserves_particle_count,
    first_iteration_feedback_is_neutral,
    seeded_runs_are_bit_identical,
);

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_totals_are_linear_in_iterations(p in 1usize..30, dl in 1usize..10, dn in 0usize..10, np in 1usize..1000) {
        for alg in [Algorithm::Dbf, Algorithm::Sdbf] {
            let t: Vec<f64> = (1..=3).map(|ni| flops_total(alg, &Dims::clg(p, dl, dn, np, ni)).unwrap()).collect();
            prop_assert!(((t[2] - t[1]) - (t[1] - t[0])).abs() < 1e-9 * t[2]);
        }
    }

    #[test]
    fn totals_grow_with_particles(p in 1usize..30, dl in 1usize..10, dn in 0usize..10, np in 1usize..1000) {
        for alg in [Algorithm::Dbf, Algorithm::Sdbf, Algorithm::Rbpf] {
            let a = flops_total(alg, &Dims::clg(p, dl, dn, np, 1)).unwrap();
            let b = flops_total(alg, &Dims::clg(p, dl, dn, np + 1, 1)).unwrap();
            prop_assert!(b > a);
        }
    }

    #[test]
    fn simplified_network_is_cheaper(p in 1usize..30, dl in 1usize..10, dn in 1usize..10, np in 1usize..1000, ni in 1usize..4) {
        let d = Dims::clg(p, dl, dn, np, ni);
        prop_assert!(flops_total(Algorithm::Sdbf, &d).unwrap() < flops_total(Algorithm::Dbf, &d).unwrap());
    }

    #[test]
    fn ledgers_track_dominant_totals(p in 1usize..4, dl in 4usize..10, dn in 4usize..10, np in 100usize..1000) {
        let d = Dims::clg(p, dl, dn, np, 1);
        for alg in [Algorithm::Ekf, Algorithm::Rbpf, Algorithm::Dbf, Algorithm::Sdbf] {
            let total = flops_total(alg, &d).unwrap();
            let ledger = flop_ledger(alg, &d).unwrap();
            prop_assert!((ledger.total - ledger.items.iter().map(|i| i.1).sum::<f64>()).abs() < 1e-9 * ledger.total);
            prop_assert!((ledger.total - total).abs() / total < 0.5, "{:?}: ledger {} total {}", alg, ledger.total, total);
        }
    }
}
