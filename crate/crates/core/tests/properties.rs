//! Invariants of the analytic engine over randomized inputs.

use proptest::prelude::*;
use riscov::analysis::{association_any, association_low_ris_any, AnalyticEngine, LaplaceEvaluator};
use riscov::config::reference_config;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transforms_are_probabilities_and_decrease(ln_s in 0.0f64..40.0, step in 0.1f64..3.0, r0 in 0.05f64..5.0) {
        let cfg = reference_config();
        let ev = LaplaceEvaluator::new(&cfg);
        for f in [LaplaceEvaluator::direct_ln, LaplaceEvaluator::ris_ln] {
            let lo = f(&ev, ln_s, r0).unwrap().value;
            let hi = f(&ev, ln_s + step, r0).unwrap().value;
            prop_assert!(lo > 0.0 && lo <= 1.0);
            prop_assert!(hi <= lo + 1e-9);
        }
    }

    #[test]
    fn association_partitions_unity(lambda_b in 0.0f64..6.0, h_r in 1.05f64..2.9, r0 in 0.0f64..10.0, z0 in 0.0f64..10.0) {
        let cfg = reference_config().with("lambda_b", lambda_b).unwrap().with("h_r", h_r).unwrap();
        let a = association_any(&cfg, r0);
        prop_assert!((a.sum() - 1.0).abs() < 1e-12);
        let l = association_low_ris_any(&cfg, r0, z0);
        prop_assert!((l.breakdown.sum() - 1.0).abs() < 1e-12);
        prop_assert!((l.direct_ap_ris_blocked + l.direct_ris_ue_blocked - l.breakdown.direct).abs() < 1e-15);
    }

    #[test]
    fn conditional_coverage_is_a_probability(r0 in 0.05f64..8.0, phi0 in 0.0f64..std::f64::consts::PI) {
        let cfg = reference_config();
        let c = AnalyticEngine::new(&cfg).conditional(r0, phi0).unwrap();
        for p in [c.direct, c.ris, c.composite] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
