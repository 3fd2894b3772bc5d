//! Property tests for the run-length decision rule: detection is monotone in
//! both the threshold and the required run length, and a reported detection
//! index really is the end of a qualifying run.

use ctmc_hums_core::decision::{detect, DecisionRule};
use proptest::prelude::*;

fn prob_sequences() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 0..200)
}

fn rule(threshold: f64, run_length: usize) -> DecisionRule<f64> {
    DecisionRule { threshold, run_length, target_state: 1 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Raising the threshold can only delay or suppress detection.
    #[test]
    fn detection_is_monotone_in_threshold(
        probs in prob_sequences(),
        t_lo in 0.05f64..0.95,
        bump in 0.0f64..0.04,
        run_length in 1usize..6,
    ) {
        let t_hi = t_lo + bump;
        let lo = detect(&probs, &rule(t_lo, run_length)).unwrap();
        let hi = detect(&probs, &rule(t_hi, run_length)).unwrap();
        if let Some(k_hi) = hi.detection_index {
            let k_lo = lo
                .detection_index
                .expect("fired at the higher threshold but not the lower");
            prop_assert!(k_lo <= k_hi, "lower threshold fired later: {k_lo} > {k_hi}");
        }
    }

    /// Requiring a longer run can only delay or suppress detection.
    #[test]
    fn detection_is_monotone_in_run_length(
        probs in prob_sequences(),
        threshold in 0.05f64..0.95,
        r_lo in 1usize..6,
        extra in 0usize..4,
    ) {
        let r_hi = r_lo + extra;
        let lo = detect(&probs, &rule(threshold, r_lo)).unwrap();
        let hi = detect(&probs, &rule(threshold, r_hi)).unwrap();
        if let Some(k_hi) = hi.detection_index {
            let k_lo = lo
                .detection_index
                .expect("fired at the longer run length but not the shorter");
            prop_assert!(k_lo <= k_hi, "shorter run fired later: {k_lo} > {k_hi}");
        }
    }

    /// A reported index is the first end of `run_length` consecutive points
    /// at or above the threshold.
    #[test]
    fn detection_index_ends_the_first_qualifying_run(
        probs in prob_sequences(),
        threshold in 0.05f64..0.95,
        run_length in 1usize..6,
    ) {
        let outcome = detect(&probs, &rule(threshold, run_length)).unwrap();
        // Recompute the first qualifying run by hand.
        let mut run = 0usize;
        let mut expected = None;
        for (k, &p) in probs.iter().enumerate() {
            if p >= threshold {
                run += 1;
                if run >= run_length {
                    expected = Some(k);
                    break;
                }
            } else {
                run = 0;
            }
        }
        prop_assert_eq!(outcome.detection_index, expected);
    }
}
