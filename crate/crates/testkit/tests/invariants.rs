use proptest::prelude::*;
use testkit::suites::{invariants, leakage_guard};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attention_gates_and_relabeling(seed in any::<u64>()) {
        let report = invariants(4, seed);
        prop_assert!(report.alpha_sum_deviation < 1e-9, "{:?}", report);
        prop_assert!(report.gates_in_range, "{:?}", report);
        prop_assert!(report.permutation_error < 1e-9, "{:?}", report);
    }
}

#[test]
fn splits_and_training_never_see_the_test_snapshot() {
    for seed in 0..3 {
        assert!(leakage_guard(seed));
    }
}
