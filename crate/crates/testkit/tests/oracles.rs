use testkit::suites::{model_oracles, grad_check_pipeline, metric_oracles};

#[test]
fn pipeline_gradients_match_central_differences() {
    let report = grad_check_pipeline(100, 0xD1FF);
    assert_eq!(report.instances, 100);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn model_functions_match_scalar_rederivations() {
    for check in model_oracles(60, 0xE0) {
        assert_eq!(check.instances, 60);
        assert!(check.max_rel_error < 1e-10, "{check:?}");
    }
}

#[test]
fn metrics_match_brute_force() {
    for check in metric_oracles(1000, 0x3E7) {
        assert!(check.max_abs_error < 1e-9, "{check:?}");
    }
}
