//! Every example must keep running against the current API.

macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " failed"));
        }
    };
}

example!(saliency_metrics, saliency_metrics_runs, "saliency_metrics.rs");
example!(rddt_test, rddt_test_runs, "rddt_test.rs");
example!(fairness, fairness_runs, "fairness.rs");
example!(attribution, attribution_runs, "attribution.rs");
example!(threshold_optimization, threshold_optimization_runs, "threshold_optimization.rs");
example!(cav_projection, cav_projection_runs, "cav_projection.rs");
example!(synthetic_data, synthetic_data_runs, "synthetic_data.rs");
example!(file_formats, file_formats_runs, "file_formats.rs");
example!(experiment, experiment_runs, "experiment.rs");
