//! Every shipped example runs to completion.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run().expect(concat!(stringify!($name), " runs"));
        }
    };
}

example!(diff_and_ces);
example!(report_features);
example!(time_splits_and_metrics);
example!(classical_models);
example!(lsa_reduce);
example!(acgru_train);
example!(function_context);
example!(drift_report);
example!(pu_mining);
example!(report_pipeline);
