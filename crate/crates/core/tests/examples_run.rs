//! Every example's `run_example` completes.

macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(quickstart, quickstart_runs, "quickstart.rs");
example!(conjugate_dlm, conjugate_dlm_runs, "conjugate_dlm.rs");
example!(recouple_decouple, recouple_decouple_runs, "recouple_decouple.rs");
example!(har_cascade, har_cascade_runs, "har_cascade.rs");
example!(variogram, variogram_runs, "variogram.rs");
example!(parent_sets, parent_sets_runs, "parent_sets.rs");
example!(signals_backtest, signals_backtest_runs, "signals_backtest.rs");
example!(metrics_compare, metrics_compare_runs, "metrics_compare.rs");
example!(config_file, config_file_runs, "config_file.rs");
example!(replay, replay_runs, "replay.rs");
example!(simulate, simulate_runs, "simulate.rs");
