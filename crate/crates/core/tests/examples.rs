//! Runs every example so they stay in sync with the library.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));

            #[test]
            fn runs() {
                main();
            }
        }
    };
}

example!(compile_stats);
example!(cost_model);
example!(diamond_inference);
example!(mapping_tables);
example!(parallel_engine);
example!(parse_net);
example!(speedup_sweep);
