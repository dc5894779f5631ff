//! Bound/gap/convergence/time table for all seven methods on a synthetic
//! instance, the library-level equivalent of `mesp bound`.
//!
//! Run with: `cargo run --release --example bound_table`

use mesp::bench::{rows_to_table, run_bounds, InstanceSource, OutputFormat, RunSpec};
use mesp::instance::SyntheticSpec;
use mesp::relax::Method;
use mesp::solver::SolverConfig;

fn main() {
    let spec = RunSpec {
        source: InstanceSource::Synthetic(SyntheticSpec::with_condition(10, 42, 8.0)),
        s_list: vec![3, 5, 7],
        methods: Method::CLI.to_vec(),
        solver: SolverConfig {
            max_iters: 2000,
            ..Default::default()
        },
        format: OutputFormat::Table,
        out: None,
        optima: None,
    };
    let rows = run_bounds(&spec).expect("bound run");
    print!("{}", rows_to_table(&rows));
}
