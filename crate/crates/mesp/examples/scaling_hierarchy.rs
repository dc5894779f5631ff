//! Dominance verification on a synthetic instance: the scaling hierarchy of
//! the linx family, the averaged connection inequalities against the
//! factorization bounds, the scaling invariance of the factorization bound,
//! and the integrality-gap inequality.
//!
//! Run with: `cargo run --release --example scaling_hierarchy`

use mesp::bench::{run_verify, InstanceSource, OutputFormat, RunSpec};
use mesp::instance::SyntheticSpec;
use mesp::relax::Method;
use mesp::solver::SolverConfig;

fn main() {
    let spec = RunSpec {
        source: InstanceSource::Synthetic(SyntheticSpec::with_condition(9, 7, 6.0)),
        s_list: vec![3, 5],
        methods: Method::CLI.to_vec(),
        solver: SolverConfig {
            max_iters: 8000,
            ..Default::default()
        },
        format: OutputFormat::Table,
        out: None,
        optima: None,
    };
    let report = run_verify(&spec).expect("verification run");
    for rel in &report.relations {
        println!(
            "{} {:<44} lhs={:+.6} rhs={:+.6}",
            if rel.pass { "PASS" } else { "FAIL" },
            rel.name,
            rel.lhs,
            rel.rhs
        );
    }
    for note in &report.notes {
        println!("note {note}");
    }
    std::process::exit(if report.all_pass() { 0 } else { 2 });
}
