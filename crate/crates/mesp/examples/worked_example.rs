//! The 4x4 reference instance end to end: exact subset objectives, the
//! envelope value at a fractional point, the enumerated optimum, and
//! certified bounds from every relaxation.
//!
//! Run with: `cargo run --release --example worked_example`

use mesp::instance::{brute_force_opt, example_4x4};
use mesp::relax::{gamma_oracle, mesp_objective, Method};
use mesp::solver::{solve_method, SolverConfig};
use nalgebra::DVector;

fn main() {
    let inst = example_4x4();
    println!("covariance:\n{}", inst.covariance());

    println!("objective at every feasible binary selection:");
    for mask in 0u32..16 {
        if mask.count_ones() != 2 {
            continue;
        }
        let x = DVector::from_fn(4, |i, _| f64::from((mask >> i) & 1));
        let value = mesp_objective(&inst, &x).unwrap();
        println!("  x = {:?}  ->  {value:+.6}", x.as_slice());
    }

    let (opt, argmin) = brute_force_opt(&inst).unwrap();
    println!("enumerated optimum: {opt:+.6} at {:?}", argmin.as_slice());

    // The envelope relaxation evaluated at a fractional point beats the
    // optimum, showing the relaxation is strictly below the integer hull.
    let x = DVector::from_row_slice(&[1.0, 0.5, 0.25, 0.25]);
    let value = gamma_oracle(&inst, &x, &DVector::zeros(4)).unwrap().value;
    println!("envelope value at x = {:?}: {value:+.6}", x.as_slice());

    println!("\ncertified lower bounds (all must be <= {opt:+.6}):");
    let cfg = SolverConfig {
        max_iters: 2000,
        ..Default::default()
    };
    for method in Method::CLI {
        let res = solve_method(&inst, method, &cfg).unwrap();
        println!(
            "  {:<11} lb = {:+.9}   gap to optimum = {:.2e}   ({} iters)",
            method.name(),
            res.lower_bound,
            opt - res.lower_bound,
            res.iterations
        );
    }
}
