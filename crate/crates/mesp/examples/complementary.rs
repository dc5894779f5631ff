//! Complementation: selecting s of d columns from C is the mirror image of
//! selecting the other d - s columns from the inverse covariance, up to the
//! constant log det C. The double-scaled linx objective is invariant under
//! this reflection pointwise.
//!
//! Run with: `cargo run --release --example complementary`

use mesp::instance::{brute_force_opt, synthetic_instance, SyntheticSpec};
use mesp::relax::{complementary_instance, connection_kappa, linx_d_oracle, ScalingPoint};
use mesp::solver::project_capped_simplex;
use nalgebra::DVector;

fn main() {
    let d = 6;
    let s = 2;
    let inst = synthetic_instance(&SyntheticSpec::with_condition(d, 17, 5.0), s).unwrap();
    let comp = complementary_instance(&inst).unwrap();

    let (opt, _) = brute_force_opt(&inst).unwrap();
    let (opt_comp, _) = brute_force_opt(&comp).unwrap();
    println!("optimum of the original:                {opt:+.9}");
    println!(
        "complementary optimum - log det C:      {:+.9}",
        opt_comp - inst.logdet_c()
    );

    // Pointwise invariance of the double-scaled objective under
    // complementation with swapped scaling blocks.
    let x = project_capped_simplex(&DVector::from_row_slice(&[0.9, 0.2, 0.7, 0.1, 0.6, 0.4]), s)
        .unwrap();
    let rho = DVector::from_row_slice(&[0.3, -0.2, 0.1, 0.0, -0.4, 0.2]);
    let omega = DVector::from_row_slice(&[-0.1, 0.2, -0.3, 0.4, 0.0, 0.1]);
    let original = linx_d_oracle(
        &inst,
        &ScalingPoint {
            x: x.clone(),
            rho: rho.clone(),
            omega: omega.clone(),
        },
    )
    .unwrap()
    .value;
    let reflected = linx_d_oracle(
        &comp,
        &ScalingPoint {
            x: DVector::from_fn(d, |i, _| 1.0 - x[i]),
            rho: omega.clone(),
            omega: rho.clone(),
        },
    )
    .unwrap()
    .value
        - inst.logdet_c();
    println!("double-scaled objective:                {original:+.9}");
    println!("reflected complementary objective:      {reflected:+.9}");

    // The connection inequality tying the linx and factorization families.
    let conn = connection_kappa(&inst, &x, &rho, &omega).unwrap();
    println!(
        "connection: shift kappa = {:+.4}, lhs = {:+.6} >= rhs = {:+.6}",
        conn.kappa, conn.lhs, conn.rhs
    );
}
