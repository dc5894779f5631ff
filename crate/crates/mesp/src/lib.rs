//! Lower bounds for maximum-entropy sampling.
//!
//! Given a positive semidefinite covariance `C` and a subset size `s`, the
//! maximum-entropy sampling problem selects the `s`-subset `S` maximizing
//! `log det C[S,S]`; everything here works with the equivalent minimization
//! of `-log det C[S,S]`. The library provides:
//!
//! - **Spectral core** ([`spectral`]): sorted eigendecompositions,
//!   majorization tests, and the closed-form convex envelope of the
//!   truncated spectral sum with its subgradients, via critical-index
//!   water-filling.
//! - **Relaxation oracles** ([`relax`]): the factorization (spectral
//!   envelope) bound, its complementary and mixed variants, and the linx
//!   bound with ordinary, generalized, and double scaling, all with exact
//!   gradient blocks; plus certified lower-bound extraction and the
//!   connection inequality relating the two families.
//! - **First-order solvers** ([`solver`]): projected subgradient descent
//!   over the capped simplex and an extragradient saddle-point method with
//!   non-monotone backtracking for the scaled variants.
//! - **Instances** ([`instance`]): matrix file ingestion, deterministic
//!   synthetic generators, a reference 4x4 instance, and a brute-force
//!   exact oracle for small problems.
//! - **Bench harness** ([`bench`]): bound/gap/convergence/time tables,
//!   dominance verification, CSV/JSON export.
//!
//! # Example
//!
//! ```
//! use mesp::instance::example_4x4;
//! use mesp::relax::Method;
//! use mesp::solver::{solve_method, SolverConfig};
//!
//! let inst = example_4x4();
//! let res = solve_method(&inst, Method::LinxD, &SolverConfig::default()).unwrap();
//! // The certified bound can never exceed the exact optimum -ln 2.
//! assert!(res.lower_bound <= -(2.0f64.ln()) + 1e-9);
//! ```

pub mod bench;
pub mod error;
pub mod instance;
pub mod relax;
pub mod solver;
pub mod spectral;

pub use error::{MespError, Result};
pub use instance::Instance;
pub use relax::Method;
pub use solver::SolverConfig;
