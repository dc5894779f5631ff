//! Objective and gradient oracles for the relaxation family, plus
//! complementation, the connection inequality between the linx and
//! factorization bounds, certified lower-bound extraction, and the
//! integrality-gap constant of the o-scaled linx bound.
//!
//! All oracles are pure functions of an immutable [`Instance`] and may be
//! evaluated concurrently.

mod gamma;
mod linx;

pub use gamma::{gamma_c_oracle, gamma_oracle, gamma_star_oracle};
pub use linx::{linx_d_oracle, linx_g_oracle, linx_o_oracle, linx_oracle};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{MespError, Result};
use crate::instance::Instance;
use crate::spectral::{critical_index, sorted_eigenvalues};

/// Feasibility slack for membership in the capped simplex.
pub const TOL_FEAS: f64 = 1e-8;

/// A point of the saddle formulations: selection vector plus the two
/// log-scaling blocks.
#[derive(Clone, Debug)]
pub struct ScalingPoint {
    pub x: DVector<f64>,
    pub rho: DVector<f64>,
    pub omega: DVector<f64>,
}

impl ScalingPoint {
    /// Zero scalings at the given selection vector.
    pub fn unscaled(x: DVector<f64>) -> Self {
        let d = x.len();
        ScalingPoint {
            x,
            rho: DVector::zeros(d),
            omega: DVector::zeros(d),
        }
    }
}

/// Objective value plus whichever gradient blocks the oracle carries.
#[derive(Clone, Debug)]
pub struct OracleOutput {
    pub value: f64,
    pub grad_x: DVector<f64>,
    /// Gradient in the first scaling block; a length-1 vector for the
    /// scalar o-scaling parameter.
    pub grad_rho: Option<DVector<f64>>,
    /// Gradient in the second scaling block.
    pub grad_omega: Option<DVector<f64>>,
    /// Gradient in the mixing weight (gamma-star only).
    pub grad_alpha: Option<f64>,
}

impl OracleOutput {
    pub(crate) fn check_finite(self) -> Result<Self> {
        let ok = self.value.is_finite()
            && self.grad_x.iter().all(|v| v.is_finite())
            && self.grad_rho.iter().flatten().all(|v| v.is_finite())
            && self.grad_omega.iter().flatten().all(|v| v.is_finite())
            && self.grad_alpha.iter().all(|v| v.is_finite());
        if ok {
            Ok(self)
        } else {
            Err(MespError::OutOfRange(
                "oracle produced a non-finite value or gradient".into(),
            ))
        }
    }
}

/// The relaxations the solvers and the command line know about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Gamma,
    GammaC,
    GammaStar,
    Linx,
    LinxO,
    LinxG,
    LinxD,
    /// g-scaled factorization bound (used by verification reports).
    GammaG,
    /// g-scaled complementary factorization bound.
    GammaCG,
}

impl Method {
    /// The seven methods exposed on the command line, in canonical order.
    pub const CLI: [Method; 7] = [
        Method::Gamma,
        Method::GammaC,
        Method::GammaStar,
        Method::Linx,
        Method::LinxO,
        Method::LinxG,
        Method::LinxD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gamma => "gamma",
            Method::GammaC => "gamma-c",
            Method::GammaStar => "gamma-star",
            Method::Linx => "linx",
            Method::LinxO => "linx-o",
            Method::LinxG => "linx-g",
            Method::LinxD => "linx-d",
            Method::GammaG => "gamma-g",
            Method::GammaCG => "gamma-c-g",
        }
    }

    /// Does this method carry a scaling block solved as a saddle point?
    pub fn is_saddle(self) -> bool {
        !matches!(self, Method::Gamma | Method::GammaC | Method::Linx)
    }

    /// Dimension of the scaling block for a problem of dimension `d`.
    pub fn scaling_dim(self, d: usize) -> usize {
        match self {
            Method::Gamma | Method::GammaC | Method::Linx => 0,
            Method::GammaStar | Method::LinxO => 1,
            Method::GammaG | Method::GammaCG | Method::LinxG => d,
            Method::LinxD => 2 * d,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = MespError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Method::Gamma),
            "gamma-c" => Ok(Method::GammaC),
            "gamma-star" => Ok(Method::GammaStar),
            "linx" => Ok(Method::Linx),
            "linx-o" => Ok(Method::LinxO),
            "linx-g" => Ok(Method::LinxG),
            "linx-d" => Ok(Method::LinxD),
            "gamma-g" => Ok(Method::GammaG),
            "gamma-c-g" => Ok(Method::GammaCG),
            other => Err(MespError::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// Scaling values frozen for certification or dispatch.
#[derive(Clone, Debug)]
pub enum FrozenScaling {
    None,
    Scalar(f64),
    Vector(DVector<f64>),
    Pair(DVector<f64>, DVector<f64>),
}

impl FrozenScaling {
    /// Stack the scaling into a flat vector (solver layout).
    pub fn to_stacked(&self) -> DVector<f64> {
        match self {
            FrozenScaling::None => DVector::zeros(0),
            FrozenScaling::Scalar(a) => DVector::from_element(1, *a),
            FrozenScaling::Vector(v) => v.clone(),
            FrozenScaling::Pair(a, b) => {
                DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
            }
        }
    }

    /// Rebuild from the solver's flat layout for the given method.
    pub fn from_stacked(method: Method, d: usize, u: &DVector<f64>) -> Result<Self> {
        let expect = method.scaling_dim(d);
        if u.len() != expect {
            return Err(MespError::LengthMismatch {
                left: u.len(),
                right: expect,
            });
        }
        Ok(match method {
            Method::Gamma | Method::GammaC | Method::Linx => FrozenScaling::None,
            Method::GammaStar | Method::LinxO => FrozenScaling::Scalar(u[0]),
            Method::GammaG | Method::GammaCG | Method::LinxG => FrozenScaling::Vector(u.clone()),
            Method::LinxD => FrozenScaling::Pair(
                DVector::from_iterator(d, u.iter().take(d).copied()),
                DVector::from_iterator(d, u.iter().skip(d).copied()),
            ),
        })
    }
}

/// Evaluate any method's objective at a selection point with the scaling
/// frozen. This is the single dispatch used by solvers, certification, and
/// the bench harness.
pub fn eval_method(
    inst: &Instance,
    method: Method,
    x: &DVector<f64>,
    scaling: &FrozenScaling,
) -> Result<OracleOutput> {
    let d = inst.dim();
    let zero = || DVector::zeros(d);
    match (method, scaling) {
        (Method::Gamma, FrozenScaling::None) => gamma_oracle(inst, x, &zero()),
        (Method::GammaG, FrozenScaling::Vector(rho)) => gamma_oracle(inst, x, rho),
        (Method::GammaC, FrozenScaling::None) => gamma_c_oracle(inst, x, &zero()),
        (Method::GammaCG, FrozenScaling::Vector(omega)) => gamma_c_oracle(inst, x, omega),
        (Method::GammaStar, FrozenScaling::Scalar(alpha)) => gamma_star_oracle(inst, x, *alpha),
        (Method::Linx, FrozenScaling::None) => linx_oracle(inst, x),
        (Method::LinxO, FrozenScaling::Scalar(rho0)) => linx_o_oracle(inst, x, *rho0),
        (Method::LinxG, FrozenScaling::Vector(rho)) => linx_g_oracle(inst, x, rho),
        (Method::LinxD, FrozenScaling::Pair(rho, omega)) => {
            let p = ScalingPoint {
                x: x.clone(),
                rho: rho.clone(),
                omega: omega.clone(),
            };
            linx_d_oracle(inst, &p)
        }
        (m, s) => Err(MespError::OutOfRange(format!(
            "method {m} cannot be evaluated with scaling {s:?}"
        ))),
    }
}

/// Exact objective at a binary selection: `-log det C[S,S]`, computed from
/// the eigenvalues of the `s x s` principal submatrix.
pub fn mesp_objective(inst: &Instance, x: &DVector<f64>) -> Result<f64> {
    let d = inst.dim();
    if x.len() != d {
        return Err(MespError::LengthMismatch {
            left: x.len(),
            right: d,
        });
    }
    let mut subset = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if (v - 1.0).abs() <= 1e-9 {
            subset.push(i);
        } else if v.abs() > 1e-9 {
            return Err(MespError::InfeasibleBinary {
                cardinality: usize::MAX,
                expected: inst.subset_size(),
            });
        }
    }
    if subset.len() != inst.subset_size() {
        return Err(MespError::InfeasibleBinary {
            cardinality: subset.len(),
            expected: inst.subset_size(),
        });
    }
    let s = subset.len();
    let c = inst.covariance();
    let sub = nalgebra::DMatrix::from_fn(s, s, |i, j| c[(subset[i], subset[j])]);
    let spec = sorted_eigenvalues(&sub).map_err(|_| MespError::SingularSubmatrix)?;
    let top = spec.lambda[0].max(f64::MIN_POSITIVE);
    let mut value = 0.0;
    for &ev in spec.lambda.iter() {
        if ev <= 1e-12 * top {
            return Err(MespError::SingularSubmatrix);
        }
        value -= ev.ln();
    }
    Ok(value)
}

/// The complementary instance: covariance `C^{-1}` with factor `V^{-T}` and
/// subset size `d - s`. Any bound `B` for the complementary problem maps to
/// `B - log det C` for the original; equivalently `B + log det C'` where
/// `C'` is the complementary instance's own covariance.
pub fn complementary_instance(inst: &Instance) -> Result<Instance> {
    let d = inst.dim();
    let s = inst.subset_size();
    if s >= d {
        return Err(MespError::OutOfRange(format!(
            "complementary subset size d - s = {} must be at least 1",
            d - s
        )));
    }
    let w = inst.inverse_factor()?.clone();
    let comp = Instance::from_factor(w, d - s, None)?;
    Ok(comp.with_known_opt(inst.known_opt().map(|o| o + inst.logdet_c())))
}

/// Result of the connection inequality between the double-scaled linx
/// objective and the average of the two g-scaled factorization objectives.
#[derive(Clone, Copy, Debug)]
pub struct KappaConnection {
    /// Shift `log(tau(P) / tau(M))` applied to the rho block.
    pub kappa: f64,
    /// Double-scaled linx objective at `(x, rho + kappa * 1, omega)`.
    pub lhs: f64,
    /// Average of the g-scaled factorization and complementary objectives.
    pub rhs: f64,
}

/// Evaluate the connection inequality `lhs >= rhs` pointwise. The shift is
/// the log-ratio of the tail means of the complementary-side and primal-side
/// scaled factor matrices.
pub fn connection_kappa(
    inst: &Instance,
    x: &DVector<f64>,
    rho: &DVector<f64>,
    omega: &DVector<f64>,
) -> Result<KappaConnection> {
    let d = inst.dim();
    let s = inst.subset_size();
    if s >= d {
        return Err(MespError::OutOfRange(
            "connection requires 1 <= s <= d - 1".into(),
        ));
    }
    let v = inst.factor();
    let w = inst.inverse_factor()?;

    let weighted = |f: &nalgebra::DMatrix<f64>, wts: &DVector<f64>| {
        let mut scaled = f.clone();
        for j in 0..d {
            let mut col = scaled.column_mut(j);
            col *= wts[j];
        }
        let m = &scaled * f.transpose();
        (&m + m.transpose()) * 0.5
    };

    let wm = DVector::from_fn(d, |i, _| rho[i].exp() * x[i]);
    let wp = DVector::from_fn(d, |i, _| omega[i].exp() * (1.0 - x[i]));
    let m = weighted(v, &wm);
    let p = weighted(w, &wp);

    let tau_m = critical_index(sorted_eigenvalues(&m)?.lambda.as_slice(), s)?.tail_mean;
    let tau_p = critical_index(sorted_eigenvalues(&p)?.lambda.as_slice(), d - s)?.tail_mean;
    let kappa = (tau_p / tau_m).ln();

    let shifted = ScalingPoint {
        x: x.clone(),
        rho: rho.add_scalar(kappa),
        omega: omega.clone(),
    };
    let lhs = linx_d_oracle(inst, &shifted)?.value;
    let rhs = 0.5 * (gamma_oracle(inst, x, rho)?.value + gamma_c_oracle(inst, x, omega)?.value);
    Ok(KappaConnection { kappa, lhs, rhs })
}

fn check_feasible(x: &DVector<f64>, s: usize) -> Result<()> {
    let sum: f64 = x.iter().sum();
    if x.iter()
        .any(|&v| !(-TOL_FEAS..=1.0 + TOL_FEAS).contains(&v))
    {
        return Err(MespError::InfeasibleXHat("component outside [0, 1]".into()));
    }
    if (sum - s as f64).abs() > TOL_FEAS * x.len() as f64 {
        return Err(MespError::InfeasibleXHat(format!(
            "sum {} differs from subset size {}",
            sum, s
        )));
    }
    Ok(())
}

/// Certified lower bound: with the scaling frozen, the objective is convex
/// in the selection vector and still a valid relaxation, so
/// `f(x) + min over the capped simplex of <grad, . - x>` bounds the optimum
/// from below regardless of how accurate the solve was. The linearization
/// minimum is the sum of the `s` smallest gradient components.
pub fn valid_lower_bound(
    inst: &Instance,
    method: Method,
    x_hat: &DVector<f64>,
    scaling: &FrozenScaling,
) -> Result<f64> {
    check_feasible(x_hat, inst.subset_size())?;
    let out = eval_method(inst, method, x_hat, scaling)?;
    Ok(linearization_bound(
        out.value,
        &out.grad_x,
        x_hat,
        inst.subset_size(),
    ))
}

/// `value + min_{x in X} <g, x - x_hat>` over the capped simplex.
pub(crate) fn linearization_bound(
    value: f64,
    grad: &DVector<f64>,
    x_hat: &DVector<f64>,
    s: usize,
) -> f64 {
    let mut g: Vec<f64> = grad.iter().copied().collect();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_lin: f64 = g.iter().take(s).sum();
    value - grad.dot(x_hat) + min_lin
}

/// Natural log of the gamma function, Lanczos approximation (g = 7, n = 9).
/// Accurate to about 1e-13 relative for positive arguments.
#[allow(clippy::excessive_precision)]
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    let z = x - 1.0;
    let base = z + 7.5;
    let mut sum = 0.999_999_999_999_809_93;
    for (i, c) in COEFFS.iter().enumerate() {
        sum += c / (z + (i + 1) as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * base.ln() - base + sum.ln()
}

fn ln_binomial(d: usize, s: usize) -> f64 {
    ln_gamma(d as f64 + 1.0) - ln_gamma(s as f64 + 1.0) - ln_gamma((d - s) as f64 + 1.0)
}

/// The amount by which the o-scaled linx bound may fall below the exact
/// optimum: `(s ln s + (d-s) ln(d-s) - d ln d) / 2 + ln C(d, s)`.
pub fn integrality_gap_constant(d: usize, s: usize) -> Result<f64> {
    if d < 2 || s == 0 || s >= d {
        return Err(MespError::OutOfRange(format!(
            "need 1 <= s <= d - 1, got s={s}, d={d}"
        )));
    }
    let (df, sf, rf) = (d as f64, s as f64, (d - s) as f64);
    Ok(0.5 * (sf * sf.ln() + rf * rf.ln() - df * df.ln()) + ln_binomial(d, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_4x4, synthetic_instance, SyntheticSpec};
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mesp_objective_reference_values() {
        let inst = example_4x4();
        let cases: [(&[f64; 4], f64); 6] = [
            (&[1.0, 1.0, 0.0, 0.0], 0.0),
            (&[1.0, 0.0, 1.0, 0.0], 0.0),
            (&[1.0, 0.0, 0.0, 1.0], 0.0),
            (&[0.0, 1.0, 1.0, 0.0], -(2.0f64.ln())),
            (&[0.0, 1.0, 0.0, 1.0], -(2.0f64.ln())),
            (&[0.0, 0.0, 1.0, 1.0], 0.0),
        ];
        for (x, want) in cases {
            let got = mesp_objective(&inst, &DVector::from_row_slice(x)).unwrap();
            assert!(
                (got - want).abs() < 1e-12,
                "x={x:?}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn mesp_objective_identity_and_errors() {
        let inst = Instance::new(&DMatrix::identity(5, 5), 3, None).unwrap();
        let x = DVector::from_row_slice(&[1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(mesp_objective(&inst, &x).unwrap().abs() < 1e-14);

        let bad_card = DVector::from_row_slice(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            mesp_objective(&inst, &bad_card),
            Err(MespError::InfeasibleBinary {
                cardinality: 2,
                expected: 3
            })
        ));
        let fractional = DVector::from_row_slice(&[0.5, 0.5, 1.0, 0.5, 0.5]);
        assert!(matches!(
            mesp_objective(&inst, &fractional),
            Err(MespError::InfeasibleBinary { .. })
        ));

        // Singular submatrix.
        let mut c = DMatrix::zeros(3, 3);
        c[(0, 0)] = 1.0;
        c[(0, 1)] = 1.0;
        c[(1, 0)] = 1.0;
        c[(1, 1)] = 1.0;
        c[(2, 2)] = 1.0;
        let inst = Instance::new(&c, 2, None).unwrap();
        let x = DVector::from_row_slice(&[1.0, 1.0, 0.0]);
        assert!(matches!(
            mesp_objective(&inst, &x),
            Err(MespError::SingularSubmatrix)
        ));
    }

    #[test]
    fn complementary_instance_cases() {
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 0.5]));
        let inst = Instance::new(&c, 1, None).unwrap();
        let comp = complementary_instance(&inst).unwrap();
        assert_eq!(comp.subset_size(), 1);
        assert!((comp.covariance()[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((comp.covariance()[(1, 1)] - 2.0).abs() < 1e-12);
        assert!(inst.logdet_c().abs() < 1e-12);

        // Double complementation is the identity up to round-off.
        let spec = SyntheticSpec::with_condition(6, 4, 5.0);
        let inst = synthetic_instance(&spec, 2).unwrap();
        let back = complementary_instance(&complementary_instance(&inst).unwrap()).unwrap();
        assert_eq!(back.subset_size(), 2);
        assert!((back.covariance() - inst.covariance()).amax() < 1e-10 * inst.covariance().amax());
    }

    #[test]
    fn integrality_gap_constant_values() {
        assert!(integrality_gap_constant(2, 1).unwrap().abs() < 1e-12);
        let got = integrality_gap_constant(4, 2).unwrap();
        assert!((got - 1.5f64.ln()).abs() < 1e-12);
        // Symmetric in s <-> d - s.
        for d in 3..12 {
            for s in 1..d {
                let a = integrality_gap_constant(d, s).unwrap();
                let b = integrality_gap_constant(d, d - s).unwrap();
                assert!((a - b).abs() < 1e-11);
            }
        }
        assert!(matches!(
            integrality_gap_constant(4, 0),
            Err(MespError::OutOfRange(_))
        ));
        assert!(matches!(
            integrality_gap_constant(4, 4),
            Err(MespError::OutOfRange(_))
        ));
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut ln_fact = 0.0;
        for n in 1..=30usize {
            ln_fact += (n as f64).ln();
            let got = ln_gamma(n as f64 + 1.0);
            assert!((got - ln_fact).abs() < 1e-11 * (1.0 + ln_fact), "n={n}");
        }
        assert!((ln_binomial(10, 5) - 252.0f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn valid_lower_bound_properties() {
        let inst = example_4x4();
        // Zero-gradient fixed point: bound equals the value.
        // Use a quadratic-free scenario: gamma at different feasible points.
        let x = DVector::from_row_slice(&[0.5, 0.5, 0.5, 0.5]);
        let lb = valid_lower_bound(&inst, Method::Gamma, &x, &FrozenScaling::None).unwrap();
        // The bound is below the objective at every feasible binary point.
        for bits in [
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 1.0],
        ] {
            let val = mesp_objective(&inst, &DVector::from_row_slice(&bits)).unwrap();
            assert!(lb <= val + 1e-9);
        }
        // Bound is below the convex objective at random feasible points.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let raw = DVector::from_fn(4, |_, _| rng.random_range(-1.0..2.0));
            let xf = crate::solver::project_capped_simplex(&raw, 2).unwrap();
            let val = eval_method(&inst, Method::Gamma, &xf, &FrozenScaling::None)
                .unwrap()
                .value;
            assert!(lb <= val + 1e-9);
        }

        let infeasible = DVector::from_row_slice(&[2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            valid_lower_bound(&inst, Method::Gamma, &infeasible, &FrozenScaling::None),
            Err(MespError::InfeasibleXHat(_))
        ));
    }

    #[test]
    fn valid_lower_bound_tight_at_grid_minimizer() {
        // d = 3, s = 1: minimize the factorization objective by brute grid.
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0, 4.0]));
        let inst = Instance::new(&c, 1, None).unwrap();
        let mut best = (f64::INFINITY, DVector::zeros(3));
        let n = 400;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let x = DVector::from_row_slice(&[
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    (n - i - j) as f64 / n as f64,
                ]);
                let v = eval_method(&inst, Method::Gamma, &x, &FrozenScaling::None)
                    .unwrap()
                    .value;
                if v < best.0 {
                    best = (v, x);
                }
            }
        }
        let lb = valid_lower_bound(&inst, Method::Gamma, &best.1, &FrozenScaling::None).unwrap();
        assert!((lb - best.0).abs() < 1e-4, "lb={lb} grid={}", best.0);
        // g = 0 case: bound equals value by construction.
        let g = DVector::zeros(3);
        let b = linearization_bound(1.23, &g, &best.1, 1);
        assert!((b - 1.23).abs() < 1e-15);
    }

    #[test]
    fn connection_inequality_random_and_unscaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for trial in 0..200 {
            let d = rng.random_range(4..=10);
            let s = rng.random_range(1..d);
            let spec = SyntheticSpec::with_condition(d, 500 + trial, 6.0);
            let inst = synthetic_instance(&spec, s).unwrap();
            let raw = DVector::from_fn(d, |_, _| rng.random_range(-1.0..2.0));
            let x = crate::solver::project_capped_simplex(&raw, s).unwrap();
            // Keep components interior so both factor matrices have full tails.
            let x = x * 0.9 + DVector::from_element(d, 0.1 * s as f64 / d as f64);
            let rho = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
            let omega = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
            let conn = connection_kappa(&inst, &x, &rho, &omega).unwrap();
            assert!(
                conn.lhs >= conn.rhs - 1e-8,
                "trial {trial}: lhs={} rhs={}",
                conn.lhs,
                conn.rhs
            );
        }

        // rho = omega = 0 specializes to the unscaled pointwise engine.
        let inst = synthetic_instance(&SyntheticSpec::with_condition(6, 3, 4.0), 3).unwrap();
        let x = DVector::from_element(6, 0.5);
        let zero = DVector::zeros(6);
        let conn = connection_kappa(&inst, &x, &zero, &zero).unwrap();
        assert!(conn.lhs >= conn.rhs - 1e-10);

        // Identity covariance: equality diagnostics.
        let inst = Instance::new(&DMatrix::identity(6, 6), 3, None).unwrap();
        let x = DVector::from_element(6, 0.5);
        let conn = connection_kappa(&inst, &x, &zero, &zero).unwrap();
        assert!(conn.lhs >= conn.rhs - 1e-10);
        assert!(
            (conn.lhs - conn.rhs).abs() < 1e-6,
            "symmetric case is tight"
        );
    }

    #[test]
    fn method_parsing_roundtrip() {
        for m in Method::CLI {
            let back: Method = m.name().parse().unwrap();
            assert_eq!(back, m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn complement_identity_through_complementary_instance() {
        // Opt(C, s) = Opt(C^{-1}, d - s) - log det C, with both sides
        // enumerated exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        for trial in 0..20 {
            let d = rng.random_range(4..=8);
            let s = rng.random_range(1..d);
            let spec = SyntheticSpec::with_condition(d, 700 + trial, 7.0);
            let inst = synthetic_instance(&spec, s).unwrap();
            let comp = complementary_instance(&inst).unwrap();
            let (opt, _) = crate::instance::brute_force_opt(&inst).unwrap();
            let (opt_comp, _) = crate::instance::brute_force_opt(&comp).unwrap();
            assert!(
                (opt - (opt_comp - inst.logdet_c())).abs() < 1e-10,
                "trial {trial}: {opt} vs {}",
                opt_comp - inst.logdet_c()
            );
        }
    }

    #[test]
    fn every_oracle_midpoint_convex_in_selection() {
        // Midpoint convexity of each oracle's value in x at fixed scaling.
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let d = 6;
        let s = 3;
        let inst = synthetic_instance(&SyntheticSpec::with_condition(d, 800, 6.0), s).unwrap();
        let scalings: Vec<(Method, FrozenScaling)> = vec![
            (Method::Gamma, FrozenScaling::None),
            (Method::GammaC, FrozenScaling::None),
            (Method::GammaStar, FrozenScaling::Scalar(0.4)),
            (Method::Linx, FrozenScaling::None),
            (Method::LinxO, FrozenScaling::Scalar(0.3)),
            (
                Method::LinxG,
                FrozenScaling::Vector(DVector::from_fn(d, |i, _| 0.1 * (i as f64 - 2.0))),
            ),
            (
                Method::GammaG,
                FrozenScaling::Vector(DVector::from_fn(d, |i, _| 0.05 * (3.0 - i as f64))),
            ),
            (
                Method::GammaCG,
                FrozenScaling::Vector(DVector::from_fn(d, |i, _| 0.07 * (i as f64 - 2.5))),
            ),
            (
                Method::LinxD,
                FrozenScaling::Pair(
                    DVector::from_fn(d, |i, _| 0.1 * (i as f64 - 3.0)),
                    DVector::from_fn(d, |i, _| -0.08 * (i as f64 - 2.0)),
                ),
            ),
        ];
        for (method, scaling) in &scalings {
            for _ in 0..500 {
                let x1 = {
                    let raw = DVector::from_fn(d, |_, _| rng.random_range(-1.0..2.0));
                    crate::solver::project_capped_simplex(&raw, s).unwrap()
                };
                let x2 = {
                    let raw = DVector::from_fn(d, |_, _| rng.random_range(-1.0..2.0));
                    crate::solver::project_capped_simplex(&raw, s).unwrap()
                };
                let at = |x: &DVector<f64>| eval_method(&inst, *method, x, scaling).unwrap().value;
                let slack = 0.5 * (at(&x1) + at(&x2)) - at(&((&x1 + &x2) * 0.5));
                assert!(slack >= -1e-9, "{method}: midpoint convexity slack {slack}");
            }
        }
    }
}
