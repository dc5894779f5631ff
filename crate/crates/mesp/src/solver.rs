//! First-order solvers over the capped simplex: projected (Euclidean-mirror)
//! subgradient descent for the convex relaxations, and an extragradient
//! saddle-point method with non-monotone backtracking for the scaled and
//! mixed ones.
//!
//! Both solvers are deterministic: identical configuration produces
//! bit-identical trajectories.

use nalgebra::DVector;

use crate::error::{MespError, Result};
use crate::instance::Instance;
use crate::relax::{eval_method, linearization_bound, FrozenScaling, Method, OracleOutput};
use crate::spectral::{subgradient_norm_bound, PhiKind};

/// Log-scaling magnitude past which the determinant calculus gets close to
/// overflow; crossing it is flagged on the result, not fatal.
pub const SCALING_WARN_THRESHOLD: f64 = 50.0;

/// Solver hyperparameters. The stepsize growth rule of the extragradient
/// method is fixed to `lambda_t = 1 + 1/ln(t + 2)`.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Backtracking acceptance parameter in (0, 1).
    pub theta: f64,
    /// Initial extragradient stepsize.
    pub eta0: f64,
    /// Multiplicative backtracking factor in (0, 1).
    pub backtrack_rho: f64,
    /// Stop once the convergence metric drops below this.
    pub tol_conv: f64,
    /// Recorded for reproducibility; the solvers themselves draw no
    /// randomness.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            theta: 0.9,
            eta0: 0.1,
            backtrack_rho: 0.9,
            tol_conv: 1e-6,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.theta && self.theta < 1.0) {
            return Err(MespError::OutOfRange(format!(
                "theta {} not in (0,1)",
                self.theta
            )));
        }
        if !(0.0 < self.backtrack_rho && self.backtrack_rho < 1.0) {
            return Err(MespError::OutOfRange(format!(
                "backtrack_rho {} not in (0,1)",
                self.backtrack_rho
            )));
        }
        if self.eta0 <= 0.0 {
            return Err(MespError::OutOfRange(format!(
                "eta0 {} must be positive",
                self.eta0
            )));
        }
        Ok(())
    }
}

/// Outcome of a solve.
#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Final selection iterate (feasible).
    pub x_final: DVector<f64>,
    /// Final scaling iterate in the solver's flat layout, if any.
    pub scaling_final: Option<DVector<f64>>,
    /// Per-iteration (objective value, convergence metric).
    pub trajectory: Vec<(f64, f64)>,
    pub conv_metric_final: f64,
    pub iterations: usize,
    /// Best certified lower bound seen along the trajectory. Each entry is a
    /// frozen-scaling linearization bound, so the maximum is itself valid.
    pub lower_bound: f64,
    /// Objective value at the best (lowest-value) iterate.
    pub best_value: f64,
    /// True when the backtracking stepsize underflowed; the result still
    /// carries the best point found.
    pub stalled: bool,
    /// True when any scaling iterate exceeded [`SCALING_WARN_THRESHOLD`] in
    /// the max norm.
    pub scaling_overflow: bool,
}

/// Final convergence metric of a recorded trajectory: the value-minus-bound
/// gap for descent runs, the step residual for saddle-point runs.
pub fn convergence_metric(history: &[(f64, f64)]) -> Result<f64> {
    history.last().map(|h| h.1).ok_or(MespError::EmptyHistory)
}

/// Euclidean projection onto the capped simplex
/// `{x in [0,1]^d : sum x = s}`, by bisection on the dual shift `tau` with
/// `x_i = clip(y_i - tau, 0, 1)`.
pub fn project_capped_simplex(y: &DVector<f64>, s: usize) -> Result<DVector<f64>> {
    let d = y.len();
    if s == 0 || s > d {
        return Err(MespError::OutOfRange(format!(
            "subset size {s} not in [1, {d}]"
        )));
    }
    let target = s as f64;
    let tol = 1e-12 * d as f64;
    let clip_sum = |tau: f64| -> f64 { y.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).sum() };
    let mut lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // clip_sum is nonincreasing in tau: clip_sum(lo) = d >= s, clip_sum(hi) = 0 <= s.
    // Bisect the shift itself to convergence; this lands well inside the
    // sum tolerance and keeps the projection stable on plateaus.
    for _ in 0..200 {
        let tau = 0.5 * (lo + hi);
        if clip_sum(tau) > target {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let x = DVector::from_fn(d, |i, _| (y[i] - tau).clamp(0.0, 1.0));
    debug_assert!((x.iter().sum::<f64>() - target).abs() <= tol);
    Ok(x)
}

/// A convex objective with subgradients over the capped simplex.
pub trait ConvexOracle {
    fn dim(&self) -> usize;
    fn subset_size(&self) -> usize;
    /// Value and a subgradient at `x`.
    fn eval(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
    /// Uniform bound on subgradient 2-norms over the feasible set.
    fn grad_norm_bound(&self) -> f64;
}

/// Projected subgradient descent with the divergent-series stepsize
/// `eta_t = D / (G sqrt(t))`, `D = sqrt(2 s)`. Returns the best objective
/// value seen together with the best certified linearization lower bound;
/// the convergence metric is their difference, a sound optimality gap.
///
/// The divergent-series certificate closes slowly when the minimizer is
/// fractional, so if the gap has not reached tolerance when the iteration
/// budget runs out, a short extragradient pass with an empty scaling block
/// polishes the certificate from the best iterate; its backtracking
/// stepsize adapts to the local geometry and every probe it makes is
/// itself a valid frozen-scaling bound.
pub fn mirror_descent(oracle: &dyn ConvexOracle, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let d = oracle.dim();
    let s = oracle.subset_size();
    let diameter = (2.0 * s as f64).sqrt();
    let g_bound = oracle.grad_norm_bound().max(f64::MIN_POSITIVE);

    let mut x = DVector::from_element(d, s as f64 / d as f64);
    let mut best_value = f64::INFINITY;
    let mut best_x = x.clone();
    let mut lower_bound = f64::NEG_INFINITY;
    let mut trajectory = Vec::with_capacity(cfg.max_iters);
    let mut iterations = 0;

    for t in 1..=cfg.max_iters {
        iterations = t;
        let (value, grad) = oracle.eval(&x)?;
        let lb = linearization_bound(value, &grad, &x, s);
        lower_bound = lower_bound.max(lb);
        if value < best_value {
            best_value = value;
            best_x = x.clone();
        }
        let conv = (best_value - lower_bound).max(0.0);
        trajectory.push((value, conv));
        if conv <= cfg.tol_conv {
            break;
        }
        let eta = diameter / (g_bound * (t as f64).sqrt());
        x = project_capped_simplex(&(&x - grad * eta), s)?;
    }

    let mut conv = (best_value - lower_bound).max(0.0);
    if conv > cfg.tol_conv {
        let polish_cfg = SolverConfig {
            max_iters: POLISH_ITERS.min(cfg.max_iters),
            ..cfg.clone()
        };
        let polish = extragradient_sp(
            &PolishOracle(oracle),
            &polish_cfg,
            &best_x,
            &DVector::zeros(0),
        )?;
        lower_bound = lower_bound.max(polish.lower_bound);
        if polish.best_value < best_value {
            best_value = polish.best_value;
            best_x = polish.x_final;
        }
        conv = (best_value - lower_bound).max(0.0);
        trajectory.push((best_value, conv));
    }

    Ok(SolveResult {
        x_final: best_x,
        scaling_final: None,
        trajectory,
        conv_metric_final: conv,
        iterations,
        lower_bound,
        best_value,
        stalled: false,
        scaling_overflow: false,
    })
}

/// Cap on the certificate-polishing pass appended to [`mirror_descent`].
const POLISH_ITERS: usize = 2000;

/// A convex oracle viewed as a saddle problem with an empty scaling block,
/// used for certificate polishing.
struct PolishOracle<'a>(&'a dyn ConvexOracle);

impl SaddleOracle for PolishOracle<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn subset_size(&self) -> usize {
        self.0.subset_size()
    }

    fn scaling_dim(&self) -> usize {
        0
    }

    fn eval(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Result<SaddleEval> {
        let (value, grad_x) = self.0.eval(x)?;
        Ok(SaddleEval {
            value,
            grad_x,
            grad_u: DVector::zeros(0),
        })
    }
}

/// Evaluation of a convex-concave saddle objective
/// `min_x max_u psi(x, u)`: value, selection gradient, scaling gradient.
pub struct SaddleEval {
    pub value: f64,
    pub grad_x: DVector<f64>,
    pub grad_u: DVector<f64>,
}

/// A convex-concave saddle objective: convex in the selection over the
/// capped simplex, concave in the scaling block.
pub trait SaddleOracle {
    fn dim(&self) -> usize;
    fn subset_size(&self) -> usize;
    fn scaling_dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<SaddleEval>;
    /// Projection for the scaling block. Identity for the unbounded
    /// log-scaling domains; a clip for the bounded mixing weight.
    fn project_scaling(&self, u: DVector<f64>) -> DVector<f64> {
        u
    }
    /// Certified lower bound at `(x, u)` reusing an existing evaluation.
    fn certified_bound(&self, eval: &SaddleEval, x: &DVector<f64>) -> f64 {
        linearization_bound(eval.value, &eval.grad_x, x, self.subset_size())
    }
}

/// Extragradient iterations on the stacked variable with non-monotone
/// backtracking: each iteration takes a half step, re-evaluates the
/// operator there, and accepts once
/// `eta * ||F(z_half) - F(z)|| <= theta * ||z_half - z||`, shrinking `eta`
/// by `backtrack_rho` otherwise and growing it by `1 + 1/ln(t+2)` after
/// acceptance. The selection block is projected onto the capped simplex;
/// the scaling block follows the oracle's projection. The convergence
/// metric is the step residual `||z_next - z|| / eta`.
pub fn extragradient_sp(
    oracle: &dyn SaddleOracle,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let s = oracle.subset_size();
    let mut x = project_capped_simplex(x0, s)?;
    let mut u = oracle.project_scaling(u0.clone());
    let mut eta = cfg.eta0;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut best_value = f64::INFINITY;
    let mut trajectory = Vec::with_capacity(cfg.max_iters);
    let mut stalled = false;
    let mut scaling_overflow = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iters {
        iterations = t;
        let here = oracle.eval(&x, &u)?;
        // Monotone operator: descend in x, ascend in u.
        let fx = here.grad_x.clone();
        let fu = -here.grad_u.clone();

        // Backtrack until the extragradient consistency condition holds.
        let (x_half, half) = loop {
            let x_half = project_capped_simplex(&(&x - &fx * eta), s)?;
            let u_half = oracle.project_scaling(&u - &fu * eta);
            let half = oracle.eval(&x_half, &u_half)?;
            let dfx = &half.grad_x - &fx;
            let dfu = &here.grad_u - &half.grad_u;
            let df_norm = (dfx.norm_squared() + dfu.norm_squared()).sqrt();
            let dz_norm = ((&x_half - &x).norm_squared() + (&u_half - &u).norm_squared()).sqrt();
            if eta * df_norm <= cfg.theta * dz_norm {
                break (x_half, half);
            }
            eta *= cfg.backtrack_rho;
            if eta < 1e-16 {
                stalled = true;
                break (x_half, half);
            }
        };

        // Full step from the half-point operator.
        let x_next = project_capped_simplex(&(&x - &half.grad_x * eta), s)?;
        let u_next = oracle.project_scaling(&u + &half.grad_u * eta);

        let residual =
            (((&x_next - &x).norm_squared() + (&u_next - &u).norm_squared()).sqrt()) / eta;
        lower_bound = lower_bound.max(oracle.certified_bound(&half, &x_half));
        best_value = best_value.min(half.value);
        trajectory.push((half.value, residual));

        if !u_next.is_empty() && u_next.amax() > SCALING_WARN_THRESHOLD {
            scaling_overflow = true;
        }
        x = x_next;
        u = u_next;
        if stalled || residual <= cfg.tol_conv {
            break;
        }
        eta *= 1.0 + 1.0 / ((t + 2) as f64).ln();
    }

    let conv_metric_final = convergence_metric(&trajectory)?;
    Ok(SolveResult {
        x_final: x,
        scaling_final: Some(u),
        trajectory,
        conv_metric_final,
        iterations,
        lower_bound,
        best_value,
        stalled,
        scaling_overflow,
    })
}

/// Adapter: any convex method of the relaxation family as a
/// [`ConvexOracle`].
pub struct MethodConvexOracle<'a> {
    inst: &'a Instance,
    method: Method,
    grad_bound: f64,
}

impl<'a> MethodConvexOracle<'a> {
    pub fn new(inst: &'a Instance, method: Method) -> Result<Self> {
        let grad_bound = match method {
            Method::Gamma => {
                subgradient_norm_bound(inst.factor(), inst.subset_size(), PhiKind::NegLog)?
            }
            Method::GammaC => subgradient_norm_bound(
                inst.inverse_factor()?,
                inst.dim() - inst.subset_size(),
                PhiKind::NegLog,
            )?,
            Method::Linx => {
                // sqrt(d) (||C||_2^2 + 1) |phi'(lambda_min(C^2))|, the
                // two-term chain-rule envelope with the tractable surrogate.
                let spec = crate::spectral::sorted_eigenvalues(inst.covariance())?;
                let d = inst.dim();
                let top = spec.lambda[0];
                let bottom = spec.lambda[d - 1];
                if bottom <= 0.0 {
                    return Err(MespError::Singular { lambda_min: bottom });
                }
                (d as f64).sqrt() * (top * top + 1.0) / (bottom * bottom)
            }
            other => {
                return Err(MespError::OutOfRange(format!(
                    "{other} carries a scaling block; solve it as a saddle point"
                )))
            }
        };
        Ok(MethodConvexOracle {
            inst,
            method,
            grad_bound,
        })
    }
}

impl ConvexOracle for MethodConvexOracle<'_> {
    fn dim(&self) -> usize {
        self.inst.dim()
    }

    fn subset_size(&self) -> usize {
        self.inst.subset_size()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let out = eval_method(self.inst, self.method, x, &FrozenScaling::None)?;
        Ok((out.value, out.grad_x))
    }

    fn grad_norm_bound(&self) -> f64 {
        self.grad_bound
    }
}

/// Adapter: any scaled/mixed method as a [`SaddleOracle`] over its stacked
/// scaling block.
pub struct MethodSaddleOracle<'a> {
    inst: &'a Instance,
    method: Method,
}

impl<'a> MethodSaddleOracle<'a> {
    pub fn new(inst: &'a Instance, method: Method) -> Result<Self> {
        if !method.is_saddle() {
            return Err(MespError::OutOfRange(format!(
                "{method} has no scaling block; solve it by mirror descent"
            )));
        }
        Ok(MethodSaddleOracle { inst, method })
    }

    fn stack_grads(&self, out: &OracleOutput) -> DVector<f64> {
        match self.method {
            Method::GammaStar => DVector::from_element(1, out.grad_alpha.unwrap_or(0.0)),
            Method::LinxO | Method::LinxG | Method::GammaG => {
                out.grad_rho.clone().unwrap_or_else(|| DVector::zeros(0))
            }
            Method::GammaCG => out.grad_omega.clone().unwrap_or_else(|| DVector::zeros(0)),
            Method::LinxD => {
                let r = out.grad_rho.as_ref().expect("rho block");
                let w = out.grad_omega.as_ref().expect("omega block");
                DVector::from_iterator(r.len() + w.len(), r.iter().chain(w.iter()).copied())
            }
            _ => unreachable!("constructor rejects non-saddle methods"),
        }
    }
}

impl SaddleOracle for MethodSaddleOracle<'_> {
    fn dim(&self) -> usize {
        self.inst.dim()
    }

    fn subset_size(&self) -> usize {
        self.inst.subset_size()
    }

    fn scaling_dim(&self) -> usize {
        self.method.scaling_dim(self.inst.dim())
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<SaddleEval> {
        let scaling = FrozenScaling::from_stacked(self.method, self.inst.dim(), u)?;
        let out = eval_method(self.inst, self.method, x, &scaling)?;
        let grad_u = self.stack_grads(&out);
        Ok(SaddleEval {
            value: out.value,
            grad_x: out.grad_x,
            grad_u,
        })
    }

    fn project_scaling(&self, u: DVector<f64>) -> DVector<f64> {
        match self.method {
            // The mixing weight lives in [0, 1]; log-scalings are free.
            Method::GammaStar => u.map(|a| a.clamp(0.0, 1.0)),
            _ => u,
        }
    }
}

/// Solve one method end to end: mirror descent for the convex relaxations,
/// extragradient for the scaled/mixed ones, with the standard start
/// `x = (s/d) 1`, zero log-scalings, and mixing weight 1/2.
pub fn solve_method(inst: &Instance, method: Method, cfg: &SolverConfig) -> Result<SolveResult> {
    let d = inst.dim();
    let s = inst.subset_size();
    if method.is_saddle() {
        let oracle = MethodSaddleOracle::new(inst, method)?;
        let x0 = DVector::from_element(d, s as f64 / d as f64);
        let u0 = match method {
            Method::GammaStar => DVector::from_element(1, 0.5),
            _ => DVector::zeros(oracle.scaling_dim()),
        };
        extragradient_sp(&oracle, cfg, &x0, &u0)
    } else {
        let oracle = MethodConvexOracle::new(inst, method)?;
        mirror_descent(&oracle, cfg)
    }
}
