//! Linx-relaxation oracles: unscaled, ordinary-scaled, generalized-scaled,
//! and double-scaled.
//!
//! All four share one determinant/gradient core through the double-scaled
//! objective
//!
//! ```text
//! psi(x, rho, omega) = -1/2 log det(C Diag(e^rho ∘ x) C + Diag(e^omega ∘ (1-x)))
//!                      + 1/2 <x, rho> + 1/2 <1-x, omega>
//! ```
//!
//! The unscaled oracle is `psi(x, 0, 0)`; ordinary scaling is `rho = rho0*1`,
//! `omega = 0`; generalized scaling is recovered exactly through the change
//! of variables `omega = -2 rho` at `rho = 0`, which eliminates a separate
//! determinant-calculus path for it.

use nalgebra::DVector;

use crate::error::{MespError, Result};
use crate::instance::Instance;
use crate::relax::{OracleOutput, ScalingPoint};

struct LinxCore {
    logdet: f64,
    /// `diag(L^{-1})`.
    linv_diag: DVector<f64>,
    /// `diag(C L^{-1} C)`.
    clinvc_diag: DVector<f64>,
}

/// Relative pivot floor below which the assembled system counts as
/// singular; `1e-7` of the largest pivot corresponds to an eigenvalue ratio
/// of about 1e-14, i.e. singular at working precision.
const PIVOT_FLOOR_REL: f64 = 1e-7;

/// Assemble `L = C Diag(wx) C + Diag(wc)` and extract the pieces the
/// gradients need. `L` is positive definite on the whole box for a PSD
/// covariance with nonsingular selected principal submatrices; a failed or
/// degenerate factorization is therefore surfaced as an internal
/// singularity error. Rounding can slip an exactly singular matrix past
/// the factorization with a near-zero pivot, hence the explicit floor.
fn linx_core(inst: &Instance, wx: &DVector<f64>, wc: &DVector<f64>) -> Result<LinxCore> {
    let c = inst.covariance();
    let d = c.nrows();
    let mut cw = c.clone();
    for j in 0..d {
        let mut col = cw.column_mut(j);
        col *= wx[j];
    }
    let mut l = &cw * c;
    for i in 0..d {
        l[(i, i)] += wc[i];
    }
    let l = (&l + l.transpose()) * 0.5;
    let chol = nalgebra::Cholesky::new(l).ok_or(MespError::SingularL)?;
    let pivots = chol.l().diagonal();
    let pivot_max = pivots.iter().fold(0.0f64, |m, &p| m.max(p));
    // `p > floor` is false for NaN pivots, so those are rejected too.
    if !pivots.iter().all(|&p| p > PIVOT_FLOOR_REL * pivot_max) {
        return Err(MespError::SingularL);
    }
    let logdet = 2.0 * chol.l().diagonal().iter().map(|t| t.ln()).sum::<f64>();
    let linv = chol.inverse();
    let linv_diag = linv.diagonal();
    // diag(C L^{-1} C)_i = row_i(C) . col_i(L^{-1} C)
    let y = &linv * c;
    let clinvc_diag = DVector::from_fn(d, |i, _| {
        let mut acc = 0.0;
        for j in 0..d {
            acc += c[(i, j)] * y[(j, i)];
        }
        acc
    });
    Ok(LinxCore {
        logdet,
        linv_diag,
        clinvc_diag,
    })
}

fn check_point(inst: &Instance, p: &ScalingPoint) -> Result<()> {
    let d = inst.dim();
    for v in [&p.x, &p.rho, &p.omega] {
        if v.len() != d {
            return Err(MespError::LengthMismatch {
                left: v.len(),
                right: d,
            });
        }
    }
    Ok(())
}

/// Double-scaled linx oracle with full gradient blocks:
///
/// ```text
/// grad_x     = -1/2 e^rho ∘ diag(C L^{-1} C) + 1/2 e^omega ∘ diag(L^{-1}) + rho/2 - omega/2
/// grad_rho   = -1/2 e^rho ∘ x ∘ diag(C L^{-1} C) + x/2
/// grad_omega = -1/2 e^omega ∘ (1-x) ∘ diag(L^{-1}) + (1-x)/2
/// ```
pub fn linx_d_oracle(inst: &Instance, p: &ScalingPoint) -> Result<OracleOutput> {
    check_point(inst, p)?;
    let d = inst.dim();
    let e_rho = p.rho.map(f64::exp);
    let e_omega = p.omega.map(f64::exp);
    let wx = DVector::from_fn(d, |i, _| e_rho[i] * p.x[i]);
    let wc = DVector::from_fn(d, |i, _| e_omega[i] * (1.0 - p.x[i]));
    let core = linx_core(inst, &wx, &wc)?;

    let mut value = -0.5 * core.logdet;
    for i in 0..d {
        value += 0.5 * (p.x[i] * p.rho[i] + (1.0 - p.x[i]) * p.omega[i]);
    }
    let grad_x = DVector::from_fn(d, |i, _| {
        -0.5 * e_rho[i] * core.clinvc_diag[i]
            + 0.5 * e_omega[i] * core.linv_diag[i]
            + 0.5 * (p.rho[i] - p.omega[i])
    });
    let grad_rho = DVector::from_fn(d, |i, _| {
        0.5 * p.x[i] * (1.0 - e_rho[i] * core.clinvc_diag[i])
    });
    let grad_omega = DVector::from_fn(d, |i, _| {
        0.5 * (1.0 - p.x[i]) * (1.0 - e_omega[i] * core.linv_diag[i])
    });
    OracleOutput {
        value,
        grad_x,
        grad_rho: Some(grad_rho),
        grad_omega: Some(grad_omega),
        grad_alpha: None,
    }
    .check_finite()
}

/// Unscaled linx oracle: `-1/2 log det(C Diag(x) C + I - Diag(x))` with
/// `grad_x = -1/2 (diag(C L^{-1} C) - diag(L^{-1}))`.
pub fn linx_oracle(inst: &Instance, x: &DVector<f64>) -> Result<OracleOutput> {
    let p = ScalingPoint::unscaled(x.clone());
    let out = linx_d_oracle(inst, &p)?;
    Ok(OracleOutput {
        value: out.value,
        grad_x: out.grad_x,
        grad_rho: None,
        grad_omega: None,
        grad_alpha: None,
    })
}

/// Ordinary-scaled linx oracle: the double-scaled objective at
/// `rho = rho0 * 1`, `omega = 0`. On the capped simplex the value equals
/// `-1/2 log det(e^{rho0} C Diag(x) C + Diag(1-x)) + s rho0 / 2`; the scalar
/// scaling gradient is the sum of the rho block.
pub fn linx_o_oracle(inst: &Instance, x: &DVector<f64>, rho0: f64) -> Result<OracleOutput> {
    let d = inst.dim();
    let p = ScalingPoint {
        x: x.clone(),
        rho: DVector::from_element(d, rho0),
        omega: DVector::zeros(d),
    };
    let out = linx_d_oracle(inst, &p)?;
    let grad_rho0 = out.grad_rho.as_ref().map(|g| g.sum()).unwrap_or(0.0);
    Ok(OracleOutput {
        value: out.value,
        grad_x: out.grad_x,
        grad_rho: Some(DVector::from_element(1, grad_rho0)),
        grad_omega: None,
        grad_alpha: None,
    })
}

/// Generalized-scaled linx oracle, evaluated through the double-scaled core
/// with `omega = -2 rho`:
///
/// ```text
/// psi_g(x, rho) = psi_d(x, 0, -2 rho)
/// ```
///
/// an exact identity in `(x, rho)`, so `grad_x` carries over and the scaling
/// gradient is `-2` times the omega block.
pub fn linx_g_oracle(
    inst: &Instance,
    x: &DVector<f64>,
    rho: &DVector<f64>,
) -> Result<OracleOutput> {
    let d = inst.dim();
    if rho.len() != d {
        return Err(MespError::LengthMismatch {
            left: rho.len(),
            right: d,
        });
    }
    let p = ScalingPoint {
        x: x.clone(),
        rho: DVector::zeros(d),
        omega: rho * -2.0,
    };
    let out = linx_d_oracle(inst, &p)?;
    let grad_rho = out.grad_omega.as_ref().map(|g| g * -2.0);
    Ok(OracleOutput {
        value: out.value,
        grad_x: out.grad_x,
        grad_rho,
        grad_omega: None,
        grad_alpha: None,
    })
}
