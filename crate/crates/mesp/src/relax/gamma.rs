//! Factorization-bound oracles: the spectral-envelope relaxation, its
//! complementary counterpart, and their two-term mixing.

use nalgebra::{DMatrix, DVector};

use crate::error::{MespError, Result};
use crate::instance::Instance;
use crate::relax::OracleOutput;
use crate::spectral::{envelope_subgradient, envelope_value, sorted_eigenvalues, PhiKind};

/// Shared evaluation core: envelope value of `F Diag(weights) F^T` at
/// truncation `size`, plus the diagonal of `F^T Y F` for the canonical
/// matrix subgradient `Y`.
struct EnvelopeCore {
    envelope: f64,
    /// `b_i = (F^T Y F)_{ii}`.
    b_diag: DVector<f64>,
}

fn envelope_core(
    factor: &DMatrix<f64>,
    weights: &DVector<f64>,
    size: usize,
) -> Result<EnvelopeCore> {
    let d = factor.nrows();
    let mut scaled = factor.clone();
    for j in 0..d {
        let mut col = scaled.column_mut(j);
        col *= weights[j];
    }
    let a = &scaled * factor.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let spec = sorted_eigenvalues(&a)?;
    let lambda = spec.lambda.as_slice();
    let envelope = envelope_value(lambda, size, PhiKind::NegLog)?;
    let mu = envelope_subgradient(lambda, size, PhiKind::NegLog)?;
    // (F^T Y F)_{ii} = sum_l mu_l (F^T q_l)_i^2
    let t = factor.transpose() * &spec.q;
    let mut b_diag = DVector::zeros(d);
    for i in 0..d {
        let mut acc = 0.0;
        for l in 0..d {
            let e = t[(i, l)];
            acc += mu[l] * e * e;
        }
        b_diag[i] = acc;
    }
    Ok(EnvelopeCore { envelope, b_diag })
}

fn check_lengths(d: usize, x: &DVector<f64>, scale: &DVector<f64>) -> Result<()> {
    if x.len() != d {
        return Err(MespError::LengthMismatch {
            left: x.len(),
            right: d,
        });
    }
    if scale.len() != d {
        return Err(MespError::LengthMismatch {
            left: scale.len(),
            right: d,
        });
    }
    Ok(())
}

/// g-scaled factorization oracle.
///
/// Value: `envelope_s(lambda(V Diag(e^rho ∘ x) V^T)) + <x, rho>`. At
/// `rho = 0` this is the plain factorization relaxation objective. The
/// gradient blocks follow the chain rule through the canonical matrix
/// subgradient.
pub fn gamma_oracle(inst: &Instance, x: &DVector<f64>, rho: &DVector<f64>) -> Result<OracleOutput> {
    let d = inst.dim();
    check_lengths(d, x, rho)?;
    let weights = DVector::from_fn(d, |i, _| rho[i].exp() * x[i].max(0.0));
    let core = envelope_core(inst.factor(), &weights, inst.subset_size())?;
    let value = core.envelope + x.dot(rho);
    let grad_x = DVector::from_fn(d, |i, _| rho[i].exp() * core.b_diag[i] + rho[i]);
    let grad_rho = DVector::from_fn(d, |i, _| rho[i].exp() * x[i] * core.b_diag[i] + x[i]);
    OracleOutput {
        value,
        grad_x,
        grad_rho: Some(grad_rho),
        grad_omega: None,
        grad_alpha: None,
    }
    .check_finite()
}

/// g-scaled complementary factorization oracle.
///
/// Value:
/// `envelope_{d-s}(lambda(V^{-T} Diag(e^omega ∘ (1-x)) V^{-1})) - log det C + <1-x, omega>`.
/// The chain rule is the same as [`gamma_oracle`] with the roles of `x` and
/// `1 - x` swapped, which negates the selection gradient.
pub fn gamma_c_oracle(
    inst: &Instance,
    x: &DVector<f64>,
    omega: &DVector<f64>,
) -> Result<OracleOutput> {
    let d = inst.dim();
    check_lengths(d, x, omega)?;
    let s = inst.subset_size();
    if s >= d {
        return Err(MespError::OutOfRange(
            "complementary oracle requires subset size at most d - 1".into(),
        ));
    }
    let w = inst.inverse_factor()?;
    let weights = DVector::from_fn(d, |i, _| omega[i].exp() * (1.0 - x[i]).max(0.0));
    let core = envelope_core(w, &weights, d - s)?;
    let mut value = core.envelope - inst.logdet_c();
    for i in 0..d {
        value += (1.0 - x[i]) * omega[i];
    }
    let grad_x = DVector::from_fn(d, |i, _| -(omega[i].exp() * core.b_diag[i]) - omega[i]);
    let grad_omega = DVector::from_fn(d, |i, _| {
        omega[i].exp() * (1.0 - x[i]) * core.b_diag[i] + (1.0 - x[i])
    });
    OracleOutput {
        value,
        grad_x,
        grad_rho: None,
        grad_omega: Some(grad_omega),
        grad_alpha: None,
    }
    .check_finite()
}

/// Two-term mixing of the unscaled factorization and complementary oracles:
/// `alpha * f_gamma + (1 - alpha) * f_gamma_c` with the mixing weight in
/// `[0, 1]`. Linear in `alpha`, so the mixing gradient is the difference of
/// the two inner values.
pub fn gamma_star_oracle(inst: &Instance, x: &DVector<f64>, alpha: f64) -> Result<OracleOutput> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MespError::OutOfRange(format!(
            "mixing weight {alpha} not in [0, 1]"
        )));
    }
    let zero = DVector::zeros(inst.dim());
    let primal = gamma_oracle(inst, x, &zero)?;
    let comp = gamma_c_oracle(inst, x, &zero)?;
    let value = alpha * primal.value + (1.0 - alpha) * comp.value;
    let grad_x = &primal.grad_x * alpha + &comp.grad_x * (1.0 - alpha);
    OracleOutput {
        value,
        grad_x,
        grad_rho: None,
        grad_omega: None,
        grad_alpha: Some(primal.value - comp.value),
    }
    .check_finite()
}
