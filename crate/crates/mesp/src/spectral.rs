//! Dense symmetric spectral computations.
//!
//! This module provides the sorted eigendecomposition, majorization tests,
//! and the closed-form convex envelope of the truncated spectral sum
//! `sum_{i<=s} phi(lambda_i)` together with its canonical subgradients.
//!
//! The envelope is computed by locating the unique critical index `k` at
//! which the running tail mean drops below the spectrum and flattening
//! ("water-filling") everything past `k`. All functions here are pure and
//! safe to call concurrently.

use nalgebra::{DMatrix, DVector};

use crate::error::{MespError, Result};

/// Eigenvalues in `(-TOL_EIG_REL * ||X||_2, 0)` are clamped to zero; anything
/// more negative is rejected as non-PSD.
pub const TOL_EIG_REL: f64 = 1e-10;

/// Relative threshold on asymmetry `max|X - X^T|` before a matrix is rejected.
pub const TOL_SYM_REL: f64 = 1e-8;

/// Relative threshold (against the largest eigenvalue) for counting an
/// eigenvalue as strictly positive.
pub const TOL_RANK_REL: f64 = 1e-9;

/// Scalar loss applied to eigenvalues. Both members are closed, convex and
/// nonincreasing on the positive reals, which is what the envelope machinery
/// requires. Keeping this a closed enumeration guarantees that derivatives
/// and norm bounds always match the loss in use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiKind {
    /// `phi(t) = -ln t` (log-determinant objectives).
    NegLog,
    /// `phi(t) = 1/t` (trace-of-inverse objectives).
    Inv,
}

impl PhiKind {
    /// Evaluate `phi`.
    pub fn value(self, t: f64) -> f64 {
        match self {
            PhiKind::NegLog => -t.ln(),
            PhiKind::Inv => 1.0 / t,
        }
    }

    /// Evaluate `phi'`.
    pub fn deriv(self, t: f64) -> f64 {
        match self {
            PhiKind::NegLog => -1.0 / t,
            PhiKind::Inv => -1.0 / (t * t),
        }
    }
}

/// Eigendecomposition of a symmetric PSD matrix with eigenvalues sorted in
/// nonincreasing order and the eigenvector columns permuted to match.
#[derive(Clone, Debug)]
pub struct SortedSpectrum {
    /// Eigenvalues, nonincreasing, nonnegative after clamping.
    pub lambda: DVector<f64>,
    /// Orthonormal eigenvectors; column `i` pairs with `lambda[i]`.
    pub q: DMatrix<f64>,
}

/// The unique index `k` in `[0, s)` with
/// `lambda_k > tail_mean >= lambda_{k+1}` (with `lambda_0 = +inf`), where
/// `tail_mean = (sum_{i>k} lambda_i) / (s - k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalIndexResult {
    pub k: usize,
    pub tail_mean: f64,
}

/// Eigendecompose a symmetric matrix, sort the spectrum in nonincreasing
/// order (stable under ties) and clamp tiny negative eigenvalues to zero.
pub fn sorted_eigenvalues(x: &DMatrix<f64>) -> Result<SortedSpectrum> {
    sorted_eigenvalues_clamped(x, TOL_EIG_REL)
}

/// As [`sorted_eigenvalues`], with an explicit relative clamp: eigenvalues
/// in `(-clamp_rel * ||X||_2, 0)` become zero, anything below is rejected.
/// The instance loader passes its own, looser, PSD gate here.
pub(crate) fn sorted_eigenvalues_clamped(
    x: &DMatrix<f64>,
    clamp_rel: f64,
) -> Result<SortedSpectrum> {
    if !x.is_square() {
        return Err(MespError::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let scale = x.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (x - x.transpose()).amax();
    let tol = TOL_SYM_REL * scale;
    if asymmetry > tol {
        return Err(MespError::NonSymmetric { asymmetry, tol });
    }
    let sym = (x + x.transpose()) * 0.5;
    let eig = sym
        .symmetric_eigen_try(f64::EPSILON, 10_000)
        .ok_or(MespError::EigFailure)?;

    let d = x.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort keeps the eigensolver's order among exact ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let spectral_norm = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol_eig = clamp_rel * spectral_norm;
    let mut lambda = DVector::zeros(d);
    let mut q = DMatrix::zeros(d, d);
    for (pos, &idx) in order.iter().enumerate() {
        let mut ev = eig.eigenvalues[idx];
        if ev < 0.0 {
            if ev < -tol_eig {
                return Err(MespError::NonPsd { lambda_min: ev });
            }
            ev = 0.0;
        }
        lambda[pos] = ev;
        q.set_column(pos, &eig.eigenvectors.column(idx));
    }
    Ok(SortedSpectrum { lambda, q })
}

// nalgebra's `SymmetricEigen::try_new` consumes the matrix; wrap it so the
// call site above stays readable.
trait SymmetricEigenExt {
    fn symmetric_eigen_try(
        self,
        eps: f64,
        max_iter: usize,
    ) -> Option<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>>;
}

impl SymmetricEigenExt for DMatrix<f64> {
    fn symmetric_eigen_try(
        self,
        eps: f64,
        max_iter: usize,
    ) -> Option<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>> {
        nalgebra::SymmetricEigen::try_new(self, eps, max_iter)
    }
}

/// Does `u` majorize `w`? True iff the totals agree and every partial sum of
/// the sorted `u` dominates the corresponding partial sum of the sorted `w`,
/// all within a tolerance scaled by the data magnitude.
pub fn majorizes(u: &DVector<f64>, w: &DVector<f64>) -> Result<bool> {
    if u.len() != w.len() {
        return Err(MespError::LengthMismatch {
            left: u.len(),
            right: w.len(),
        });
    }
    let tol = 1e-9
        * (1.0 + u.iter().map(|v| v.abs()).sum::<f64>() + w.iter().map(|v| v.abs()).sum::<f64>());
    let mut us: Vec<f64> = u.iter().copied().collect();
    let mut ws: Vec<f64> = w.iter().copied().collect();
    us.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ws.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let (mut pu, mut pw) = (0.0, 0.0);
    for i in 0..us.len() {
        pu += us[i];
        pw += ws[i];
        let last = i + 1 == us.len();
        if last {
            if (pu - pw).abs() > tol {
                return Ok(false);
            }
        } else if pu < pw - tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn count_positive(lambda: &[f64]) -> usize {
    let top = lambda.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    lambda.iter().filter(|&&v| v > TOL_RANK_REL * top).count()
}

fn check_sorted_input(lambda: &[f64], s: usize) -> Result<usize> {
    let d = lambda.len();
    if s == 0 || s > d {
        return Err(MespError::OutOfRange(format!(
            "subset size {s} not in [1, {d}]"
        )));
    }
    debug_assert!(
        lambda
            .windows(2)
            .all(|w| w[0] >= w[1] - 1e-12 * (1.0 + w[0].abs())),
        "spectrum must be nonincreasing"
    );
    let positives = count_positive(lambda);
    if positives < s {
        return Err(MespError::RankDeficient {
            rank: positives,
            needed: s,
        });
    }
    Ok(positives)
}

/// Locate the unique critical index for a nonincreasing, nonnegative
/// spectrum with at least `s` positive entries.
///
/// The strict inequality is evaluated exactly in floating point; degenerate
/// equality ties resolve to the smaller `k`.
pub fn critical_index(lambda: &[f64], s: usize) -> Result<CriticalIndexResult> {
    check_sorted_input(lambda, s)?;
    let d = lambda.len();
    // Suffix sums so each candidate k costs O(1).
    let mut suffix = vec![0.0; d + 1];
    for i in (0..d).rev() {
        suffix[i] = suffix[i + 1] + lambda[i];
    }
    for k in 0..s {
        let prev = if k == 0 { f64::INFINITY } else { lambda[k - 1] };
        let tail_mean = suffix[k] / (s - k) as f64;
        let next = lambda[k];
        if prev > tail_mean && tail_mean >= next {
            return Ok(CriticalIndexResult { k, tail_mean });
        }
    }
    // Unreachable for valid input by the uniqueness argument; guard anyway.
    Err(MespError::OutOfRange("critical index scan failed".into()))
}

/// The water-filled spectrum: keep the first `k` entries, flatten entries
/// `k+1..=s` to the tail mean, zero out the rest. The result majorizes the
/// input and is `s`-sparse.
pub fn waterfill(lambda: &[f64], s: usize) -> Result<DVector<f64>> {
    let crit = critical_index(lambda, s)?;
    let d = lambda.len();
    let mut out = DVector::zeros(d);
    for i in 0..crit.k {
        out[i] = lambda[i];
    }
    for i in crit.k..s {
        out[i] = crit.tail_mean;
    }
    Ok(out)
}

/// The spectrum with its tail flattened to the tail mean: entries up to the
/// critical index stay, everything past it becomes the tail mean. This is
/// the vector at which `phi'` is evaluated for the canonical subgradient;
/// it is strictly positive and dominates the input componentwise.
pub fn tail_mean_spectrum(lambda: &[f64], s: usize) -> Result<DVector<f64>> {
    let crit = critical_index(lambda, s)?;
    let d = lambda.len();
    let mut out = DVector::zeros(d);
    for i in 0..d {
        out[i] = if i < crit.k {
            lambda[i]
        } else {
            crit.tail_mean
        };
    }
    Ok(out)
}

/// Closed-form value of the convex envelope of the truncated spectral sum:
/// `sum_{i<=s} phi` evaluated at the water-filled spectrum.
///
/// Accepts the spectrum in any order (it is sorted internally), making the
/// function permutation-symmetric by construction.
pub fn envelope_value(lambda: &[f64], s: usize, phi: PhiKind) -> Result<f64> {
    let mut sorted: Vec<f64> = lambda.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let crit = critical_index(&sorted, s)?;
    let mut total = (s - crit.k) as f64 * phi.value(crit.tail_mean);
    for &v in sorted.iter().take(crit.k) {
        total += phi.value(v);
    }
    Ok(total)
}

/// Canonical subgradient of [`envelope_value`] with respect to the sorted
/// spectrum: `phi'` applied componentwise to [`tail_mean_spectrum`]. For
/// zero eigenvalues the boundary element of the subdifferential is chosen so
/// that the selection is deterministic and continuous wherever possible.
pub fn envelope_subgradient(lambda: &[f64], s: usize, phi: PhiKind) -> Result<DVector<f64>> {
    let beta = tail_mean_spectrum(lambda, s)?;
    Ok(beta.map(|b| phi.deriv(b)))
}

/// Matrix subgradient of `X -> envelope_value(lambda(X), s, phi)`:
/// `Q Diag(phi'(beta)) Q^T` in the sorted eigenbasis of `X`.
pub fn spectral_subgradient(x: &DMatrix<f64>, s: usize, phi: PhiKind) -> Result<DMatrix<f64>> {
    let spec = sorted_eigenvalues(x)?;
    let mu = envelope_subgradient(spec.lambda.as_slice(), s, phi)?;
    Ok(&spec.q * DMatrix::from_diagonal(&mu) * spec.q.transpose())
}

/// Tractable bound on the 2-norm of any subgradient of
/// `x -> envelope_value(lambda(M Diag(x) M^T), s, phi)` over the capped
/// simplex: `sqrt(d) * ||M^T M||_2 * |phi'(lambda_min(M^T M))|`.
pub fn subgradient_norm_bound(m: &DMatrix<f64>, s: usize, phi: PhiKind) -> Result<f64> {
    let _ = s; // the bound uses the surrogate lambda_min, independent of s
    let gram = m.transpose() * m;
    let spec = sorted_eigenvalues(&gram)?;
    let d = gram.nrows();
    let top = spec.lambda[0];
    let bottom = spec.lambda[d - 1];
    if bottom <= TOL_RANK_REL * top.max(f64::MIN_POSITIVE) {
        return Err(MespError::Singular { lambda_min: bottom });
    }
    Ok((d as f64).sqrt() * top * phi.deriv(bottom).abs())
}
