//! Problem instances: covariance ingestion, factorization, synthetic
//! generation, the reference 4x4 instance, and a brute-force exact oracle.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{MespError, Result};
use crate::spectral::{sorted_eigenvalues, TOL_RANK_REL, TOL_SYM_REL};

/// PSD gate: reject matrices whose smallest eigenvalue is below
/// `-TOL_PSD_REL * ||C||_2`.
pub const TOL_PSD_REL: f64 = 1e-8;

/// A maximum-entropy sampling instance: a PSD covariance `C` with a cached
/// factor `V` satisfying `V^T V = C`, the subset size `s`, and optional
/// metadata. Instances are immutable after construction, so they can be
/// shared freely across threads.
#[derive(Clone, Debug)]
pub struct Instance {
    c: DMatrix<f64>,
    v: DMatrix<f64>,
    s: usize,
    rank: usize,
    logdet_c: f64,
    known_opt: Option<f64>,
    /// `V^{-T}`, cached when `C` is full rank; the factor of `C^{-1}`.
    w: Option<DMatrix<f64>>,
}

impl Instance {
    /// Build an instance from a covariance matrix. The matrix is symmetrized
    /// (rejected if the asymmetry exceeds tolerance), gated for positive
    /// semidefiniteness, and factorized as `C = V^T V` via Cholesky when
    /// positive definite, falling back to an eigenvalue factor otherwise.
    ///
    /// `known_opt`, when given, is the exact integer optimum in minimization
    /// form, i.e. `-max log det C[S,S]`.
    pub fn new(c: &DMatrix<f64>, s: usize, known_opt: Option<f64>) -> Result<Self> {
        if !c.is_square() {
            return Err(MespError::DimensionMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", c.nrows(), c.ncols()),
            });
        }
        let scale = c.amax().max(f64::MIN_POSITIVE);
        let asymmetry = (c - c.transpose()).amax();
        if asymmetry > TOL_SYM_REL * scale {
            return Err(MespError::NonSymmetric {
                asymmetry,
                tol: TOL_SYM_REL * scale,
            });
        }
        let sym = (c + c.transpose()) * 0.5;

        // The loader's PSD gate is looser than the spectral ops' clamp:
        // eigenvalues down to -TOL_PSD_REL * ||C||_2 are accepted and
        // clamped to zero.
        let spec = crate::spectral::sorted_eigenvalues_clamped(&sym, TOL_PSD_REL)?;
        let d = sym.nrows();
        let top = spec.lambda[0].max(f64::MIN_POSITIVE);
        let rank = spec
            .lambda
            .iter()
            .filter(|&&v| v > TOL_RANK_REL * top)
            .count();

        // Cholesky when positive definite; eigenvalue factor otherwise. The
        // stored covariance is re-synthesized from the (clamped) factor in
        // the fallback so that V^T V = C holds to round-off.
        let (c_eff, v, logdet) = match nalgebra::Cholesky::new(sym.clone()) {
            Some(chol) if rank == d => {
                let l = chol.l();
                let logdet = 2.0 * l.diagonal().iter().map(|t| t.ln()).sum::<f64>();
                (sym, l.transpose(), logdet)
            }
            _ => {
                let sqrt = DVector::from_iterator(d, spec.lambda.iter().map(|v| v.max(0.0).sqrt()));
                let v = DMatrix::from_diagonal(&sqrt) * spec.q.transpose();
                let c_eff = v.transpose() * &v;
                let c_eff = (&c_eff + c_eff.transpose()) * 0.5;
                let logdet = if rank == d {
                    spec.lambda.iter().map(|t| t.ln()).sum()
                } else {
                    f64::NEG_INFINITY
                };
                (c_eff, v, logdet)
            }
        };

        Self::assemble(c_eff, v, s, rank, logdet, known_opt)
    }

    /// Build an instance directly from a factor `V`, taking `C = V^T V`.
    /// The factor is stored verbatim, not re-factorized.
    pub fn from_factor(v: DMatrix<f64>, s: usize, known_opt: Option<f64>) -> Result<Self> {
        if !v.is_square() {
            return Err(MespError::DimensionMismatch {
                expected: "square factor".into(),
                got: format!("{}x{}", v.nrows(), v.ncols()),
            });
        }
        let c = v.transpose() * &v;
        let c = (&c + c.transpose()) * 0.5;
        let spec = sorted_eigenvalues(&c)?;
        let d = c.nrows();
        let top = spec.lambda[0].max(f64::MIN_POSITIVE);
        let rank = spec
            .lambda
            .iter()
            .filter(|&&t| t > TOL_RANK_REL * top)
            .count();
        let logdet = if rank == d {
            spec.lambda.iter().map(|t| t.ln()).sum()
        } else {
            f64::NEG_INFINITY
        };
        Self::assemble(c, v, s, rank, logdet, known_opt)
    }

    fn assemble(
        c: DMatrix<f64>,
        v: DMatrix<f64>,
        s: usize,
        rank: usize,
        logdet_c: f64,
        known_opt: Option<f64>,
    ) -> Result<Self> {
        let d = c.nrows();
        if s == 0 || s > rank {
            return Err(MespError::OutOfRange(format!(
                "subset size {s} must lie in [1, rank(C) = {rank}]"
            )));
        }
        let w = if rank == d {
            v.clone().try_inverse().map(|vi| vi.transpose())
        } else {
            None
        };
        debug_assert!({
            let resid = (v.transpose() * &v - &c).amax();
            resid <= 1e-10 * c.amax().max(1.0)
        });
        Ok(Instance {
            c,
            v,
            s,
            rank,
            logdet_c,
            known_opt,
            w,
        })
    }

    /// Same covariance, different subset size. The known optimum is dropped
    /// because it is tied to the subset size it was recorded for.
    pub fn with_subset_size(&self, s: usize) -> Result<Self> {
        if s == 0 || s > self.rank {
            return Err(MespError::OutOfRange(format!(
                "subset size {s} must lie in [1, rank(C) = {}]",
                self.rank
            )));
        }
        let mut inst = self.clone();
        inst.s = s;
        inst.known_opt = None;
        Ok(inst)
    }

    /// Attach a known integer optimum (minimization form).
    pub fn with_known_opt(mut self, opt: Option<f64>) -> Self {
        self.known_opt = opt;
        self
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn subset_size(&self) -> usize {
        self.s
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// The cached factor with `V^T V = C`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// `log det C`; `-inf` when `C` is rank deficient.
    pub fn logdet_c(&self) -> f64 {
        self.logdet_c
    }

    pub fn known_opt(&self) -> Option<f64> {
        self.known_opt
    }

    /// `V^{-T}`, the factor of `C^{-1}`; errors when `C` is singular.
    pub fn inverse_factor(&self) -> Result<&DMatrix<f64>> {
        self.w.as_ref().ok_or(MespError::SingularC {
            rank: self.rank,
            dim: self.dim(),
        })
    }
}

/// Supported on-disk matrix layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Whitespace-separated `d` rows of `d` reals, optional leading line `d`.
    DenseText,
    /// Comma-separated `d` rows of `d` reals.
    Csv,
    /// Row `i` holds `i` entries of the lower triangle, optional leading `d`.
    LowerTriangleText,
}

fn tokenize(text: &str) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut has_commas = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            has_commas = true;
            line.split(',')
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .collect()
        } else {
            line.split_whitespace().collect()
        };
        let mut row = Vec::with_capacity(fields.len());
        for f in fields {
            row.push(f.parse::<f64>().map_err(|e| {
                MespError::Parse(format!("line {}: bad number {f:?}: {e}", lineno + 1))
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MespError::Parse("no numeric rows found".into()));
    }
    Ok((rows, has_commas))
}

/// Detect which layout a matrix file uses.
pub fn detect_format(text: &str) -> Result<MatrixFormat> {
    let (mut rows, has_commas) = tokenize(text)?;
    if has_commas {
        return Ok(MatrixFormat::Csv);
    }
    if rows[0].len() == 1 && rows.len() > 1 && rows[0][0].fract() == 0.0 {
        rows.remove(0);
    }
    let n = rows.len();
    if rows.iter().all(|r| r.len() == n) {
        Ok(MatrixFormat::DenseText)
    } else if rows.iter().enumerate().all(|(i, r)| r.len() == i + 1) {
        Ok(MatrixFormat::LowerTriangleText)
    } else {
        Err(MespError::Parse(format!(
            "rows do not form a dense {n}x{n} matrix or a lower triangle"
        )))
    }
}

/// Parse a matrix from text, auto-detecting the layout.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let format = detect_format(text)?;
    let (mut rows, _) = tokenize(text)?;

    // Optional leading dimension line.
    let declared = if rows[0].len() == 1 && rows.len() > 1 && rows[0][0].fract() == 0.0 {
        let d = rows[0][0] as usize;
        rows.remove(0);
        Some(d)
    } else {
        None
    };

    let n = rows.len();
    let m = match format {
        MatrixFormat::DenseText | MatrixFormat::Csv => {
            if rows.iter().any(|r| r.len() != n) {
                return Err(MespError::Parse(format!("expected {n} entries per row")));
            }
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        }
        MatrixFormat::LowerTriangleText => {
            DMatrix::from_fn(n, n, |i, j| if j <= i { rows[i][j] } else { rows[j][i] })
        }
    };
    if let Some(d) = declared {
        if d != n {
            return Err(MespError::DimensionMismatch {
                expected: format!("{d} rows (declared)"),
                got: format!("{n}"),
            });
        }
    }
    Ok(m)
}

/// Load an instance from a matrix file. The matrix is symmetrized within
/// tolerance and gated for positive semidefiniteness.
pub fn load_instance<P: AsRef<Path>>(
    path: P,
    s: usize,
    known_opt: Option<f64>,
) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    let c = parse_matrix(&text)?;
    Instance::new(&c, s, known_opt)
}

/// Write a matrix in the dense text layout (leading dimension line).
pub fn write_matrix_dense<P: AsRef<Path>>(path: P, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a sidecar table of known integer optima: CSV with header `s,opt`,
/// optima in minimization form.
pub fn load_optima<P: AsRef<Path>>(path: P) -> Result<BTreeMap<usize, f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("s,opt")) {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (s, opt) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(MespError::Parse(format!(
                    "line {}: expected `s,opt`",
                    lineno + 1
                )))
            }
        };
        let s: usize = s
            .parse()
            .map_err(|e| MespError::Parse(format!("line {}: bad s: {e}", lineno + 1)))?;
        let opt: f64 = opt
            .parse()
            .map_err(|e| MespError::Parse(format!("line {}: bad opt: {e}", lineno + 1)))?;
        map.insert(s, opt);
    }
    Ok(map)
}

/// Eigenvalue layout for synthetic covariances.
#[derive(Clone, Debug)]
pub enum SpectrumSpec {
    /// Exact eigenvalues to plant.
    Explicit(Vec<f64>),
    /// Geometric spectrum with the given condition number, scaled so the
    /// largest and smallest eigenvalues are `sqrt(cond)` and `1/sqrt(cond)`.
    ConditionNumber(f64),
}

/// Deterministic synthetic instance generator.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub d: usize,
    pub spectrum: SpectrumSpec,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn with_condition(d: usize, seed: u64, cond: f64) -> Self {
        SyntheticSpec {
            d,
            spectrum: SpectrumSpec::ConditionNumber(cond),
            seed,
        }
    }

    fn eigenvalues(&self) -> Result<Vec<f64>> {
        match &self.spectrum {
            SpectrumSpec::Explicit(v) => {
                if v.len() != self.d {
                    return Err(MespError::BadSpec(format!(
                        "{} eigenvalues for dimension {}",
                        v.len(),
                        self.d
                    )));
                }
                if v.iter().any(|&t| t <= 0.0) {
                    return Err(MespError::BadSpec("eigenvalues must be positive".into()));
                }
                Ok(v.clone())
            }
            SpectrumSpec::ConditionNumber(c) => {
                if !c.is_finite() || *c < 1.0 {
                    return Err(MespError::BadSpec(format!(
                        "condition number {c} must be >= 1"
                    )));
                }
                if self.d == 1 {
                    return Ok(vec![1.0]);
                }
                let d = self.d as f64;
                Ok((0..self.d)
                    .map(|i| c.powf(0.5 - i as f64 / (d - 1.0)))
                    .collect())
            }
        }
    }
}

/// `C = Q Diag(spectrum) Q^T` with `Q` the orientation-fixed QR factor of a
/// seeded Gaussian matrix. Identical spec, identical matrix.
pub fn synthetic_instance(spec: &SyntheticSpec, s: usize) -> Result<Instance> {
    if spec.d == 0 {
        return Err(MespError::BadSpec("dimension must be positive".into()));
    }
    let eigs = spec.eigenvalues()?;
    let d = spec.d;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = DMatrix::from_fn(d, d, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the orientation so Q is unique given the Gaussian draw.
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let c = &q * DMatrix::from_diagonal(&DVector::from_vec(eigs)) * q.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Instance::new(&c, s, None)
}

/// The reference 4x4 instance with subset size 2: an upper-triangular factor
/// with a single coupled 2x2 block. The exact optimum is `-ln 2`, attained
/// at the selection `(0,1,1,0)`.
pub fn example_4x4() -> Instance {
    let v = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ],
    );
    Instance::from_factor(v, 2, Some(-(2.0f64.ln()))).expect("reference instance is well formed")
}

/// Iterate `s`-subsets of `0..d` in lexicographic order.
struct Combinations {
    next: Option<Vec<usize>>,
    d: usize,
}

impl Combinations {
    fn new(d: usize, s: usize) -> Self {
        let next = if s <= d { Some((0..s).collect()) } else { None };
        Combinations { next, d }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.clone()?;
        let s = current.len();
        let mut succ = current.clone();
        let mut i = s;
        loop {
            if i == 0 {
                self.next = None;
                break;
            }
            i -= 1;
            if succ[i] < self.d - (s - i) {
                succ[i] += 1;
                for j in i + 1..s {
                    succ[j] = succ[j - 1] + 1;
                }
                self.next = Some(succ);
                break;
            }
        }
        Some(current)
    }
}

fn binomial(d: u128, s: u128) -> u128 {
    let s = s.min(d - s);
    let mut acc: u128 = 1;
    for i in 0..s {
        acc = acc.saturating_mul(d - i) / (i + 1);
    }
    acc
}

/// Log-determinant of a principal submatrix via Cholesky; `None` when the
/// submatrix is numerically singular. This is a deliberately different
/// computational route from the eigenvalue-based objective, so the two can
/// cross-check each other.
fn submatrix_logdet(c: &DMatrix<f64>, subset: &[usize]) -> Option<f64> {
    let s = subset.len();
    let sub = DMatrix::from_fn(s, s, |i, j| c[(subset[i], subset[j])]);
    let scale = sub.amax().max(f64::MIN_POSITIVE);
    let chol = nalgebra::Cholesky::new(sub)?;
    let mut logdet = 0.0;
    for t in chol.l().diagonal().iter() {
        if *t <= 1e-9 * scale.sqrt() {
            return None;
        }
        logdet += 2.0 * t.ln();
    }
    Some(logdet)
}

/// Exhaustive exact oracle: minimum of `-log det C[S,S]` over all
/// `s`-subsets, with the lexicographically first minimizer. Subsets whose
/// submatrix is numerically singular are skipped (value `+inf`); refuses
/// instances with more than `10^6` subsets.
pub fn brute_force_opt(inst: &Instance) -> Result<(f64, DVector<f64>)> {
    let d = inst.dim();
    let s = inst.subset_size();
    let count = binomial(d as u128, s as u128);
    const LIMIT: u128 = 1_000_000;
    if count > LIMIT {
        return Err(MespError::TooLarge {
            count,
            limit: LIMIT,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut skipped = 0usize;
    for subset in Combinations::new(d, s) {
        match submatrix_logdet(inst.covariance(), &subset) {
            Some(logdet) => {
                let value = -logdet;
                if best.as_ref().is_none_or(|(b, _)| value < *b) {
                    best = Some((value, subset));
                }
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("brute_force_opt: skipped {skipped} singular subsets");
    }
    let (value, subset) = best.ok_or(MespError::SingularSubmatrix)?;
    let mut x = DVector::zeros(d);
    for i in subset {
        x[i] = 1.0;
    }
    Ok((value, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn instance_factor_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let d = rng.random_range(2..10);
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let c = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
            let inst = Instance::new(&c, 1, None).unwrap();
            let resid = (inst.factor().transpose() * inst.factor() - inst.covariance()).amax();
            assert!(resid <= 1e-10 * inst.covariance().amax());
            // logdet agrees with the eigenvalue route.
            let spec = sorted_eigenvalues(&c).unwrap();
            let logdet: f64 = spec.lambda.iter().map(|t| t.ln()).sum();
            assert!((inst.logdet_c() - logdet).abs() < 1e-8 * (1.0 + logdet.abs()));
        }
    }

    #[test]
    fn psd_gate_is_looser_than_spectral_clamp() {
        // lambda_min between the spectral clamp (-1e-10 ||C||_2) and the
        // loader gate (-1e-8 ||C||_2): the spectral op rejects, the loader
        // clamps and accepts.
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.5, 0.2, -3e-9]));
        assert!(matches!(
            sorted_eigenvalues(&c),
            Err(MespError::NonPsd { .. })
        ));
        let inst = Instance::new(&c, 2, None).unwrap();
        assert_eq!(inst.rank(), 3);
        let resid = (inst.factor().transpose() * inst.factor() - inst.covariance()).amax();
        assert!(resid <= 1e-10 * inst.covariance().amax().max(1.0));

        // Below the gate: rejected outright.
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.5, 0.2, -3e-7]));
        assert!(matches!(
            Instance::new(&c, 2, None),
            Err(MespError::NonPsd { .. })
        ));
    }

    #[test]
    fn instance_rejects_bad_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, -0.9, 1.0]);
        assert!(matches!(
            Instance::new(&m, 1, None),
            Err(MespError::NonSymmetric { .. })
        ));

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        assert!(matches!(
            Instance::new(&m, 1, None),
            Err(MespError::NonPsd { .. })
        ));

        let ok = DMatrix::identity(3, 3);
        assert!(matches!(
            Instance::new(&ok, 0, None),
            Err(MespError::OutOfRange(_))
        ));
        assert!(matches!(
            Instance::new(&ok, 4, None),
            Err(MespError::OutOfRange(_))
        ));
    }

    #[test]
    fn load_dense_text_2x2() {
        let dir = std::env::temp_dir().join("mesp_test_load");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("diag.txt");
        std::fs::write(&path, "2\n1 0\n0 4\n").unwrap();
        let inst = load_instance(&path, 1, None).unwrap();
        assert_eq!(inst.dim(), 2);
        assert!((inst.logdet_c() - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn matrix_roundtrip_and_formats() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 5;
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let c = &a * a.transpose() + DMatrix::identity(d, d) * 0.2;

        let dir = std::env::temp_dir().join("mesp_test_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.txt");
        write_matrix_dense(&path, &c).unwrap();
        let back = parse_matrix(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!((&back - &c).amax() <= 1e-12);

        // CSV layout.
        let csv: String = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| format!("{:?}", c[(i, j)]))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(detect_format(&csv).unwrap(), MatrixFormat::Csv);
        let back = parse_matrix(&csv).unwrap();
        assert!((&back - &c).amax() <= 1e-12);

        // Lower-triangle layout.
        let lower: String = (0..d)
            .map(|i| {
                (0..=i)
                    .map(|j| format!("{:?}", c[(i, j)]))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(
            detect_format(&lower).unwrap(),
            MatrixFormat::LowerTriangleText
        );
        let back = parse_matrix(&lower).unwrap();
        assert!((&back - &c).amax() <= 1e-12);

        assert_eq!(
            detect_format(&std::fs::read_to_string(&path).unwrap()).unwrap(),
            MatrixFormat::DenseText
        );
        assert!(detect_format("1 2 3\n4 5\n6").is_err());
    }

    #[test]
    fn optima_sidecar() {
        let dir = std::env::temp_dir().join("mesp_test_optima");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("optima.csv");
        std::fs::write(&path, "s,opt\n20,-111.482\n30,-161.539\n").unwrap();
        let map = load_optima(&path).unwrap();
        assert_eq!(map.len(), 2);
        assert!((map[&20] + 111.482).abs() < 1e-12);
    }

    #[test]
    fn synthetic_matches_spectrum_and_is_deterministic() {
        let spec = SyntheticSpec {
            d: 6,
            spectrum: SpectrumSpec::Explicit(vec![3.0, 2.5, 2.0, 1.5, 1.0, 0.5]),
            seed: 99,
        };
        let a = synthetic_instance(&spec, 2).unwrap();
        let b = synthetic_instance(&spec, 2).unwrap();
        assert_eq!(a.covariance(), b.covariance());

        let eigs = sorted_eigenvalues(a.covariance()).unwrap();
        let want = [3.0, 2.5, 2.0, 1.5, 1.0, 0.5];
        for (i, w) in want.iter().enumerate() {
            assert!((eigs.lambda[i] - w).abs() < 1e-10);
        }

        // Identity spectrum gives the identity matrix regardless of seed.
        let spec = SyntheticSpec {
            d: 3,
            spectrum: SpectrumSpec::Explicit(vec![1.0, 1.0, 1.0]),
            seed: 123,
        };
        let inst = synthetic_instance(&spec, 1).unwrap();
        assert!((inst.covariance() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn reference_instance_layout() {
        let inst = example_4x4();
        let c = inst.covariance();
        assert_eq!(inst.dim(), 4);
        assert_eq!(inst.subset_size(), 2);
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((c[(1, 1)] - 2.0).abs() < 1e-15);
        assert!((c[(2, 2)] - 1.0).abs() < 1e-15);
        assert!((c[(3, 3)] - 1.0).abs() < 1e-15);
        assert!(c[(0, 2)].abs() < 1e-15 && c[(1, 3)].abs() < 1e-15);
    }

    #[test]
    fn brute_force_reference_and_diagonal() {
        let inst = example_4x4();
        let (opt, argmin) = brute_force_opt(&inst).unwrap();
        assert!((opt + 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(argmin.as_slice(), &[0.0, 1.0, 1.0, 0.0]);

        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0, 4.0]));
        let inst = Instance::new(&c, 2, None).unwrap();
        let (opt, argmin) = brute_force_opt(&inst).unwrap();
        assert!((opt + 8.0f64.ln()).abs() < 1e-12);
        assert_eq!(argmin.as_slice(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn brute_force_complement_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..50 {
            let d = 6;
            let spec = SyntheticSpec::with_condition(d, 1000 + trial, 8.0);
            let s = rng.random_range(1..d);
            let inst = synthetic_instance(&spec, s).unwrap();
            let (opt, _) = brute_force_opt(&inst).unwrap();

            let c_inv = inst.covariance().clone().try_inverse().unwrap();
            let comp = Instance::new(&c_inv, d - s, None).unwrap();
            let (opt_comp, _) = brute_force_opt(&comp).unwrap();
            let mapped = opt_comp - inst.logdet_c();
            assert!(
                (opt - mapped).abs() < 1e-10,
                "trial {trial}: {opt} vs {mapped}"
            );
        }
    }

    #[test]
    fn brute_force_permutation_invariance() {
        let spec = SyntheticSpec::with_condition(5, 7, 6.0);
        let inst = synthetic_instance(&spec, 2).unwrap();
        let (opt, argmin) = brute_force_opt(&inst).unwrap();

        // Reverse-permute rows and columns.
        let d = inst.dim();
        let perm: Vec<usize> = (0..d).rev().collect();
        let c2 = DMatrix::from_fn(d, d, |i, j| inst.covariance()[(perm[i], perm[j])]);
        let inst2 = Instance::new(&c2, 2, None).unwrap();
        let (opt2, argmin2) = brute_force_opt(&inst2).unwrap();
        assert!((opt - opt2).abs() < 1e-10);
        // The minimizer permutes accordingly.
        for i in 0..d {
            assert_eq!(argmin[perm[i]], argmin2[i]);
        }
    }

    #[test]
    fn brute_force_refuses_huge() {
        let spec = SyntheticSpec::with_condition(40, 1, 4.0);
        let inst = synthetic_instance(&spec, 20).unwrap();
        assert!(matches!(
            brute_force_opt(&inst),
            Err(MespError::TooLarge { .. })
        ));
    }

    #[test]
    fn combinations_lexicographic() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(90, 20), 50_980_740_277_700_939_310);
    }
}
