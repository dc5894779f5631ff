//! Bound tables, dominance verification, and machine-readable exports.
//!
//! Rows of a run (method x subset size) execute on a worker pool; output
//! ordering is canonical (method order, then subset size) regardless of
//! completion order, and every numeric column except wall time is
//! reproducible bit-for-bit for a fixed seed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MespError, Result};
use crate::instance::{
    brute_force_opt, load_instance, load_optima, synthetic_instance, Instance, SyntheticSpec,
};
use crate::relax::{integrality_gap_constant, Method};
use crate::solver::{solve_method, SolverConfig};

/// Where the covariance comes from.
#[derive(Clone, Debug)]
pub enum InstanceSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = MespError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(MespError::Parse(format!("unknown format {other:?}"))),
        }
    }
}

/// One benchmark run: instance source, subset sizes, methods, solver
/// configuration, output routing, and an optional sidecar of known optima.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub source: InstanceSource,
    pub s_list: Vec<usize>,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub optima: Option<PathBuf>,
}

/// One row of the bound table. Numeric fields are absent when the row
/// failed; the error text travels separately (stderr, exit code).
#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub method: String,
    pub s: usize,
    pub lb: Option<f64>,
    pub gap: Option<f64>,
    pub conv: Option<f64>,
    pub time_s: f64,
    pub iters: Option<usize>,
    #[serde(skip)]
    pub error: Option<String>,
}

fn load_source(spec: &RunSpec, s: usize, optima: &BTreeMap<usize, f64>) -> Result<Instance> {
    let inst = match &spec.source {
        InstanceSource::File(path) => load_instance(path, s, None)?,
        InstanceSource::Synthetic(syn) => synthetic_instance(syn, s)?,
    };
    Ok(inst.with_known_opt(optima.get(&s).copied()))
}

fn optima_map(spec: &RunSpec) -> Result<BTreeMap<usize, f64>> {
    match &spec.optima {
        Some(path) => load_optima(path),
        None => Ok(BTreeMap::new()),
    }
}

/// Solve one (method, s) cell. Wall time covers the solve only, not
/// instance loading.
fn run_cell(inst: &Instance, method: Method, cfg: &SolverConfig) -> BoundRow {
    let start = Instant::now();
    match solve_method(inst, method, cfg) {
        Ok(res) => {
            let lb = res.lower_bound;
            BoundRow {
                method: method.name().to_string(),
                s: inst.subset_size(),
                lb: Some(lb),
                gap: inst.known_opt().map(|opt| opt - lb),
                conv: Some(res.conv_metric_final),
                time_s: start.elapsed().as_secs_f64(),
                iters: Some(res.iterations),
                error: None,
            }
        }
        Err(e) => BoundRow {
            method: method.name().to_string(),
            s: inst.subset_size(),
            lb: None,
            gap: None,
            conv: None,
            time_s: start.elapsed().as_secs_f64(),
            iters: None,
            error: Some(e.to_string()),
        },
    }
}

/// Produce one row per (method, s) pair. Per-row failures are reported in
/// the row and the run continues.
pub fn run_bounds(spec: &RunSpec) -> Result<Vec<BoundRow>> {
    if spec.methods.is_empty() {
        return Err(MespError::OutOfRange(
            "method list must be non-empty".into(),
        ));
    }
    let optima = optima_map(spec)?;
    // Load instances serially (errors here are fatal, not per-row).
    let mut cells = Vec::new();
    for &method in &spec.methods {
        for &s in &spec.s_list {
            cells.push((method, s));
        }
    }
    let instances: BTreeMap<usize, Instance> = {
        let mut m = BTreeMap::new();
        for &s in &spec.s_list {
            m.insert(s, load_source(spec, s, &optima)?);
        }
        m
    };
    let rows: Vec<BoundRow> = cells
        .par_iter()
        .map(|&(method, s)| run_cell(&instances[&s], method, &spec.solver))
        .collect();
    Ok(rows)
}

/// One verified relation between solved bounds.
#[derive(Clone, Debug, Serialize)]
pub struct RelationCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Outcome of a verification run: asserted relations plus informational
/// notes for relations that are recorded but deliberately not checked.
#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub relations: Vec<RelationCheck>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.relations.iter().all(|r| r.pass)
    }
}

/// Solver tolerance for the bound-dominance relations.
pub const TOL_DOM: f64 = 1e-3;

/// Solve every relaxation on each requested subset size and check the
/// dominance relations between the resulting certified bounds:
/// the scaling hierarchy of the linx family, the averaged connection
/// inequalities, the scaling invariance of the factorization bound, and the
/// integrality gap of the o-scaled linx bound (when enumeration is
/// feasible). Emits one PASS/FAIL relation per check.
pub fn run_verify(spec: &RunSpec) -> Result<VerifyReport> {
    let optima = optima_map(spec)?;
    let mut report = VerifyReport::default();

    for &s in &spec.s_list {
        let inst = load_source(spec, s, &optima)?;
        let methods = [
            Method::Gamma,
            Method::GammaC,
            Method::Linx,
            Method::LinxO,
            Method::LinxG,
            Method::LinxD,
            Method::GammaG,
            Method::GammaCG,
        ];
        let solved: BTreeMap<&'static str, f64> = methods
            .par_iter()
            .map(|&m| solve_method(&inst, m, &spec.solver).map(|r| (m.name(), r.lower_bound)))
            .collect::<Result<_>>()?;
        let lb = |m: Method| solved[m.name()];

        let tag = |name: &str| format!("s={s}: {name}");
        fn check(rels: &mut Vec<RelationCheck>, name: String, lhs: f64, rhs: f64) {
            rels.push(RelationCheck {
                name,
                lhs,
                rhs,
                pass: lhs >= rhs - TOL_DOM,
            });
        }

        check(
            &mut report.relations,
            tag("linx-d >= linx-g"),
            lb(Method::LinxD),
            lb(Method::LinxG),
        );
        check(
            &mut report.relations,
            tag("linx-g >= linx-o"),
            lb(Method::LinxG),
            lb(Method::LinxO),
        );
        check(
            &mut report.relations,
            tag("linx-o >= linx"),
            lb(Method::LinxO),
            lb(Method::Linx),
        );
        check(
            &mut report.relations,
            tag("linx-o >= avg(gamma, gamma-c)"),
            lb(Method::LinxO),
            0.5 * (lb(Method::Gamma) + lb(Method::GammaC)),
        );
        check(
            &mut report.relations,
            tag("linx-d >= avg(gamma-g, gamma-c-g)"),
            lb(Method::LinxD),
            0.5 * (lb(Method::GammaG) + lb(Method::GammaCG)),
        );
        // Scaling invariance of the factorization bound: two-sided.
        let diff = (lb(Method::GammaG) - lb(Method::Gamma)).abs();
        report.relations.push(RelationCheck {
            name: tag("|gamma-g - gamma| <= tol"),
            lhs: diff,
            rhs: TOL_DOM,
            pass: diff <= TOL_DOM,
        });

        match brute_force_opt(&inst) {
            Ok((opt, _)) => {
                let constant = integrality_gap_constant(inst.dim(), s)?;
                check(
                    &mut report.relations,
                    tag("linx-o >= exact - gap-constant"),
                    lb(Method::LinxO),
                    opt - constant,
                );
            }
            Err(MespError::TooLarge { .. }) => {
                report
                    .notes
                    .push(format!("s={s}: enumeration skipped (too many subsets)"));
            }
            Err(e) => return Err(e),
        }

        // Recorded but not asserted: whether the g-scaled linx bound also
        // dominates the averaged g-scaled factorization bounds is an open
        // relation, so it is logged only.
        report.notes.push(format!(
            "s={s}: linx-g vs avg(gamma-g, gamma-c-g): {:.6} vs {:.6} (recorded, not checked)",
            lb(Method::LinxG),
            0.5 * (lb(Method::GammaG) + lb(Method::GammaCG)),
        ));
    }
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|t| format!("{t}")).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|t| format!("{t}")).unwrap_or_default()
}

/// Render rows as CSV with the fixed column set
/// `method,s,lb,gap,conv,time_s,iters` (UTF-8, LF).
pub fn rows_to_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from("method,s,lb,gap,conv,time_s,iters\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            r.s,
            fmt_opt(r.lb),
            fmt_opt(r.gap),
            fmt_opt(r.conv),
            r.time_s,
            fmt_opt_usize(r.iters),
        ));
    }
    out
}

/// Parse rows back from the CSV layout (round-trip of [`rows_to_csv`]).
pub fn rows_from_csv(text: &str) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "method,s,lb,gap,conv,time_s,iters" {
                return Err(MespError::Parse(format!("unexpected header {line:?}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(MespError::Parse(format!(
                "line {}: expected 7 fields",
                lineno + 1
            )));
        }
        let opt = |f: &str| -> Result<Option<f64>> {
            if f.is_empty() {
                Ok(None)
            } else {
                f.parse::<f64>()
                    .map(Some)
                    .map_err(|e| MespError::Parse(format!("line {}: {e}", lineno + 1)))
            }
        };
        rows.push(BoundRow {
            method: fields[0].to_string(),
            s: fields[1]
                .parse()
                .map_err(|e| MespError::Parse(format!("line {}: {e}", lineno + 1)))?,
            lb: opt(fields[2])?,
            gap: opt(fields[3])?,
            conv: opt(fields[4])?,
            time_s: fields[5]
                .parse()
                .map_err(|e| MespError::Parse(format!("line {}: {e}", lineno + 1)))?,
            iters: if fields[6].is_empty() {
                None
            } else {
                Some(
                    fields[6]
                        .parse()
                        .map_err(|e| MespError::Parse(format!("line {}: {e}", lineno + 1)))?,
                )
            },
            error: None,
        });
    }
    Ok(rows)
}

/// Render rows as a JSON array with the same keys as the CSV columns.
pub fn rows_to_json(rows: &[BoundRow]) -> Result<String> {
    serde_json::to_string_pretty(rows)
        .map_err(|e| MespError::Parse(format!("json encoding failed: {e}")))
}

/// Render rows as an aligned text table.
pub fn rows_to_table(rows: &[BoundRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>4} {:>14} {:>10} {:>10} {:>9} {:>6}\n",
        "method", "s", "lb", "gap", "conv", "time_s", "iters"
    ));
    for r in rows {
        let lb =
            r.lb.map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "-".into());
        let gap = r
            .gap
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into());
        let conv = r
            .conv
            .map(|v| format!("{v:.2e}"))
            .unwrap_or_else(|| "-".into());
        let iters = r.iters.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<12} {:>4} {:>14} {:>10} {:>10} {:>9.3} {:>6}\n",
            r.method, r.s, lb, gap, conv, r.time_s, iters
        ));
        if let Some(err) = &r.error {
            out.push_str(&format!("  error: {err}\n"));
        }
    }
    out
}

/// Write rows in the requested format to the given path or stdout.
pub fn export_rows(rows: &[BoundRow], format: OutputFormat, out: Option<&PathBuf>) -> Result<()> {
    let text = match format {
        OutputFormat::Table => rows_to_table(rows),
        OutputFormat::Csv => rows_to_csv(rows),
        OutputFormat::Json => {
            let mut t = rows_to_json(rows)?;
            t.push('\n');
            t
        }
    };
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
