//! Thin command-line front end over the bench harness.
//!
//! Exit codes: 0 on full success, 1 when any row failed, 2 when any
//! verification relation failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mesp::bench::{export_rows, run_bounds, run_verify, InstanceSource, OutputFormat, RunSpec};
use mesp::instance::{SpectrumSpec, SyntheticSpec};
use mesp::relax::Method;
use mesp::solver::SolverConfig;

#[derive(Parser)]
#[command(
    name = "mesp",
    version,
    about = "Lower bounds for maximum-entropy sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute certified lower bounds, one row per (method, s).
    Bound(RunArgs),
    /// Solve all relaxations and check the dominance relations between them.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Covariance matrix file (dense text, CSV, or lower-triangle text).
    #[arg(long, conflicts_with = "synthetic")]
    instance: Option<PathBuf>,

    /// Synthetic instance as `d,seed[,cond]` (condition number defaults to 10).
    #[arg(long, required_unless_present = "instance")]
    synthetic: Option<String>,

    /// Comma-separated subset sizes.
    #[arg(long = "s", value_delimiter = ',', required = true)]
    s_list: Vec<usize>,

    /// Comma-separated methods (default: all seven).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,

    /// Iteration cap per solve.
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,

    /// Convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,

    /// Output format.
    #[arg(long, default_value = "table")]
    format: String,

    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Sidecar CSV of known integer optima (`s,opt`, minimization form).
    #[arg(long)]
    optima: Option<PathBuf>,

    /// Solver seed (recorded for reproducibility).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_synthetic(text: &str) -> Result<SyntheticSpec, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(format!("expected `d,seed[,cond]`, got {text:?}"));
    }
    let d: usize = parts[0]
        .parse()
        .map_err(|e| format!("bad dimension: {e}"))?;
    let seed: u64 = parts[1].parse().map_err(|e| format!("bad seed: {e}"))?;
    let cond: f64 = match parts.get(2) {
        Some(c) => c
            .parse()
            .map_err(|e| format!("bad condition number: {e}"))?,
        None => 10.0,
    };
    Ok(SyntheticSpec {
        d,
        spectrum: SpectrumSpec::ConditionNumber(cond),
        seed,
    })
}

fn build_spec(args: &RunArgs) -> Result<RunSpec, String> {
    let source = match (&args.instance, &args.synthetic) {
        (Some(path), None) => InstanceSource::File(path.clone()),
        (None, Some(text)) => InstanceSource::Synthetic(parse_synthetic(text)?),
        _ => return Err("exactly one of --instance and --synthetic is required".into()),
    };
    let methods = if args.methods.is_empty() {
        Method::CLI.to_vec()
    } else {
        args.methods
            .iter()
            .map(|m| m.parse::<Method>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?
    };
    let format: OutputFormat = args
        .format
        .parse()
        .map_err(|e: mesp::MespError| e.to_string())?;
    Ok(RunSpec {
        source,
        s_list: args.s_list.clone(),
        methods,
        solver: SolverConfig {
            max_iters: args.max_iters,
            tol_conv: args.tol,
            seed: args.seed,
            ..Default::default()
        },
        format,
        out: args.out.clone(),
        optima: args.optima.clone(),
    })
}

fn cmd_bound(args: &RunArgs) -> ExitCode {
    let spec = match build_spec(args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let rows = match run_bounds(&spec) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut failed = false;
    for row in &rows {
        if let Some(err) = &row.error {
            eprintln!("row {} s={} failed: {err}", row.method, row.s);
            failed = true;
        }
    }
    if let Err(e) = export_rows(&rows, spec.format, spec.out.as_ref()) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(u8::from(failed))
}

fn cmd_verify(args: &RunArgs) -> ExitCode {
    let spec = match build_spec(args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let report = match run_verify(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for rel in &report.relations {
        println!(
            "{} {:<42} lhs={:+.6} rhs={:+.6}",
            if rel.pass { "PASS" } else { "FAIL" },
            rel.name,
            rel.lhs,
            rel.rhs
        );
    }
    for note in &report.notes {
        println!("note {note}");
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Bound(args) => cmd_bound(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}
