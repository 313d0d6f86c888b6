//! `tmvn compute|convergence|scaling|verify`.

use crate::error::{Result, TmvnError};
use crate::exec::{self, Execution};
use crate::expcov::{self, ExpcovOptions};
use crate::fourier::Backend;
use crate::greens;
use crate::oracle::{self, OracleEstimate};
use crate::report::RunReport;
use crate::spec::{HModel, ProblemSpec, Problem, Resolved};
use crate::tridiag::{self, TridiagOptions};
use crate::Scaled;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_FAIL: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Relative tolerance of the quadrature cross-check.
pub const QUAD_TOLERANCE: f64 = 1e-8;
/// Largest accepted transfer-identity residual.
pub const TRANSFER_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Parser)]
#[command(name = "tmvn", version, about = "Truncated multivariate normal integrals by hierarchical Fourier decoupling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve once and print a JSON report.
    Compute(Common),
    /// φ for each M in `--m`, as CSV.
    Convergence(Common),
    /// Median wall time for each N in `--n-list`, as CSV.
    Scaling(ScalingArgs),
    /// Compare against an independent reference.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file (JSON).
    pub spec: PathBuf,
    /// Fourier half-count(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    #[arg(long)]
    pub backend: Option<Backend>,
    /// Worker threads; falls back to TMVN_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Plain loops instead of the thread pool.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level `key=value` replacement in the problem file (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    /// Timed runs per N; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Gauss–Legendre points per dimension and smooth panel.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Monte Carlo samples (used when N > 4).
    #[arg(long, default_value_t = 10_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub mc_seed: u64,
    /// Multiply one transfer coefficient: `NODE:INDEX:FACTOR`.
    #[arg(long, hide = true)]
    pub corrupt_transfer: Option<String>,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &TmvnError) -> i32 {
    match e {
        TmvnError::Schema(_) | TmvnError::Config(_) => EXIT_SCHEMA,
        TmvnError::Numeric { .. } | TmvnError::Domain(_) => EXIT_NUMERIC,
        TmvnError::CostCap(_) | TmvnError::Io(_) => EXIT_FAIL,
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let common = match &cli.command {
        Command::Compute(c) | Command::Convergence(c) => c,
        Command::Scaling(s) => &s.common,
        Command::Verify(v) => &v.common,
    };
    let threads = resolve_threads(common.threads)?;
    exec::with_threads(threads, || match &cli.command {
        Command::Compute(c) => cmd_compute(c),
        Command::Convergence(c) => cmd_convergence(c),
        Command::Scaling(s) => cmd_scaling(s),
        Command::Verify(v) => cmd_verify(v),
    })
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("TMVN_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| TmvnError::Config(format!("TMVN_THREADS={v:?} is not a thread count"))),
        _ => Ok(None),
    }
}

impl Common {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// Loads the problem file with overrides, then `extra` on top.
    fn load(&self, extra: &[String]) -> Result<(Resolved, PathBuf)> {
        let mut overrides = self.overrides.clone();
        overrides.extend_from_slice(extra);
        if let Some(b) = self.backend {
            overrides.push(format!("nufft_backend={}", b.name()));
        }
        let (spec, base) = ProblemSpec::load(&self.spec, &overrides)?;
        Ok((spec.resolve(&base)?, base))
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// Runs the solver selected by the problem and builds its report.
pub fn solve(resolved: &Resolved, exec: Execution) -> Result<RunReport> {
    solve_with_table(resolved, exec, None)
}

fn solve_with_table(resolved: &Resolved, exec: Execution, table: Option<&expcov::NodeTransferTable>) -> Result<RunReport> {
    let spec = &resolved.spec;
    let m = spec.m;
    let start = Instant::now();
    let mut report = match &resolved.problem {
        Problem::Tridiagonal(t) => {
            let mut opts = TridiagOptions::new(m);
            opts.exec = exec;
            let sol = match &resolved.h {
                HModel::Constant(c) => {
                    let mut s = tridiag::compute_phi_tridiag(t, &opts)?;
                    s.phi.mantissa *= c;
                    s
                }
                HModel::LowRank(h) => tridiag::compute_phi_tridiag_lowrank_h(t, h, &opts)?,
            };
            base_report(resolved, sol.phi, sol.imag_ratio, sol.timings, sol.levels, expcov::condition_estimate(t.n, f64::EPSILON))
        }
        Problem::Expcov(e) => {
            let opts = ExpcovOptions { m, backend: spec.nufft_backend, tol: spec.nufft_tol, memory_block: spec.memory_block, exec };
            let sol = match (&resolved.h, table) {
                (HModel::Constant(c), None) => {
                    let mut s = expcov::compute_phi_expcov(e, &opts)?;
                    s.phi.mantissa *= c;
                    s
                }
                (HModel::Constant(c), Some(t)) => {
                    let mut s = expcov::compute_phi_expcov_with_table(e, &opts, t)?;
                    s.phi.mantissa *= c;
                    s
                }
                (HModel::LowRank(h), _) => expcov::compute_phi_expcov_lowrank_h(e, h, &opts)?,
            };
            let mut r = base_report(resolved, sol.phi, sol.imag_ratio, sol.timings, sol.levels, sol.condition_estimate);
            r.max_range = Some(sol.max_range);
            r.node_ranges = Some(sol.ranges);
            r.z = Some(e.z.z.clone());
            r
        }
    };
    report.timings.total = start.elapsed().as_secs_f64();
    Ok(report)
}

fn base_report(
    resolved: &Resolved,
    phi: Scaled,
    imag_ratio: f64,
    timings: crate::report::Timings,
    levels: Vec<crate::report::LevelDiagnostic>,
    condition_estimate: f64,
) -> RunReport {
    let spec = &resolved.spec;
    let value = phi.value();
    RunReport {
        phi: (value.is_finite() && value != 0.0).then_some(value),
        phi_text: phi.to_sci(),
        log10_phi: phi.log10_abs(),
        phi_scaled: phi,
        m: spec.m,
        n: spec.n,
        model: spec.model.name().to_string(),
        backend: spec.nufft_backend.name().to_string(),
        nufft_tol: spec.nufft_tol,
        threads: exec::current_threads(),
        timings,
        condition_estimate,
        imag_ratio,
        max_range: None,
        node_ranges: None,
        seed: resolved.seed,
        z: None,
        level_diagnostics: levels,
        version: version_string(),
        spec: spec.clone(),
    }
}

pub fn version_string() -> String {
    match option_env!("TMVN_BUILD_REV") {
        Some(rev) => format!("{}+{rev}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn phi_of(r: &RunReport) -> Scaled {
    r.phi_scaled
}

/// Float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn single_m(c: &Common) -> Result<Vec<String>> {
    match c.m.as_slice() {
        [] => Ok(Vec::new()),
        [m] => Ok(vec![format!("m={m}")]),
        _ => Err(TmvnError::Config("this command takes a single --m".into())),
    }
}

fn cmd_compute(c: &Common) -> Result<i32> {
    let (resolved, _) = c.load(&single_m(c)?)?;
    let report = solve(&resolved, c.exec())?;
    c.emit(&(to_json(&report)? + "\n"))?;
    Ok(0)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| TmvnError::Config(e.to_string()))
}

/// Rows `(m, phi, rel_diff_vs_prev)`.
pub fn convergence_table(c: &Common) -> Result<Vec<(usize, RunReport, Option<f64>)>> {
    let ms = if c.m.is_empty() { vec![c.load(&[])?.0.spec.m] } else { c.m.clone() };
    let mut rows: Vec<(usize, RunReport, Option<f64>)> = Vec::new();
    for m in ms {
        let (resolved, _) = c.load(&[format!("m={m}")])?;
        let report = solve(&resolved, c.exec())?;
        let rel = rows.last().map(|(_, prev, _)| phi_of(prev).rel_diff(&phi_of(&report)));
        rows.push((m, report, rel));
    }
    Ok(rows)
}

fn cmd_convergence(c: &Common) -> Result<i32> {
    let rows = convergence_table(c)?;
    let mut csv = String::from("m,phi,rel_diff_vs_prev\n");
    for (m, r, rel) in &rows {
        csv += &format!("{m},{},{}\n", r.phi_text, rel.map(fmt17).unwrap_or_default());
    }
    c.emit(&csv)?;
    Ok(0)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Rows `(n, m, median seconds, ratio to previous N)`.
pub fn scaling_table(s: &ScalingArgs) -> Result<Vec<(usize, usize, f64, Option<f64>)>> {
    let c = &s.common;
    let mut rows: Vec<(usize, usize, f64, Option<f64>)> = Vec::new();
    for &n in &s.n_list {
        let mut extra = single_m(c)?;
        extra.push(format!("n={n}"));
        let (resolved, _) = c.load(&extra)?;
        let mut times = Vec::new();
        for _ in 0..s.repeats.max(1) {
            let t0 = Instant::now();
            solve(&resolved, c.exec())?;
            times.push(t0.elapsed().as_secs_f64());
        }
        let t = median(times);
        let ratio = rows.last().map(|r| t / r.2);
        rows.push((n, resolved.spec.m, t, ratio));
    }
    Ok(rows)
}

fn cmd_scaling(s: &ScalingArgs) -> Result<i32> {
    let rows = scaling_table(s)?;
    let mut csv = String::from("n,m,seconds,ratio_vs_prev\n");
    for (n, m, t, ratio) in &rows {
        csv += &format!("{n},{m},{},{}\n", fmt17(*t), ratio.map(fmt17).unwrap_or_default());
    }
    s.common.emit(&csv)?;
    Ok(0)
}

/// Outcome of `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub solver: RunReport,
    pub oracle: OracleEstimate,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Accepted `|φ - reference|`.
    pub allowed_error: f64,
    pub oracle_passed: bool,
    pub spd_min_eigenvalue: Option<f64>,
    pub spd_violations: Option<Vec<usize>>,
    pub transfer_residual: Option<f64>,
    pub passed: bool,
}

pub fn verify(v: &VerifyArgs) -> Result<VerifyReport> {
    let c = &v.common;
    let (resolved, _) = c.load(&single_m(c)?)?;
    let exec = c.exec();
    let n = resolved.spec.n;
    let (mut spd_min, mut spd_viol, mut residual, mut table) = (None, None, None, None);
    if let Problem::Expcov(e) = &resolved.problem {
        let tree = e.tree()?;
        let (z, _) = e.z.scaled();
        let spd = greens::verify_spd(&tree, &z);
        spd_min = Some(spd.min());
        spd_viol = Some(spd.violations.clone());
        let mut t = expcov::downward_pass(&tree)?;
        if let Some(hook) = &v.corrupt_transfer {
            let (id, k, f) = parse_corruption(hook)?;
            if id >= tree.nodes.len() || tree.nodes[id].role == crate::tree::NodeRole::Root || k >= 6 {
                return Err(TmvnError::Config(format!("no transfer coefficient {k} at node {id}")));
            }
            t.corrupt(id, k, f);
        }
        residual = Some(expcov::audit_transfers(&tree, &t, 16)?);
        table = Some(t);
    }
    let solver = solve_with_table(&resolved, exec, table.as_ref())?;
    let (a, b) = match &resolved.problem {
        Problem::Tridiagonal(t) => (t.a.clone(), t.b.clone()),
        Problem::Expcov(e) => (e.a.clone(), e.b.clone()),
    };
    let matrix = oracle::build_dense_matrix(&resolved.problem)?;
    let oracle = if n <= 4 {
        oracle::quad_reference(&matrix, &a, &b, &resolved.h, v.points, exec)?
    } else {
        oracle::mc_reference(&matrix, &a, &b, &resolved.h, v.samples, v.mc_seed, exec)?
    };
    let phi = phi_of(&solver).value();
    let abs_error = (phi - oracle.value).abs();
    let allowed_error = match oracle.method {
        oracle::OracleMethod::Quadrature => QUAD_TOLERANCE * oracle.value.abs(),
        oracle::OracleMethod::MonteCarlo => oracle.error_bound,
    };
    let oracle_passed = abs_error <= allowed_error;
    let passed = oracle_passed
        && spd_viol.as_ref().is_none_or(|v: &Vec<usize>| v.is_empty())
        && residual.is_none_or(|r| r < TRANSFER_TOLERANCE);
    Ok(VerifyReport {
        solver,
        rel_error: abs_error / oracle.value.abs(),
        oracle,
        abs_error,
        allowed_error,
        oracle_passed,
        spd_min_eigenvalue: spd_min,
        spd_violations: spd_viol,
        transfer_residual: residual,
        passed,
    })
}

fn parse_corruption(s: &str) -> Result<(usize, usize, f64)> {
    let bad = || TmvnError::Config(format!("--corrupt-transfer expects NODE:INDEX:FACTOR, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn cmd_verify(v: &VerifyArgs) -> Result<i32> {
    let report = verify(v)?;
    v.common.emit(&(to_json(&report)? + "\n"))?;
    Ok(if report.passed { 0 } else { EXIT_FAIL })
}

/// Loads and resolves a problem file without running anything.
pub fn load_problem(path: &Path, overrides: &[String]) -> Result<Resolved> {
    let (spec, base) = ProblemSpec::load(path, overrides)?;
    spec.resolve(&base)
}
