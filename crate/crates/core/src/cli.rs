//! Command-line front end: problem files in, result JSON and plot CSV out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{
    hermite_inner, lower_abscissa_esf, lower_abscissa_gl, lower_minrealpart, upper_abscissa,
    Certificate, Direction, Method, SolverStats,
};
use crate::oracle::{
    abscissa_oracle, gap_report_for, min_realpart_oracle, GapReport, GridSpec, RegionDescription,
};
use crate::poly::{param_var_names, parse_poly, Monomial, MultiPoly, ParamPolynomial};
use crate::sdp::SolverConfig;

/// Exit status for malformed input.
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub name: String,
    pub n: usize,
    pub m: usize,
    /// `p_0..p_{m-1}`; the leading coefficient is 1.
    pub coefficients: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermite_matrix: Option<Vec<Vec<String>>>,
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ProblemFile = serde_json::from_str(&text)?;
        file.check()?;
        Ok(file)
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidPolynomial("a problem needs at least one parameter".into()));
        }
        if self.coefficients.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: self.coefficients.len(),
            });
        }
        Ok(())
    }

    pub fn polynomial(&self) -> Result<ParamPolynomial> {
        self.check()?;
        let vars = param_var_names(self.n);
        let lower = self
            .coefficients
            .iter()
            .map(|c| parse_poly(c, &vars))
            .collect::<Result<Vec<_>>>()?;
        ParamPolynomial::from_lower(self.n, lower)
    }

    pub fn hermite(&self) -> Result<Option<Vec<Vec<MultiPoly>>>> {
        let vars = param_var_names(self.n);
        self.hermite_matrix
            .as_ref()
            .map(|rows| {
                rows.iter()
                    .map(|row| row.iter().map(|e| parse_poly(e, &vars)).collect())
                    .collect()
            })
            .transpose()
    }
}

/// A polynomial as coefficients in graded order with the exponent legend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyRecord {
    pub vars: Vec<String>,
    pub monomials: Vec<Vec<u32>>,
    pub coefficients: Vec<f64>,
}

impl PolyRecord {
    pub fn from_poly(p: &MultiPoly) -> Self {
        let mut terms: Vec<(Monomial, f64)> = p
            .terms()
            .map(|(m, c)| (m.clone(), crate::poly::rational_to_f64(c)))
            .collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        PolyRecord {
            vars: p.vars().to_vec(),
            monomials: terms.iter().map(|(m, _)| m.0.clone()).collect(),
            coefficients: terms.iter().map(|(_, c)| *c).collect(),
        }
    }

    pub fn to_poly(&self) -> Result<MultiPoly> {
        if self.monomials.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.monomials.len(),
                got: self.coefficients.len(),
            });
        }
        if let Some(bad) = self.monomials.iter().find(|m| m.len() != self.vars.len()) {
            return Err(Error::DimensionMismatch {
                expected: self.vars.len(),
                got: bad.len(),
            });
        }
        Ok(MultiPoly::from_f64_terms(
            &self.vars,
            self.monomials
                .iter()
                .zip(&self.coefficients)
                .map(|(m, &c)| (Monomial(m.clone()), c)),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<(f64, f64)>>,
    pub volume: f64,
}

impl From<&RegionDescription> for RegionSummary {
    fn from(r: &RegionDescription) -> Self {
        RegionSummary {
            intervals: match r {
                RegionDescription::Intervals(iv) => Some(iv.clone()),
                RegionDescription::Mask { .. } => None,
            },
            volume: r.volume(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub grid_points: usize,
    pub l1_gap: f64,
    pub linf_gap: f64,
    pub linf_at: Vec<f64>,
    pub violation_count: usize,
    pub coarse_violation_count: usize,
    pub max_violation: f64,
    pub sublevel_approx: RegionSummary,
    pub sublevel_oracle: RegionSummary,
    /// Volume of the symmetric difference of the two sublevel sets.
    pub sublevel_mismatch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_violation_count: Option<usize>,
}

impl From<&GapReport> for GapSummary {
    fn from(g: &GapReport) -> Self {
        GapSummary {
            grid_points: g.grid.points,
            l1_gap: g.l1_gap,
            linf_gap: g.linf_gap,
            linf_at: g.linf_at.clone(),
            violation_count: g.violation_count,
            coarse_violation_count: g.coarse_violation_count,
            max_violation: g.max_violation,
            sublevel_approx: (&g.sublevel_approx).into(),
            sublevel_oracle: (&g.sublevel_oracle).into(),
            sublevel_mismatch: g
                .sublevel_approx
                .symmetric_difference(&g.sublevel_oracle)
                .unwrap_or(f64::NAN),
            hypothesis_violation_count: g.hypothesis_violations.as_ref().map(Vec::len),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem: String,
    pub method: Method,
    pub direction: Direction,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dprime: Option<usize>,
    pub objective: f64,
    pub approx: PolyRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_approx: Option<PolyRecord>,
    pub solver_stats: SolverStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_stats: Option<SolverStats>,
    pub identity_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSummary>,
}

impl RunResult {
    pub fn from_certificate(problem: &str, cert: &Certificate) -> Self {
        let a = &cert.approx;
        RunResult {
            problem: problem.to_string(),
            method: a.method,
            direction: a.direction,
            d: a.level_d,
            dprime: a.aux_level_dprime,
            objective: a.objective,
            approx: PolyRecord::from_poly(&a.poly),
            aux_approx: a.aux_poly.as_ref().map(PolyRecord::from_poly),
            solver_stats: a.solver_stats.clone(),
            stage1_stats: cert.stage1.as_ref().map(|c| c.approx.solver_stats.clone()),
            identity_residual: cert.identity_residual,
            gap: None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "abscissa", version, about = "Polynomial bounds on the abscissa of parametric polynomials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper bound on the abscissa.
    Upper(RunArgs),
    /// Lower bound on the abscissa through symmetric functions of the roots.
    LowerEsf(RunArgs),
    /// Lower bound on the abscissa through the Gauss-Lucas two-stage scheme.
    LowerGl {
        #[command(flatten)]
        run: RunArgs,
        /// Level of the stage-1 upper bound on the derivative.
        #[arg(long)]
        dprime: usize,
    },
    /// Lower bound on the smallest real part of the roots.
    NaiveLower(RunArgs),
    /// Inner approximation of the stability region from the Hermite matrix.
    Hermite(RunArgs),
    /// Checks a stored result against the root oracle.
    Verify {
        #[arg(long)]
        problem: PathBuf,
        /// Result JSON written by a previous run.
        #[arg(long)]
        approx: PathBuf,
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a range of levels and tabulates the objectives.
    Sweep {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        problem: PathBuf,
        /// Single level or inclusive range `a..b`.
        #[arg(long, value_parser = parse_levels)]
        d: Levels,
        #[arg(long)]
        dprime: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Writes all results as a JSON array.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub d: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub check: CheckArgs,
    /// Result JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub feas_tol: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            gap_tol: self.gap_tol,
            feas_tol: self.feas_tol,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Grid points per parameter (default 1001 for one parameter, 201 otherwise).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub plot_csv: Option<PathBuf>,
    /// Exit with status 3 when the bound fails anywhere on the grid.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Upper,
    LowerEsf,
    LowerGl,
    NaiveLower,
    Hermite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Levels {
    pub first: usize,
    pub last: usize,
}

fn parse_levels(s: &str) -> std::result::Result<Levels, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad level `{t}`: {e}"));
    let (first, last) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if first > last {
        return Err(format!("empty level range {s}"));
    }
    Ok(Levels { first, last })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolverFailed { .. } | Error::CertificateResidual { .. } | Error::Stage1Failed(_) => {
            EXIT_SOLVER
        }
        _ => EXIT_INPUT,
    }
}

/// Parses arguments and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Upper(a) => run_one(MethodArg::Upper, &a, None),
        Command::LowerEsf(a) => run_one(MethodArg::LowerEsf, &a, None),
        Command::LowerGl { run, dprime } => run_one(MethodArg::LowerGl, &run, Some(dprime)),
        Command::NaiveLower(a) => run_one(MethodArg::NaiveLower, &a, None),
        Command::Hermite(a) => run_one(MethodArg::Hermite, &a, None),
        Command::Verify { problem, approx, check, out } => verify(&problem, &approx, &check, out.as_deref()),
        Command::Sweep { method, problem, d, dprime, solver, out } => {
            sweep(method, &problem, d, dprime, &solver, out.as_deref())
        }
    }
}

/// Runs one driver on a problem file.
pub fn solve_problem(
    method: MethodArg,
    file: &ProblemFile,
    d: usize,
    dprime: Option<usize>,
    cfg: &SolverConfig,
) -> Result<Certificate> {
    let p = file.polynomial()?;
    let h = if method == MethodArg::Hermite {
        Some(file.hermite()?.ok_or_else(|| {
            Error::InvalidPolynomial(format!("problem `{}` has no hermite_matrix", file.name))
        })?)
    } else {
        None
    };
    run_method(method, &p, h.as_deref(), d, dprime, cfg)
}

/// Runs one driver. The Hermite method reads only `hermite`; the
/// Gauss-Lucas method needs `dprime`.
pub fn run_method(
    method: MethodArg,
    p: &ParamPolynomial,
    hermite: Option<&[Vec<MultiPoly>]>,
    d: usize,
    dprime: Option<usize>,
    cfg: &SolverConfig,
) -> Result<Certificate> {
    match method {
        MethodArg::Upper => upper_abscissa(p, d, cfg),
        MethodArg::LowerEsf => lower_abscissa_esf(p, d, cfg),
        MethodArg::NaiveLower => lower_minrealpart(p, d, cfg),
        MethodArg::LowerGl => {
            let dp = dprime.ok_or_else(|| {
                Error::InvalidPolynomial("the Gauss-Lucas scheme needs --dprime".into())
            })?;
            lower_abscissa_gl(p, d, dp, cfg)
        }
        MethodArg::Hermite => {
            let h = hermite.ok_or_else(|| Error::InvalidPolynomial("no Hermite matrix given".into()))?;
            hermite_inner(h, p.n(), d, cfg)
        }
    }
}

fn grid_for(n: usize, check: &CheckArgs) -> Result<GridSpec> {
    match check.grid {
        Some(points) => GridSpec::new(n, points),
        None => Ok(GridSpec::default_for(n)),
    }
}

fn run_one(method: MethodArg, args: &RunArgs, dprime: Option<usize>) -> Result<i32> {
    let file = ProblemFile::load(&args.problem)?;
    let p = file.polynomial()?;
    let grid = grid_for(file.n, &args.check)?;
    let cert = solve_problem(method, &file, args.d, dprime, &args.solver.config())?;
    let mut result = RunResult::from_certificate(&file.name, &cert);
    let a = &cert.approx;
    let report = gap_report_for(&a.poly, a.direction, a.aux_poly.as_ref(), &p, &grid)?;
    result.gap = Some((&report).into());
    if let Some(path) = &args.check.plot_csv {
        std::fs::write(path, plot_csv(&a.poly, a.direction, &p, &grid))?;
    }
    emit(&serde_json::to_string_pretty(&result)?, args.out.as_deref())?;
    Ok(strict_status(&report, args.check.strict))
}

fn strict_status(report: &GapReport, strict: bool) -> i32 {
    if strict && report.violation_count > 0 {
        eprintln!(
            "{} grid points violate the bound (largest by {:.3e})",
            report.violation_count, report.max_violation
        );
        EXIT_VIOLATION
    } else {
        0
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn verify(problem: &Path, approx: &Path, check: &CheckArgs, out: Option<&Path>) -> Result<i32> {
    let file = ProblemFile::load(problem)?;
    let p = file.polynomial()?;
    let result: RunResult = serde_json::from_str(&std::fs::read_to_string(approx)?)?;
    let poly = result.approx.to_poly()?;
    let aux = result.aux_approx.as_ref().map(PolyRecord::to_poly).transpose()?;
    let grid = grid_for(file.n, check)?;
    let report = gap_report_for(&poly, result.direction, aux.as_ref(), &p, &grid)?;
    if let Some(path) = &check.plot_csv {
        std::fs::write(path, plot_csv(&poly, result.direction, &p, &grid))?;
    }
    let summary: GapSummary = (&report).into();
    emit(&serde_json::to_string_pretty(&summary)?, out)?;
    Ok(strict_status(&report, check.strict))
}

fn sweep(
    method: MethodArg,
    problem: &Path,
    levels: Levels,
    dprime: Option<usize>,
    solver: &SolverArgs,
    out: Option<&Path>,
) -> Result<i32> {
    let file = ProblemFile::load(problem)?;
    file.polynomial()?;
    let cfg = solver.config();
    let runs: Vec<(usize, Result<Certificate>)> = (levels.first..=levels.last)
        .into_par_iter()
        .map(|d| (d, solve_problem(method, &file, d, dprime, &cfg)))
        .collect();
    let mut table = String::from("d\tobjective\tstatus\titerations\n");
    let mut results = Vec::new();
    let mut failed = None;
    for (d, run) in &runs {
        match run {
            Ok(cert) => {
                let s = &cert.approx.solver_stats;
                let _ = writeln!(table, "{d}\t{}\t{:?}\t{}", cert.approx.objective, s.status, s.iterations);
                results.push(RunResult::from_certificate(&file.name, cert));
            }
            Err(e) => {
                let _ = writeln!(table, "{d}\t-\tfailed: {e}\t-");
                failed.get_or_insert(exit_code(e));
            }
        }
    }
    print!("{table}");
    if let Some(path) = out {
        std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(&results)?))?;
    }
    Ok(failed.unwrap_or(0))
}

/// CSV over the grid: `q1[,q2],abscissa,approx[,min_realpart]`.
pub fn plot_csv(poly: &MultiPoly, direction: Direction, p: &ParamPolynomial, grid: &GridSpec) -> String {
    let with_min = direction == Direction::LowerOnMinRealPart;
    let fpoly = poly.to_f64();
    let rows: Vec<String> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let q = grid.point(i);
            let mut line = String::new();
            for v in &q {
                let _ = write!(line, "{v},");
            }
            let _ = write!(line, "{},{}", abscissa_oracle(p, &q), fpoly.eval(&q));
            if with_min {
                let _ = write!(line, ",{}", min_realpart_oracle(p, &q));
            }
            line
        })
        .collect();
    let mut out = param_var_names(grid.n).join(",");
    out.push_str(",abscissa,approx");
    if with_min {
        out.push_str(",min_realpart");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}
