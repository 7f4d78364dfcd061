//! One line per acceptance criterion. Criteria listed in `KNOWN_SHORTFALLS`
//! are reported but do not fail the run; the analysis lives in the decision
//! log. Everything else must pass.

mod common;

use std::time::Instant;

use abscissa_core::cli::ProblemFile;
use abscissa_core::hierarchy::{
    hermite_inner, lower_abscissa_esf, lower_abscissa_gl, lower_minrealpart, upper_abscissa, Certificate,
    IDENTITY_LIMIT,
};
use abscissa_core::oracle::{
    abscissa_oracle, check_assumption1, esf_point, gap_report, roots_at, GapReport, GridSpec, RegionDescription,
};
use abscissa_core::poly::{complex_split, esf_constraints, MultiPoly, ParamPolynomial};
use abscissa_core::sdp::{solve, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{hand_checked, planted_sdp, problem, problem_path, relative_error, PROBLEMS};

type Outcome = Result<String, String>;
type Check = fn(&mut Suite) -> Outcome;

const KNOWN_SHORTFALLS: [&str; 2] = ["3", "2-parameter"];

struct Suite {
    cfg: SolverConfig,
    /// Identity residuals of every accepted hierarchy run, for criterion 10.
    identities: Vec<(String, f64)>,
}

impl Suite {
    fn keep(&mut self, label: &str, cert: &Certificate) {
        self.identities.push((label.to_string(), cert.identity_residual));
        if let Some(s1) = &cert.stage1 {
            self.identities.push((format!("{label} stage 1"), s1.identity_residual));
        }
    }

    fn run(
        &mut self,
        label: &str,
        f: impl FnOnce(&SolverConfig) -> abscissa_core::Result<Certificate>,
    ) -> Result<(Certificate, f64), String> {
        let t = Instant::now();
        let cert = f(&self.cfg).map_err(|e| format!("{label}: {e}"))?;
        let secs = t.elapsed().as_secs_f64();
        self.keep(label, &cert);
        Ok((cert, secs))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn report(cert: &Certificate, p: &ParamPolynomial, grid: &GridSpec) -> Result<GapReport, String> {
    gap_report(&cert.approx, p, grid).map_err(|e| e.to_string())
}

fn intervals(r: &RegionDescription) -> Vec<(f64, f64)> {
    match r {
        RegionDescription::Intervals(iv) => iv.clone(),
        RegionDescription::Mask { .. } => Vec::new(),
    }
}

/// Trapezoid rule of `f` over `[lo, hi]` with spacing close to `h`.
fn trapezoid(lo: f64, hi: f64, h: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = ((hi - lo) / h).round().max(1.0) as usize;
    let step = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(lo + step * i as f64)
        })
        .sum::<f64>()
        * step
}

fn damped_upper_d5(s: &mut Suite) -> Outcome {
    let p = problem("damped");
    let (cert, secs) = s.run("upper d=5", |c| upper_abscissa(&p, 5, c))?;
    let rep = report(&cert, &p, &GridSpec::default_for(1))?;
    ensure(rep.violation_count == 0, || format!("{} points with v < a - 1e-5", rep.violation_count))?;
    let iv = intervals(&rep.sublevel_approx);
    ensure(iv.len() == 1, || format!("sublevel set {iv:?} is not one interval"))?;
    let (lo, hi) = iv[0];
    ensure(lo.abs() <= 0.05 && (hi - 0.5).abs() <= 0.05, || format!("sublevel ({lo:.4}, {hi:.4})"))?;
    ensure(secs <= 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("sublevel ({lo:.4}, {hi:.4}), max violation {:.1e}, {secs:.1} s", rep.max_violation))
}

fn damped_upper_sweep(s: &mut Suite) -> Outcome {
    let p = problem("damped");
    let grid = GridSpec::default_for(1);
    let integral_a: f64 = grid.weights().iter().zip(grid.all_points()).map(|(w, q)| w * abscissa_oracle(&p, &q)).sum();
    let mut rows = Vec::new();
    for d in 2..=5 {
        let (cert, _) = s.run(&format!("upper d={d}"), |c| upper_abscissa(&p, d, c))?;
        let rep = report(&cert, &p, &grid)?;
        rows.push((d, cert.approx.objective, rep.l1_gap));
    }
    for w in rows.windows(2) {
        ensure(w[1].1 <= w[0].1 + 1e-7, || format!("objective rises from d={} to d={}", w[0].0, w[1].0))?;
    }
    for &(d, obj, _) in &rows {
        ensure(obj >= integral_a - 1e-4, || format!("d={d}: objective {obj} below integral of a {integral_a}"))?;
    }
    let (l1_2, l1_5) = (rows[0].2, rows[3].2);
    ensure(l1_5 < l1_2, || format!("L1 gap {l1_5} at d=5 not below {l1_2} at d=2"))?;
    let objs: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.1)).collect();
    Ok(format!("objectives {} >= {integral_a:.4}, L1 gap {l1_2:.3} -> {l1_5:.3}", objs.join(" ")))
}

fn damped_lower_esf(s: &mut Suite) -> Outcome {
    let p = problem("damped");
    let grid = GridSpec::default_for(1);
    let kink = 2f64.sqrt() - 1.0;
    let t = Instant::now();
    let mut found = Vec::new();
    for d in [3, 5] {
        let (cert, _) = s.run(&format!("lower-esf d={d}"), |c| lower_abscissa_esf(&p, d, c))?;
        let rep = report(&cert, &p, &grid)?;
        found.push((d, cert.approx.objective, rep));
    }
    let secs = t.elapsed().as_secs_f64();
    let mut problems = Vec::new();
    for (d, _, rep) in &found {
        if rep.violation_count > 0 {
            problems.push(format!("d={d}: {} points with w > a + 1e-5", rep.violation_count));
        }
    }
    if found[1].1 < found[0].1 - 1e-7 {
        problems.push(format!("objective falls from {} to {}", found[0].1, found[1].1));
    }
    let worst: Vec<String> = found
        .iter()
        .map(|(d, _, rep)| format!("d={d} worst gap {:.3} at q={:.3}", rep.linf_gap, rep.linf_at[0]))
        .collect();
    for (d, _, rep) in &found {
        if (rep.linf_at[0] - kink).abs() > 0.1 {
            problems.push(format!("d={d}: worst gap at q={:.3}, more than 0.1 from {kink:.3}", rep.linf_at[0]));
        }
    }
    if secs > 600.0 {
        problems.push(format!("took {secs:.0} s"));
    }
    let summary = format!("{}; objectives {:.4} -> {:.4}; {secs:.1} s", worst.join(", "), found[0].1, found[1].1);
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", problems.join("; ")))
    }
}

fn lower_gl(s: &mut Suite) -> Outcome {
    let p = problem("damped");
    let (cert, _) = s.run("lower-gl d'=2 d=6", |c| lower_abscissa_gl(&p, 6, 2, c))?;
    let rep = report(&cert, &p, &GridSpec::default_for(1))?;
    ensure(rep.coarse_violation_count == 0, || format!("{} violations at 1e-2", rep.coarse_violation_count))?;
    let l1 = trapezoid(-1.0, 0.3, 0.002, |q| (cert.approx.eval(&[q]) - abscissa_oracle(&p, &[q])).abs());
    ensure(l1 <= 0.05, || format!("L1 gap {l1:.4} over [-1, 0.3]"))?;

    let p2 = problem("quadratic-derivative");
    let (cert2, _) = s.run("lower-gl d'=1 d=6", |c| lower_abscissa_gl(&p2, 6, 1, c))?;
    let rep2 = report(&cert2, &p2, &GridSpec::default_for(1))?;
    ensure(rep2.violation_count == 0, || format!("second example: {} violations at 1e-5", rep2.violation_count))?;
    Ok(format!(
        "damped: 0 violations at 1e-2 ({} at 1e-5), L1 gap {l1:.4} on [-1, 0.3]; second example: 0 violations at 1e-5",
        rep.violation_count
    ))
}

fn cubic_naive(s: &mut Suite) -> Outcome {
    let p = problem("cubic");
    let (cert, _) = s.run("naive-lower d=6", |c| lower_minrealpart(&p, 6, c))?;
    let grid = GridSpec::default_for(1);
    let rep = report(&cert, &p, &grid)?;
    ensure(rep.violation_count == 0, || format!("{} points with w above the smallest real part", rep.violation_count))?;
    let slack = grid
        .all_points()
        .iter()
        .map(|q| abscissa_oracle(&p, q) - cert.approx.eval(q))
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(slack >= 0.05, || format!("max(a - w) = {slack:.4}"))?;
    Ok(format!("0 violations, max(a - w) = {slack:.3}"))
}

fn assumption1(_: &mut Suite) -> Outcome {
    let grid = GridSpec::default_for(1);
    let hits = check_assumption1(&problem("quartic-crossing"), &grid).map_err(|e| e.to_string())?;
    let inside = hits.iter().filter(|q| (-1.0..=-0.4).contains(&q[0])).count();
    ensure(inside > 0, || format!("{} offending points, none in [-1, -0.4]", hits.len()))?;
    let damped = check_assumption1(&problem("damped"), &grid).map_err(|e| e.to_string())?;
    ensure(damped.is_empty(), || format!("{} offending points for the damped oscillator", damped.len()))?;
    Ok(format!("{} offending points, {inside} in [-1, -0.4]; none for the damped oscillator", hits.len()))
}

fn esf_display(_: &mut Suite) -> Outcome {
    common::esf::cubic_system_matches_display()?;
    common::esf::quartic_system_matches_display()?;
    Ok("m = 3 and m = 4 systems match term for term".into())
}

fn root_identities(_: &mut Suite) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_esf, mut worst_split, mut worst_sym) = (0.0f64, 0.0f64, 0.0f64);
    for name in PROBLEMS {
        let p = problem(name);
        let sys = esf_constraints(&p);
        let eqs: Vec<_> = sys.equalities().iter().map(MultiPoly::to_f64).collect();
        let split = complex_split(&p);
        let (re, im) = (split.re.to_f64(), split.im.to_f64());
        for _ in 0..100 {
            let q: Vec<f64> = (0..p.n()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let pt = esf_point(&p, &q);
            for e in &eqs {
                worst_esf = worst_esf.max(e.eval(&pt).abs());
            }
            let roots = roots_at(&p, &q);
            for r in &roots {
                let mut at = q.clone();
                at.extend([r.re, r.im]);
                worst_split = worst_split.max(re.eval(&at).abs()).max(im.eval(&at).abs());
            }
            let mut ims: Vec<f64> = roots.iter().map(|r| r.im).collect();
            let mut neg: Vec<f64> = ims.iter().map(|v| -v).collect();
            ims.sort_by(f64::total_cmp);
            neg.sort_by(f64::total_cmp);
            for (a, b) in ims.iter().zip(&neg) {
                worst_sym = worst_sym.max((a - b).abs());
            }
        }
    }
    ensure(worst_esf <= 1e-8, || format!("symmetric-function residual {worst_esf:.2e}"))?;
    ensure(worst_split <= 1e-8, || format!("real/imaginary split residual {worst_split:.2e}"))?;
    ensure(worst_sym <= 1e-9, || format!("conjugate asymmetry {worst_sym:.2e}"))?;
    Ok(format!(
        "{} problems x 100 points: residuals {worst_esf:.1e} (symmetric functions), {worst_split:.1e} (split), asymmetry {worst_sym:.1e}",
        PROBLEMS.len()
    ))
}

/// Hausdorff distance between `{q : g(q) > 0}` on the grid and `[a, b]`.
fn hausdorff_to_interval(grid: &GridSpec, g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let axis = grid.axis();
    let set: Vec<f64> = axis.iter().copied().filter(|&q| g(q) > 0.0).collect();
    if set.is_empty() {
        return f64::INFINITY;
    }
    let to_interval = set.iter().map(|&q| (a - q).max(q - b).max(0.0)).fold(0.0, f64::max);
    let to_set = axis
        .iter()
        .filter(|&&q| q >= a && q <= b)
        .map(|&q| set.iter().map(|&r| (q - r).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    to_interval.max(to_set)
}

fn hermite(s: &mut Suite) -> Outcome {
    let file = ProblemFile::load(problem_path("damped-hermite").as_ref()).map_err(|e| e.to_string())?;
    let h = file.hermite().map_err(|e| e.to_string())?.ok_or("no Hermite matrix")?;
    let (cert, _) = s.run("hermite d=6", |c| hermite_inner(&h, 1, 6, c))?;
    let grid = GridSpec::default_for(1);
    let dist = hausdorff_to_interval(&grid, |q| cert.approx.eval(&[q]), 0.0, 0.5);
    ensure(dist <= 0.05, || format!("Hausdorff distance {dist:.4}"))?;

    let zero: Vec<Vec<MultiPoly>> = h.iter().map(|row| row.iter().map(|e| MultiPoly::zero(e.vars())).collect()).collect();
    let (flat, _) = s.run("hermite zero matrix", |c| hermite_inner(&zero, 1, 6, c))?;
    let peak = grid.all_points().iter().map(|q| flat.approx.eval(q).abs()).fold(0.0, f64::max);
    ensure(peak <= 1e-6, || format!("zero matrix gives |g| up to {peak:.2e}"))?;
    Ok(format!("Hausdorff distance {dist:.4}; zero matrix |g| <= {peak:.1e}"))
}

fn solver_suite(s: &mut Suite) -> Outcome {
    for (name, p, want) in hand_checked() {
        let sol = solve(&p, &s.cfg).map_err(|e| e.to_string())?;
        let err = relative_error(sol.objective_primal, want);
        ensure(sol.status.is_acceptable() && err <= 1e-6, || format!("{name}: {:?}, error {err:.1e}", sol.status))?;
    }
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (p, want) = planted_sdp(seed);
        let sol = solve(&p, &s.cfg).map_err(|e| e.to_string())?;
        let err = relative_error(sol.objective_primal, want);
        ensure(sol.status.is_acceptable() && err <= 1e-6, || format!("planted {seed}: {:?}, error {err:.1e}", sol.status))?;
        worst = worst.max(err);
    }
    let (label, ident) = s
        .identities
        .iter()
        .cloned()
        .fold((String::new(), 0.0f64), |acc, (l, r)| if r > acc.1 { (l, r) } else { acc });
    ensure(ident <= IDENTITY_LIMIT, || format!("identity residual {ident:.2e} on {label}"))?;
    Ok(format!(
        "3 hand-checked, 20 planted (worst error {worst:.1e}); identity residual <= {ident:.1e} over {} hierarchy runs",
        s.identities.len()
    ))
}

fn two_parameter(s: &mut Suite) -> Outcome {
    let p = problem("two-parameter");
    let (cert, _) = s.run("two-parameter upper d=3", |c| upper_abscissa(&p, 3, c))?;
    let rep = report(&cert, &p, &GridSpec::new(2, 101).map_err(|e| e.to_string())?)?;
    let oracle = rep.sublevel_oracle.volume();
    let diff = rep.sublevel_approx.symmetric_difference(&rep.sublevel_oracle).map_err(|e| e.to_string())?;
    let ratio = diff / oracle;
    let summary = format!("{} violations; symmetric difference {:.1}% of the oracle region", rep.violation_count, 100.0 * ratio);
    if rep.violation_count == 0 && ratio <= 0.15 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn main() {
    let mut suite = Suite { cfg: SolverConfig::default(), identities: Vec::new() };
    let criteria: [(&str, Check); 11] = [
        ("1", damped_upper_d5),
        ("2", damped_upper_sweep),
        ("3", damped_lower_esf),
        ("4", lower_gl),
        ("5", cubic_naive),
        ("6", assumption1),
        ("7", esf_display),
        ("8", root_identities),
        ("9", hermite),
        ("2-parameter", two_parameter),
        // Last, so it sees the identity residuals of every run above.
        ("10", solver_suite),
    ];
    let mut unexpected = 0;
    for (id, check) in criteria {
        let t = Instant::now();
        let outcome = check(&mut suite);
        let secs = t.elapsed().as_secs_f64();
        let known = KNOWN_SHORTFALLS.contains(&id);
        match outcome {
            Ok(msg) => {
                let note = if known { " (listed as a known shortfall; update the log)" } else { "" };
                println!("PASS criterion {id}: {msg} [{secs:.1} s]{note}");
            }
            Err(msg) => {
                let note = if known { " (known shortfall, see decision log)" } else { "" };
                println!("FAIL criterion {id}: {msg} [{secs:.1} s]{note}");
                if !known {
                    unexpected += 1;
                }
            }
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}
