//! The approximation schemes: each builds a certificate template, compiles
//! it at the requested level, solves it and checks the identity.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::moments::MomentTable;
use crate::poly::{
    complex_split, derivative_in_s, esf_constraints, param_var_names, rational_to_f64, MultiPoly,
    ParamPolynomial,
};
use crate::sdp::{solve, Residuals, SdpSolution, SolveStatus, SolverConfig};
use crate::sos::{compile, identity_residual, CertificateTemplate, Multipliers, Sense};

/// Largest accepted coefficient mismatch of a re-expanded certificate.
pub const IDENTITY_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    UpperOnAbscissa,
    LowerOnAbscissa,
    LowerOnMinRealPart,
    HermiteInner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    Upper,
    LowerEsf,
    LowerGl,
    NaiveLower,
    Hermite,
}

impl Method {
    pub fn direction(self) -> Direction {
        match self {
            Method::Upper => Direction::UpperOnAbscissa,
            Method::LowerEsf | Method::LowerGl => Direction::LowerOnAbscissa,
            Method::NaiveLower => Direction::LowerOnMinRealPart,
            Method::Hermite => Direction::HermiteInner,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub residuals: Residuals,
    pub objective_primal: f64,
    pub objective_dual: f64,
    pub rows: usize,
    pub block_dims: Vec<usize>,
    pub n_free: usize,
    /// Wall time; left out of serialized results so they stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
    /// Accepted as feasible with an objective within `1/d` of the level
    /// optimum rather than on the solver's own status.
    pub slack_accepted: bool,
}

#[derive(Clone, Debug)]
pub struct AbscissaApprox {
    /// Polynomial in `q1..qn`.
    pub poly: MultiPoly,
    pub direction: Direction,
    pub level_d: usize,
    pub aux_level_dprime: Option<usize>,
    /// Stage-1 upper bound on the derivative's abscissa (Gauß-Lucas only).
    pub aux_poly: Option<MultiPoly>,
    /// `∫ poly dq` over the box.
    pub objective: f64,
    pub solver_stats: SolverStats,
    pub method: Method,
}

impl AbscissaApprox {
    pub fn n(&self) -> usize {
        self.poly.nvars()
    }

    pub fn eval(&self, q: &[f64]) -> f64 {
        self.poly.eval(q)
    }
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub approx: AbscissaApprox,
    pub multipliers: Multipliers,
    pub identity_residual: f64,
    pub stage1: Option<Box<Certificate>>,
}

fn run_template(
    template: &CertificateTemplate,
    d: usize,
    cfg: &SolverConfig,
    method: Method,
) -> Result<Certificate> {
    let start = Instant::now();
    let compiled = compile(template, d)?;
    log::info!(
        "{method:?} d={d}: {} rows, blocks {:?}, {} free",
        compiled.problem.num_rows(),
        compiled.problem.block_dims,
        compiled.problem.n_free
    );
    let sol = solve(&compiled.problem, cfg)?;
    let slack_accepted = !sol.status.is_acceptable() && within_level_slack(&sol, d, cfg);
    let stats = SolverStats {
        status: sol.status,
        iterations: sol.iterations,
        residuals: sol.residuals,
        objective_primal: sol.objective_primal,
        objective_dual: sol.objective_dual,
        rows: compiled.problem.num_rows(),
        block_dims: compiled.problem.block_dims.clone(),
        n_free: compiled.problem.n_free,
        seconds: start.elapsed().as_secs_f64(),
        slack_accepted,
    };
    if !sol.status.is_acceptable() && !slack_accepted {
        return Err(Error::SolverFailed {
            level: d,
            status: sol.status,
            detail: format!(
                "residuals primal {:.2e} dual {:.2e} gap {:.2e} after {} iterations",
                sol.residuals.primal, sol.residuals.dual, sol.residuals.gap, sol.iterations
            ),
        });
    }
    let multipliers = compiled.extract(template, &sol);
    let residual = identity_residual(template, &multipliers)?;
    if residual > IDENTITY_LIMIT {
        return Err(Error::CertificateResidual {
            residual,
            limit: IDENTITY_LIMIT,
        });
    }
    let poly = multipliers.decision.clone();
    let objective = rational_to_f64(&MomentTable::new(template.n_params).integrate(&poly)?);
    Ok(Certificate {
        approx: AbscissaApprox {
            poly,
            direction: method.direction(),
            level_d: d,
            aux_level_dprime: None,
            aux_poly: None,
            objective,
            solver_stats: stats,
            method,
        },
        multipliers,
        identity_residual: residual,
        stage1: None,
    })
}

/// Feasible to within the near-optimal band and with a primal-dual objective
/// gap below `1/d`. Any feasible point certifies a valid bound; the gap only
/// limits how far it can be from the level optimum.
fn within_level_slack(sol: &SdpSolution, d: usize, cfg: &SolverConfig) -> bool {
    let gap = (sol.objective_primal - sol.objective_dual).abs();
    sol.residuals.primal <= 100.0 * cfg.feas_tol
        && sol.residuals.dual <= 100.0 * cfg.feas_tol
        && gap.is_finite()
        && gap <= 1.0 / d as f64
}

fn check_level(template: &CertificateTemplate, d: usize) -> Result<()> {
    let minimal = template.minimal_level().max(1);
    if d < minimal {
        return Err(Error::LevelTooLow {
            requested: d,
            minimal,
        });
    }
    Ok(())
}

/// Template over `(q, x, y)` with the box and the real and imaginary parts of
/// `p(q, x + iy)` as equality generators.
fn root_template(p: &ParamPolynomial, decision_sign: i32, sense: Sense) -> Result<CertificateTemplate> {
    let split = complex_split(p);
    let vars = split.vars().to_vec();
    let x = MultiPoly::var_at(&vars, p.n());
    let fixed = if decision_sign > 0 { -&x } else { x };
    let mut t = CertificateTemplate::new(vars, p.n(), decision_sign, fixed, sense)?;
    t.add_box()?;
    t.add_eq("tau_re", split.re)?;
    t.add_eq("tau_im", split.im)?;
    Ok(t)
}

/// Minimal level for a driver, given the polynomial.
pub fn minimal_level(p: &ParamPolynomial, method: Method) -> Result<usize> {
    let t = match method {
        Method::Upper | Method::LowerGl => root_template(p, 1, Sense::Minimize)?,
        Method::NaiveLower => root_template(p, -1, Sense::Maximize)?,
        Method::LowerEsf => esf_template(p)?,
        Method::Hermite => {
            return Err(Error::InvalidPolynomial(
                "the Hermite scheme takes a matrix, not a polynomial".into(),
            ))
        }
    };
    Ok(t.minimal_level().max(1))
}

/// Upper bound `v(q) ≥ a(q)`: minimize `∫v` subject to `v - x ≥ 0` on the
/// lifted root set.
pub fn upper_abscissa(p: &ParamPolynomial, d: usize, cfg: &SolverConfig) -> Result<Certificate> {
    let t = root_template(p, 1, Sense::Minimize)?;
    check_level(&t, d)?;
    run_template(&t, d, cfg, Method::Upper)
}

/// Lower bound on the smallest real part: maximize `∫w` subject to
/// `x - w ≥ 0` on the lifted root set.
pub fn lower_minrealpart(p: &ParamPolynomial, d: usize, cfg: &SolverConfig) -> Result<Certificate> {
    let t = root_template(p, -1, Sense::Maximize)?;
    check_level(&t, d)?;
    run_template(&t, d, cfg, Method::NaiveLower)
}

fn esf_template(p: &ParamPolynomial) -> Result<CertificateTemplate> {
    if p.m() < 2 {
        return Err(Error::DegreeTooLow(format!(
            "the symmetric-function scheme needs degree at least 2, got {}",
            p.m()
        )));
    }
    let sys = esf_constraints(p);
    let vars = sys.vars.clone();
    let xm = MultiPoly::var_at(&vars, sys.x_index(sys.m));
    let mut t = CertificateTemplate::new(vars, p.n(), -1, xm, Sense::Maximize)?;
    t.add_box()?;
    for (k, g) in sys.order_constraints.iter().enumerate() {
        t.add_ineq(format!("order_x{}", k + 1), g.clone())?;
    }
    for (k, h) in sys.real_equalities.iter().enumerate() {
        t.add_eq(format!("tau_re_{}", k + 1), h.clone())?;
    }
    let first_im = sys.m / 2 + 1;
    for (k, h) in sys.imag_equalities.iter().enumerate() {
        t.add_eq(format!("tau_im_{}", first_im + k), h.clone())?;
    }
    Ok(t)
}

/// Lower bound on the abscissa through the symmetric-function description of
/// the ordered root tuple.
pub fn lower_abscissa_esf(p: &ParamPolynomial, d: usize, cfg: &SolverConfig) -> Result<Certificate> {
    let t = esf_template(p)?;
    check_level(&t, d)?;
    run_template(&t, d, cfg, Method::LowerEsf)
}

/// Two-stage lower bound: an upper bound `v̂` on the derivative's abscissa
/// restricts the roots to `x ≥ v̂(q)`, on which `x - w ≥ 0` is certified.
pub fn lower_abscissa_gl(
    p: &ParamPolynomial,
    d: usize,
    dprime: usize,
    cfg: &SolverConfig,
) -> Result<Certificate> {
    if p.m() < 2 {
        return Err(Error::DegreeTooLow(format!(
            "the derivative scheme needs degree at least 2, got {}",
            p.m()
        )));
    }
    let dp = derivative_in_s(p)?;
    let stage1 = upper_abscissa(&dp, dprime, cfg).map_err(|e| Error::Stage1Failed(Box::new(e)))?;
    let vhat = stage1.approx.poly.clone();

    let mut t = root_template(p, -1, Sense::Maximize)?;
    let x = MultiPoly::var_at(&t.vars, p.n());
    let g = &x - &vhat.embed(&t.vars)?;
    t.add_ineq("sigma_vhat", g)?;
    check_level(&t, d)?;
    let mut cert = run_template(&t, d, cfg, Method::LowerGl)?;
    cert.approx.aux_level_dprime = Some(dprime);
    cert.approx.aux_poly = Some(vhat);
    cert.stage1 = Some(Box::new(stage1));
    Ok(cert)
}

/// Inner approximation of `{q : H(q) ≻ 0}`: maximize `∫g` subject to
/// `uᵀH(q)u - g(q) ≥ 0` on the box times the unit sphere.
pub fn hermite_inner(h: &[Vec<MultiPoly>], n: usize, d: usize, cfg: &SolverConfig) -> Result<Certificate> {
    let k = h.len();
    if k == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    if let Some(row) = h.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: row.len(),
        });
    }
    let qvars = param_var_names(n);
    let mut vars = qvars.clone();
    vars.extend((1..=k).map(|i| format!("u{i}")));
    let mut entries = vec![vec![MultiPoly::zero(&vars); k]; k];
    for i in 0..k {
        for j in 0..k {
            let e = h[i][j].restrict(&qvars).map_err(|_| {
                Error::NotParametric(format!("Hermite entry ({i}, {j}) = {}", h[i][j]))
            })?;
            if j > i && e != h[j][i].restrict(&qvars)? {
                return Err(Error::NotSymmetric(i, j));
            }
            entries[i][j] = e.embed(&vars)?;
        }
    }
    let mut form = MultiPoly::zero(&vars);
    let mut sphere = MultiPoly::one(&vars);
    let u: Vec<MultiPoly> = (0..k).map(|i| MultiPoly::var_at(&vars, n + i)).collect();
    for (row, ui) in entries.iter().zip(&u) {
        sphere = &sphere - &(ui * ui);
        for (hij, uj) in row.iter().zip(&u) {
            form = &form + &(hij * &(ui * uj));
        }
    }
    let mut t = CertificateTemplate::new(vars, n, -1, form, Sense::Maximize)?;
    t.add_box()?;
    t.add_eq("tau_sphere", sphere)?;
    check_level(&t, d)?;
    run_template(&t, d, cfg, Method::Hermite)
}
