//! Primal-dual interior-point method with the HKM direction and Mehrotra
//! predictor-corrector steps.
//!
//! Free variables are eliminated before iterating. With `B` the free-variable
//! columns of the (row-normalized) constraint matrix and `W` an orthonormal
//! basis of `null(Bᵀ)`, the constraints are equivalent to `Wᵀ A(X) = Wᵀ b`
//! and the free variables are recovered as `f = B⁺ (b - A(X))`. On the dual
//! side `y = y₀ + W z` where `Bᵀ y₀ = c_f`. What remains is a pure block SDP
//! in `(X, z, S)` whose constraint matrices are dense combinations of the
//! original rows.

use nalgebra::{DMatrix, DVector};

use super::{gram_accumulate, gram_inner, SdpProblem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub step_frac: f64,
    pub init_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200,
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            step_frac: 0.98,
            init_scale: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gap_tol > 0.0
            && self.feas_tol > 0.0
            && self.step_frac > 0.0
            && self.step_frac < 1.0
            && self.init_scale > 0.0
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedSdp(format!("invalid solver config {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    Stalled,
}

impl SolveStatus {
    pub fn is_acceptable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

/// Relative KKT residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Residuals {
    /// `‖b - A(X) - B f‖ / (1 + ‖b‖)`
    pub primal: f64,
    /// `‖(C - A*(y) - S, c_f - Bᵀ y)‖ / (1 + ‖C‖ + ‖c_f‖)`
    pub dual: f64,
    /// `<X, S> / (1 + |primal objective|)`
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub psd_values: Vec<DMatrix<f64>>,
    pub free_values: Vec<f64>,
    pub dual_values: Vec<f64>,
    pub dual_slacks: Vec<DMatrix<f64>>,
    pub objective_primal: f64,
    pub objective_dual: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Residuals of `(X, f, y, S)` against the original problem.
pub fn kkt_residuals(
    problem: &SdpProblem,
    x: &[DMatrix<f64>],
    f: &[f64],
    y: &[f64],
    s: &[DMatrix<f64>],
) -> Residuals {
    let mut p2 = 0.0;
    let mut b2 = 0.0;
    for row in &problem.rows {
        let r = row.rhs - row.eval(x, f);
        p2 += r * r;
        b2 += row.rhs * row.rhs;
    }

    let mut dres: Vec<DMatrix<f64>> = s.iter().map(|m| -m.clone()).collect();
    gram_accumulate(&problem.obj_gram, 1.0, &mut dres);
    let mut fres = problem.obj_free.clone();
    for (row, &yr) in problem.rows.iter().zip(y) {
        gram_accumulate(&row.gram, -yr, &mut dres);
        for &(j, v) in &row.free {
            fres[j] -= v * yr;
        }
    }
    let d2: f64 = dres.iter().map(|m| m.norm_squared()).sum::<f64>()
        + fres.iter().map(|v| v * v).sum::<f64>();
    let mut cmat: Vec<DMatrix<f64>> = x.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect();
    gram_accumulate(&problem.obj_gram, 1.0, &mut cmat);
    let c_norm = cmat.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
        + problem.obj_free.iter().map(|v| v * v).sum::<f64>().sqrt();

    let xs: f64 = x.iter().zip(s).map(|(a, b)| a.dot(b)).sum();
    let pobj = problem.objective(x, f);
    Residuals {
        primal: p2.sqrt() / (1.0 + b2.sqrt()),
        dual: d2.sqrt() / (1.0 + c_norm),
        gap: xs.abs() / (1.0 + pobj.abs()),
    }
}

fn dual_objective(problem: &SdpProblem, y: &[f64]) -> f64 {
    problem.rows.iter().zip(y).map(|(r, v)| r.rhs * v).sum()
}

/// Internal pure SDP: min <C, X> s.t. <A_i, X> = b_i, with dense A_i.
struct Reduced {
    dims: Vec<usize>,
    /// Per block, column `i` is vec(A_i) for that block.
    a: Vec<DMatrix<f64>>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
}

impl Reduced {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (ak, xk) in self.a.iter().zip(x) {
            let v = DVector::from_column_slice(xk.as_slice());
            out += ak.tr_mul(&v);
        }
        out
    }

    fn adjoint(&self, z: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.a
            .iter()
            .zip(&self.dims)
            .map(|(ak, &n)| {
                let v = ak * z;
                DMatrix::from_column_slice(n, n, v.as_slice())
            })
            .collect()
    }

    /// Thin SVD of the operator with every block's vec(A_i) stacked as column `i`.
    fn stacked_svd(&self) -> StackedSvd {
        let m = self.m();
        let rows: usize = self.dims.iter().map(|n| n * n).sum();
        let mut a = DMatrix::zeros(rows, m);
        let mut off = 0;
        for (k, &n) in self.dims.iter().enumerate() {
            a.view_mut((off, 0), (n * n, m)).copy_from(&self.a[k]);
            off += n * n;
        }
        if m == 0 || rows == 0 {
            return StackedSvd {
                u: DMatrix::zeros(rows, 0),
                inv_sigma: DVector::zeros(0),
                v: DMatrix::zeros(m, 0),
            };
        }
        let svd = a.svd(true, true);
        let tol = 1e-12 * svd.singular_values.amax();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > tol)
            .collect();
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        StackedSvd {
            u: u.select_columns(&keep),
            inv_sigma: DVector::from_iterator(
                keep.len(),
                keep.iter().map(|&i| 1.0 / svd.singular_values[i]),
            ),
            v: vt.select_rows(&keep).transpose(),
        }
    }

    fn stack(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let rows: usize = self.dims.iter().map(|n| n * n).sum();
        let mut out = DVector::zeros(rows);
        let mut off = 0;
        for (xk, &n) in x.iter().zip(&self.dims) {
            out.rows_mut(off, n * n).copy_from_slice(xk.as_slice());
            off += n * n;
        }
        out
    }

    fn unstack(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut off = 0;
        self.dims
            .iter()
            .map(|&n| {
                let m = DMatrix::from_column_slice(n, n, &v.as_slice()[off..off + n * n]);
                off += n * n;
                m
            })
            .collect()
    }

    /// Per-block multiples of the identity for the starting point.
    fn start_scales(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.m();
        let mut xi = Vec::new();
        let mut eta = Vec::new();
        for (k, &n) in self.dims.iter().enumerate() {
            let rn = (n.max(1) as f64).sqrt();
            let mut x = 1.0f64;
            let mut a_max = 0.0f64;
            for i in 0..m {
                let an = self.a[k].column(i).norm();
                a_max = a_max.max(an);
                if an > 0.0 {
                    x = x.max(rn * self.b[i].abs() / an);
                }
            }
            xi.push(x);
            eta.push(1.0f64.max(self.c[k].norm() / rn).max(a_max / rn));
        }
        (xi, eta)
    }

    /// Factor `G` of the Schur matrix `M = GᵀG`, where `M_ij = <A_i, X A_j S⁻¹>`.
    ///
    /// With `X = L Lᵀ` and `S⁻¹ = R Rᵀ`, column `j` of `G` stacks
    /// `vec(Lᵀ A_j R)` over the blocks.
    fn schur_factor(&self, lx: &[DMatrix<f64>], rs: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.m();
        let rows: usize = self.dims.iter().map(|n| n * n).sum();
        let mut g = DMatrix::zeros(rows, m);
        let mut off = 0;
        for (k, &n) in self.dims.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let lt = lx[k].transpose();
            for j in 0..m {
                let aj = DMatrix::from_column_slice(n, n, self.a[k].column(j).as_slice());
                let prod = &lt * aj * &rs[k];
                g.view_mut((off, j), (n * n, 1)).copy_from_slice(prod.as_slice());
            }
            off += n * n;
        }
        g
    }
}

/// Mapping between the original problem and the reduced one.
struct Reduction {
    row_scale: Vec<f64>,
    kept_rows: Vec<usize>,
    /// Scaled rows: sparse gram part and dense free part.
    b_free: DMatrix<f64>,
    /// Orthonormal basis of null(Bᵀ); `None` means identity.
    w: Option<DMatrix<f64>>,
    /// Pieces of B⁺ = Bᵀ U Λ⁻¹ Uᵀ.
    range_u: DMatrix<f64>,
    range_inv: DVector<f64>,
    y0: DVector<f64>,
}

struct StackedSvd {
    u: DMatrix<f64>,
    inv_sigma: DVector<f64>,
    v: DMatrix<f64>,
}

impl StackedSvd {
    /// `argmin_z ‖c - A z‖` for a stacked right-hand side.
    fn least_squares(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.v * self.u.tr_mul(c).component_mul(&self.inv_sigma)
    }

    /// Minimum-norm stacked `d` with `Aᵀ d = e`.
    fn min_norm(&self, e: &DVector<f64>) -> DVector<f64> {
        &self.u * self.v.tr_mul(e).component_mul(&self.inv_sigma)
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Largest `α` with `X + α dX ⪰ 0`, or infinity.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let t = sym(&linv * dx * linv.transpose());
    let lmin = t.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Cholesky factor `L` of each `X` and `R = L_S⁻ᵀ` of each `S`, so that
/// `X = L Lᵀ` and `S⁻¹ = R Rᵀ`.
type Factors = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

fn factors(x: &[DMatrix<f64>], s: &[DMatrix<f64>]) -> Option<Factors> {
    let mut lx = Vec::with_capacity(x.len());
    let mut rs = Vec::with_capacity(s.len());
    for (xk, sk) in x.iter().zip(s) {
        let n = xk.nrows();
        if n == 0 {
            lx.push(xk.clone());
            rs.push(sk.clone());
            continue;
        }
        lx.push(xk.clone().cholesky()?.l());
        let ls = sk.clone().cholesky()?.l();
        let linv = ls.solve_lower_triangular(&DMatrix::identity(n, n))?;
        rs.push(linv.transpose());
    }
    Some((lx, rs))
}

/// Triangular factor `R` of `M = RᵀR`, from a QR decomposition of `G`.
struct Schur {
    r: DMatrix<f64>,
}

impl Schur {
    fn new(g: DMatrix<f64>) -> Schur {
        let m = g.ncols();
        let mut r = if g.nrows() >= m {
            g.qr().r()
        } else {
            // Fewer stacked entries than rows: pad so the factor is square.
            let mut padded = DMatrix::zeros(m, m);
            padded.view_mut((0, 0), (g.nrows(), m)).copy_from(&g);
            padded.qr().r()
        };
        // Dependent constraints leave zero pivots; floor them.
        let big = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        for i in 0..m {
            let v = r[(i, i)];
            if v.abs() < 1e-13 * big {
                r[(i, i)] = if v < 0.0 { -1e-13 * big } else { 1e-13 * big };
            }
        }
        Schur { r }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        if rhs.is_empty() {
            return rhs.clone();
        }
        let w = self
            .r
            .tr_solve_upper_triangular(rhs)
            .expect("nonzero pivots");
        self.r.solve_upper_triangular(&w).expect("nonzero pivots")
    }
}

fn build_reduction(problem: &SdpProblem, cfg_feas: f64) -> Result<(Reduction, Reduced)> {
    let nb = problem.block_dims.len();
    let nf = problem.n_free;

    let mut row_scale = Vec::new();
    let mut kept_rows = Vec::new();
    for (r, row) in problem.rows.iter().enumerate() {
        let mx = row.max_abs();
        if mx == 0.0 {
            if row.rhs.abs() > cfg_feas {
                return Err(Error::MalformedSdp(format!(
                    "row {r} has no variables but a nonzero right-hand side"
                )));
            }
            row_scale.push(1.0);
            continue;
        }
        row_scale.push(1.0 / mx);
        kept_rows.push(r);
    }
    let rk = kept_rows.len();
    let mut b_free = DMatrix::zeros(rk, nf);
    let mut rhs = DVector::zeros(rk);
    for (ri, &r) in kept_rows.iter().enumerate() {
        let row = &problem.rows[r];
        let sc = row_scale[r];
        for &(j, v) in &row.free {
            b_free[(ri, j)] += v * sc;
        }
        rhs[ri] = row.rhs * sc;
    }

    // Scaled gram operator, column per kept row.
    let mut a_full: Vec<DMatrix<f64>> = problem
        .block_dims
        .iter()
        .map(|&n| DMatrix::zeros(n * n, rk))
        .collect();
    for (ri, &r) in kept_rows.iter().enumerate() {
        let row = &problem.rows[r];
        let sc = row_scale[r];
        for e in &row.gram {
            let n = problem.block_dims[e.block];
            a_full[e.block][(e.i + e.j * n, ri)] += e.value * sc;
            if e.i != e.j {
                a_full[e.block][(e.j + e.i * n, ri)] += e.value * sc;
            }
        }
    }
    let mut c: Vec<DMatrix<f64>> = problem
        .block_dims
        .iter()
        .map(|&n| DMatrix::zeros(n, n))
        .collect();
    gram_accumulate(&problem.obj_gram, 1.0, &mut c);
    let cf = DVector::from_column_slice(&problem.obj_free);

    let (w, range_u, range_inv, y0) = if nf == 0 {
        (None, DMatrix::zeros(rk, 0), DVector::zeros(0), DVector::zeros(rk))
    } else {
        let bbt: DMatrix<f64> = &b_free * b_free.transpose();
        let eig = bbt.symmetric_eigen();
        let lmax = eig.eigenvalues.amax();
        let thresh = 1e-11 * lmax.max(1e-300);
        let range: Vec<usize> = (0..rk).filter(|&k| eig.eigenvalues[k] > thresh).collect();
        let null: Vec<usize> = (0..rk).filter(|&k| eig.eigenvalues[k] <= thresh).collect();
        let u = eig.eigenvectors.select_columns(&range);
        let inv = DVector::from_iterator(range.len(), range.iter().map(|&k| 1.0 / eig.eigenvalues[k]));
        let w = eig.eigenvectors.select_columns(&null);
        // Minimum-norm y0 with Bᵀ y0 = c_f.
        let bc = &b_free * &cf;
        let ut = u.tr_mul(&bc);
        let y0 = &u * ut.component_mul(&inv);
        let miss = (b_free.tr_mul(&y0) - &cf).norm();
        if miss > 1e-7 * (1.0 + cf.norm()) {
            return Err(Error::SolverFailed {
                level: 0,
                status: SolveStatus::Unbounded,
                detail: format!(
                    "free-variable costs are not in the row space of their columns (miss {miss:.2e})"
                ),
            });
        }
        (Some(w), u, inv, y0)
    };

    // C̃ = C - A*(y0)
    for (k, &n) in problem.block_dims.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let v = &a_full[k] * &y0;
        c[k] -= DMatrix::from_column_slice(n, n, v.as_slice());
    }

    let (a, b) = match &w {
        None => (a_full, rhs.clone()),
        Some(w) => (
            a_full.iter().map(|ak| ak * w).collect(),
            w.tr_mul(&rhs),
        ),
    };
    let reduced = Reduced {
        dims: problem.block_dims.clone(),
        a,
        b,
        c,
    };
    debug_assert_eq!(reduced.a.len(), nb);
    Ok((
        Reduction {
            row_scale,
            kept_rows,
            b_free,
            w,
            range_u,
            range_inv,
            y0,
        },
        reduced,
    ))
}

impl Reduction {
    /// Free variables from the gram part: `f = B⁺ (b - A(X))`.
    fn recover_free(&self, problem: &SdpProblem, x: &[DMatrix<f64>]) -> Vec<f64> {
        let nf = problem.n_free;
        if nf == 0 {
            return Vec::new();
        }
        let resid = DVector::from_iterator(
            self.kept_rows.len(),
            self.kept_rows.iter().map(|&r| {
                let row = &problem.rows[r];
                (row.rhs - gram_inner(&row.gram, x)) * self.row_scale[r]
            }),
        );
        let t = self.range_u.tr_mul(&resid).component_mul(&self.range_inv);
        let f = self.b_free.tr_mul(&(&self.range_u * t));
        f.iter().copied().collect()
    }

    /// Original dual vector from the reduced one.
    fn recover_dual(&self, problem: &SdpProblem, z: &DVector<f64>) -> Vec<f64> {
        let ys = match &self.w {
            None => z.clone(),
            Some(w) => &self.y0 + w * z,
        };
        let mut y = vec![0.0; problem.rows.len()];
        for (ri, &r) in self.kept_rows.iter().enumerate() {
            y[r] = ys[ri] * self.row_scale[r];
        }
        y
    }
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    z: DVector<f64>,
    s: Vec<DMatrix<f64>>,
}

struct Snapshot {
    it: usize,
    merit: f64,
    x: Vec<DMatrix<f64>>,
    f: Vec<f64>,
    y: Vec<f64>,
    s: Vec<DMatrix<f64>>,
    res: Residuals,
}

fn classify(res: &Residuals, cfg: &SolverConfig) -> Option<SolveStatus> {
    if res.primal <= cfg.feas_tol && res.dual <= cfg.feas_tol && res.gap <= cfg.gap_tol {
        Some(SolveStatus::Optimal)
    } else if res.primal <= 100.0 * cfg.feas_tol
        && res.dual <= 100.0 * cfg.feas_tol
        && res.gap <= 100.0 * cfg.gap_tol
    {
        Some(SolveStatus::NearOptimal)
    } else {
        None
    }
}

pub fn solve(problem: &SdpProblem, cfg: &SolverConfig) -> Result<SdpSolution> {
    problem.validate()?;
    cfg.validate()?;
    if problem.rows.is_empty() {
        return Err(Error::MalformedSdp("no equality rows".into()));
    }
    let (red, mut sdp) = match build_reduction(problem, cfg.feas_tol) {
        Ok(v) => v,
        Err(Error::SolverFailed { status, detail, .. }) => {
            log::info!("solver setup: {detail}");
            return Ok(trivial_failure(problem, status));
        }
        Err(e) => return Err(e),
    };
    let dims = &sdp.dims.clone();
    log::info!("reduced problem: {} rows, blocks {:?}", sdp.m(), sdp.dims);
    if log::log_enabled!(log::Level::Trace) {
        let norms: Vec<f64> = (0..sdp.m())
            .map(|i| sdp.a.iter().map(|a| a.column(i).norm_squared()).sum::<f64>().sqrt())
            .collect();
        log::trace!(
            "|C| {:.2e} |b| {:.2e} row norms {:?}",
            sdp.c.iter().map(|c| c.norm()).sum::<f64>(),
            sdp.b.norm(),
            norms.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>()
        );
    }
    let big_n: usize = dims.iter().sum::<usize>().max(1);

    // Move the dual cost as close to the cone's interior as the constraints
    // allow, then start from identities scaled to the data.
    let op = sdp.stacked_svd();
    let z_shift = op.least_squares(&sdp.stack(&sdp.c));
    let shift = sdp.adjoint(&z_shift);
    for (c, sh) in sdp.c.iter_mut().zip(&shift) {
        *c -= sh;
    }
    let (xi, eta) = sdp.start_scales();
    let mut it = Iterate {
        x: dims
            .iter()
            .zip(&xi)
            .map(|(&n, &v)| DMatrix::identity(n, n) * (v * cfg.init_scale))
            .collect(),
        z: DVector::zeros(sdp.m()),
        s: dims
            .iter()
            .zip(&eta)
            .map(|(&n, &v)| DMatrix::identity(n, n) * (v * cfg.init_scale))
            .collect(),
    };

    let mut best: Option<Snapshot> = None;
    let mut history: Vec<Residuals> = Vec::new();
    let mut status = None;
    let mut iterations = 0;

    for iter in 0..=cfg.max_iters {
        iterations = iter;
        let f = red.recover_free(problem, &it.x);
        let y = red.recover_dual(problem, &(&it.z + &z_shift));
        let res = kkt_residuals(problem, &it.x, &f, &y, &it.s);
        let merit = (res.primal / cfg.feas_tol)
            .max(res.dual / cfg.feas_tol)
            .max(res.gap / cfg.gap_tol);
        if best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Snapshot {
                it: iter,
                merit,
                x: it.x.clone(),
                f: f.clone(),
                y: y.clone(),
                s: it.s.clone(),
                res,
            });
        }
        history.push(res);
        if classify(&res, cfg) == Some(SolveStatus::Optimal) {
            status = Some(SolveStatus::Optimal);
            break;
        }
        if iter == cfg.max_iters {
            break;
        }
        if let Some(s) = divergence(&history, problem, &y, &it, cfg) {
            status = Some(s);
            break;
        }
        if best.as_ref().is_some_and(|b| iter >= b.it + STAGNATION) {
            log::debug!("no progress since iteration {}", best.as_ref().map_or(0, |b| b.it));
            status = Some(SolveStatus::Stalled);
            break;
        }

        // Newton system.
        let rp = &sdp.b - sdp.apply(&it.x);
        let atz = sdp.adjoint(&it.z);
        let rd: Vec<DMatrix<f64>> = (0..dims.len())
            .map(|k| &sdp.c[k] - &it.s[k] - &atz[k])
            .collect();
        let mu = inner(&it.x, &it.s) / big_n as f64;
        let Some((lx, rs)) = factors(&it.x, &it.s) else {
            status = Some(SolveStatus::Stalled);
            break;
        };
        let sinv: Vec<DMatrix<f64>> = rs.iter().map(|r| sym(r * r.transpose())).collect();
        let schur = Schur::new(sdp.schur_factor(&lx, &rs));
        let x_rd_sinv: Vec<DMatrix<f64>> = (0..dims.len())
            .map(|k| &it.x[k] * &rd[k] * &sinv[k])
            .collect();
        let base_h = &rp + sdp.apply(&x_rd_sinv);

        let direction = |target: &[DMatrix<f64>]| {
            let build = |dz: &DVector<f64>| {
                let atdz = sdp.adjoint(dz);
                let ds: Vec<DMatrix<f64>> = (0..dims.len()).map(|k| &rd[k] - &atdz[k]).collect();
                let dx: Vec<DMatrix<f64>> = (0..dims.len())
                    .map(|k| &target[k] - sym(&it.x[k] * &ds[k] * &sinv[k]))
                    .collect();
                (dx, ds)
            };
            let h = &base_h - sdp.apply(target);
            let mut dz = schur.solve(&h);
            let (mut dx, mut ds) = build(&dz);
            // Refine against the operators themselves; the assembled Schur
            // matrix loses accuracy as the iterates approach the boundary.
            let mut err = &rp - sdp.apply(&dx);
            for _ in 0..3 {
                let cand = &dz + schur.solve(&err);
                let (cx, cs) = build(&cand);
                let cerr = &rp - sdp.apply(&cx);
                if cerr.norm() >= err.norm() {
                    break;
                }
                (dz, dx, ds, err) = (cand, cx, cs, cerr);
            }
            // Whatever mismatch is left goes into a minimum-norm primal fix,
            // so full steps land on the constraints.
            let fix = sdp.unstack(&op.min_norm(&err));
            for (d, f) in dx.iter_mut().zip(fix) {
                *d += sym(f);
            }
            (dx, dz, ds)
        };
        let steps = |dx: &[DMatrix<f64>], ds: &[DMatrix<f64>], frac: f64| {
            let ap = it
                .x
                .iter()
                .zip(dx)
                .map(|(x, d)| max_step(x, d))
                .fold(f64::INFINITY, f64::min);
            let ad = it
                .s
                .iter()
                .zip(ds)
                .map(|(s, d)| max_step(s, d))
                .fold(f64::INFINITY, f64::min);
            ((frac * ap).min(1.0), (frac * ad).min(1.0))
        };

        // Predictor.
        let target: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x.clone()).collect();
        let (dxa, _dza, dsa) = direction(&target);
        let (ap, ad) = steps(&dxa, &dsa, 1.0);
        let mut mu_aff = 0.0;
        for k in 0..dims.len() {
            let xa = &it.x[k] + &dxa[k] * ap;
            let sa = &it.s[k] + &dsa[k] * ad;
            mu_aff += xa.dot(&sa);
        }
        mu_aff /= big_n as f64;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // Corrector.
        let target: Vec<DMatrix<f64>> = (0..dims.len())
            .map(|k| {
                sym(&sinv[k] * (sigma * mu) - &it.x[k] - &dxa[k] * &dsa[k] * &sinv[k])
            })
            .collect();
        let (mut dx, mut dz, mut ds) = direction(&target);
        let (mut ap, mut ad) = steps(&dx, &ds, cfg.step_frac);
        // A short corrector step usually means the second-order term is
        // misleading; fall back to plain centering directions.
        if ap.min(ad) < 0.2 {
            for sig in [sigma.max(0.3), 0.7, 1.0] {
                let target: Vec<DMatrix<f64>> = (0..dims.len())
                    .map(|k| sym(&sinv[k] * (sig * mu) - &it.x[k]))
                    .collect();
                let (cx, cz, cs) = direction(&target);
                let (cp, cd) = steps(&cx, &cs, cfg.step_frac);
                if cp.min(cd) > ap.min(ad) {
                    (dx, dz, ds, ap, ad) = (cx, cz, cs, cp, cd);
                }
                if ap.min(ad) >= 0.2 {
                    break;
                }
            }
        }
        if log::log_enabled!(log::Level::Trace) {
            let err = (sdp.apply(&dx) - &rp).norm() / (1.0 + rp.norm());
            let spread = |ms: &[DMatrix<f64>]| -> String {
                ms.iter()
                    .map(|m| {
                        let e = m.clone().symmetric_eigenvalues();
                        format!("[{:.1e},{:.1e}]", e.min(), e.max())
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            log::trace!("newton primal mismatch {err:.3e} X {} S {}", spread(&it.x), spread(&it.s));
        }

        log::debug!(
            "{iter} {mu:.3e} {:.3e} {:.3e} {:.3e} {ap:.3} {ad:.3}",
            res.primal,
            res.dual,
            res.gap
        );

        if ap < 1e-12 && ad < 1e-12 {
            status = Some(SolveStatus::Stalled);
            iterations = iter + 1;
            break;
        }
        for k in 0..dims.len() {
            it.x[k] = sym(&it.x[k] + &dx[k] * ap);
            it.s[k] = sym(&it.s[k] + &ds[k] * ad);
        }
        it.z += dz * ad;
    }

    let best = best.expect("at least one iterate");
    let final_status = match status {
        Some(SolveStatus::Optimal) => SolveStatus::Optimal,
        other => classify(&best.res, cfg)
            .or(other)
            .unwrap_or(SolveStatus::Stalled),
    };
    Ok(SdpSolution {
        status: final_status,
        objective_primal: problem.objective(&best.x, &best.f),
        objective_dual: dual_objective(problem, &best.y),
        psd_values: best.x,
        free_values: best.f,
        dual_values: best.y,
        dual_slacks: best.s,
        residuals: best.res,
        iterations,
    })
}

/// Iterations without a better iterate before giving up.
const STAGNATION: usize = 30;

fn divergence(
    history: &[Residuals],
    problem: &SdpProblem,
    y: &[f64],
    it: &Iterate,
    cfg: &SolverConfig,
) -> Option<SolveStatus> {
    const WINDOW: usize = 30;
    let n = history.len();
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xnorm = it.x.iter().map(|m| m.norm()).sum::<f64>();
    if ynorm > 1e12 && dual_objective(problem, y) > 1e8 {
        return Some(SolveStatus::Infeasible);
    }
    if xnorm > 1e12 {
        return Some(SolveStatus::Unbounded);
    }
    if n <= WINDOW {
        return None;
    }
    let now = history[n - 1];
    let then = history[n - 1 - WINDOW];
    if now.primal > 1e3 * cfg.feas_tol && now.primal > 0.5 * then.primal && now.dual < then.dual {
        return Some(SolveStatus::Infeasible);
    }
    if now.dual > 1e3 * cfg.feas_tol && now.dual > 0.5 * then.dual && now.primal < then.primal {
        return Some(SolveStatus::Unbounded);
    }
    None
}

fn trivial_failure(problem: &SdpProblem, status: SolveStatus) -> SdpSolution {
    SdpSolution {
        status,
        psd_values: problem.block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        free_values: vec![0.0; problem.n_free],
        dual_values: vec![0.0; problem.rows.len()],
        dual_slacks: problem.block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        objective_primal: f64::NAN,
        objective_dual: f64::NAN,
        residuals: Residuals {
            primal: f64::INFINITY,
            dual: f64::INFINITY,
            gap: f64::INFINITY,
        },
        iterations: 0,
    }
}
