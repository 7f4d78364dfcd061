//! Ground truth from companion-matrix roots, and grid verification of
//! approximations against it.

use nalgebra::{Complex, DMatrix, Schur};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{AbscissaApprox, Direction};
use crate::poly::{derivative_in_s, esf_constraints, MultiPoly, ParamPolynomial};

pub type C64 = Complex<f64>;

/// Validity tolerance for "the bound fails".
pub const VALIDITY_TOL: f64 = 1e-5;
/// Coarse threshold, separating sloppy certificates from wrong ones.
pub const COARSE_TOL: f64 = 1e-2;
/// At most this many offending points are stored.
pub const POINT_CAP: usize = 1000;

const ASSUMPTION1_TOL: f64 = 1e-7;
const ASSUMPTION2_TOL: f64 = 1e-6;
const BISECTION_TOL: f64 = 1e-10;

/// Roots of `p(q, ·)` with multiplicity.
pub fn roots_at(p: &ParamPolynomial, q: &[f64]) -> Vec<C64> {
    let c = p.eval_coeffs(q);
    roots_of_monic(&c)
}

/// Roots of `s^m + c[m-1] s^{m-1} + ... + c[0]`; `c[m]` is ignored.
pub fn roots_of_monic(c: &[f64]) -> Vec<C64> {
    // Exact zero roots are split off; the QR iteration can fail to converge
    // on the nilpotent companion matrix of `s^k`.
    let zeros = c[..c.len().saturating_sub(1)].iter().take_while(|&&v| v == 0.0).count();
    let c = &c[zeros..];
    let mut out = vec![C64::new(0.0, 0.0); zeros];
    let m = c.len().saturating_sub(1);
    match m {
        0 => {}
        1 => out.push(C64::new(-c[0], 0.0)),
        _ => {
            let mut a = DMatrix::zeros(m, m);
            for i in 1..m {
                a[(i, i - 1)] = 1.0;
            }
            for i in 0..m {
                a[(i, m - 1)] = -c[i];
            }
            let mut balanced = a.clone();
            balance(&mut balanced);
            let eig = Schur::try_new(balanced, f64::EPSILON, SCHUR_ITERS)
                .or_else(|| Schur::try_new(a, f64::EPSILON, SCHUR_ITERS))
                .map(|s| s.complex_eigenvalues().iter().copied().collect())
                .unwrap_or_else(|| durand_kerner(c));
            out.extend(eig.into_iter().map(|r| newton_polish(c, r)));
        }
    }
    out
}

const SCHUR_ITERS: usize = 10_000;

/// Simultaneous Weierstrass iteration; only used when QR does not converge.
fn durand_kerner(c: &[f64]) -> Vec<C64> {
    let m = c.len() - 1;
    let radius = 1.0 + c[..m].iter().fold(0.0f64, |r, v| r.max(v.abs()));
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..m).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..SCHUR_ITERS {
        let mut moved = 0.0f64;
        for i in 0..m {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..m {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                continue;
            }
            let step = horner(c, z[i]).0 / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved <= f64::EPSILON * radius {
            break;
        }
    }
    z
}

/// Diagonal similarity scaling by powers of two, which evens out row and
/// column norms before the QR iteration.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += a[(j, i)].abs();
                    row += a[(i, j)].abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let total = col + row;
            let mut f = 1.0;
            let mut g = row / radix;
            while col < g {
                f *= radix;
                col *= radix * radix;
            }
            g = row * radix;
            while col > g {
                f /= radix;
                col /= radix * radix;
            }
            if (col + row) / f < 0.95 * total {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

fn horner(c: &[f64], z: C64) -> (C64, C64) {
    let m = c.len() - 1;
    let mut v = C64::new(1.0, 0.0);
    let mut dv = C64::new(0.0, 0.0);
    for k in (0..m).rev() {
        dv = dv * z + v;
        v = v * z + c[k];
    }
    (v, dv)
}

/// One Newton step, kept only when it lowers the residual.
fn newton_polish(c: &[f64], r: C64) -> C64 {
    let (v, dv) = horner(c, r);
    if dv.norm() == 0.0 || !dv.norm().is_finite() {
        return r;
    }
    let cand = r - v / dv;
    if horner(c, cand).0.norm() < v.norm() {
        cand
    } else {
        r
    }
}

/// `|p(q, r)|` for a candidate root.
pub fn root_residual(p: &ParamPolynomial, q: &[f64], r: C64) -> f64 {
    horner(&p.eval_coeffs(q), r).0.norm()
}

pub fn abscissa_oracle(p: &ParamPolynomial, q: &[f64]) -> f64 {
    roots_at(p, q).iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_realpart_oracle(p: &ParamPolynomial, q: &[f64]) -> f64 {
    roots_at(p, q).iter().map(|r| r.re).fold(f64::INFINITY, f64::min)
}

/// Full point `(q, x_1..x_m, retained y)` of the symmetric-function system
/// for the actual roots at `q`, with `x_m` the largest real part and
/// conjugate pairs placed in paired slots.
pub fn esf_point(p: &ParamPolynomial, q: &[f64]) -> Vec<f64> {
    let m = p.m();
    let scale = 1.0 + p.max_abs_coeff_at(q);
    let roots = roots_at(p, q);
    let imag_tol = 1e-7 * scale;

    let mut reals: Vec<f64> = Vec::new();
    let mut uppers: Vec<C64> = Vec::new();
    for r in &roots {
        if r.im.abs() <= imag_tol {
            reals.push(r.re);
        } else if r.im > 0.0 {
            uppers.push(*r);
        }
    }
    // Missing conjugates (should not happen) are counted as real.
    while 2 * uppers.len() + reals.len() < m {
        reals.push(roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max));
    }
    reals.sort_by(|a, b| b.total_cmp(a));
    uppers.sort_by(|a, b| b.re.total_cmp(&a.re));
    let top_real = reals.first().copied().unwrap_or(f64::NEG_INFINITY);
    let top_pair = uppers.first().map_or(f64::NEG_INFINITY, |r| r.re);

    // Slots as (x, y); filled from the back.
    let mut slots: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut reals = std::collections::VecDeque::from(reals);
    let mut uppers = std::collections::VecDeque::from(uppers);
    if m % 2 == 1 {
        if top_real >= top_pair {
            let lead = reals.pop_front().expect("odd degree has a real root");
            if let Some(r) = uppers.pop_front() {
                slots.push((r.re, -r.im));
                slots.push((r.re, r.im));
            } else if m >= 3 {
                let a = reals.pop_front().expect("real root");
                let b = reals.pop_front().expect("real root");
                slots.push((b, 0.0));
                slots.push((a, 0.0));
            }
            slots.push((lead, 0.0));
        } else {
            let r = uppers.pop_front().expect("pair");
            let lone = reals.pop_front().expect("odd degree has a real root");
            slots.push((lone, 0.0));
            slots.push((r.re, -r.im));
            slots.push((r.re, r.im));
        }
    } else if top_real >= top_pair {
        let a = reals.pop_front().expect("real root");
        let b = reals.pop_front().expect("even count of reals");
        slots.push((b, 0.0));
        slots.push((a, 0.0));
    } else {
        let r = uppers.pop_front().expect("pair");
        slots.push((r.re, -r.im));
        slots.push((r.re, r.im));
    }
    // Remaining roots fill the leading pairs, order immaterial.
    let mut head: Vec<(f64, f64)> = Vec::new();
    while let Some(r) = uppers.pop_front() {
        head.push((r.re, -r.im));
        head.push((r.re, r.im));
    }
    while let Some(a) = reals.pop_front() {
        head.push((a, 0.0));
    }
    head.extend(slots);
    debug_assert_eq!(head.len(), m);

    let sys = esf_constraints(p);
    let mut point = q.to_vec();
    point.extend(head.iter().map(|s| s.0));
    point.extend(sys.retained_y.iter().map(|&k| head[k - 1].1));
    point
}

/// Uniform tensor grid on `[lo, hi]^n`, first coordinate slowest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridSpec {
    pub fn new(n: usize, points: usize) -> Result<Self> {
        if n == 0 || points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points in at least one dimension, got n={n}, points={points}"
            )));
        }
        Ok(GridSpec { n, points, lo: -1.0, hi: 1.0 })
    }

    /// 1001 points for one parameter, 201 per axis otherwise.
    pub fn default_for(n: usize) -> Self {
        let points = if n == 1 { 1001 } else { 201 };
        GridSpec { n, points, lo: -1.0, hi: 1.0 }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.hi } else { self.lo + h * i as f64 })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let axis = self.axis();
        let mut out = vec![0.0; self.n];
        let mut rest = idx;
        for k in (0..self.n).rev() {
            out[k] = axis[rest % self.points];
            rest /= self.points;
        }
        out
    }

    pub fn all_points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Tensor trapezoid weights, summing to the box volume.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        let w1: Vec<f64> = (0..self.points)
            .map(|i| if i == 0 || i + 1 == self.points { 0.5 * h } else { h })
            .collect();
        (0..self.len())
            .map(|idx| {
                let mut rest = idx;
                let mut w = 1.0;
                for _ in 0..self.n {
                    w *= w1[rest % self.points];
                    rest /= self.points;
                }
                w
            })
            .collect()
    }

    /// Evaluates `f` at every grid point, in parallel, in grid order.
    pub fn map<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|i| f(&self.point(i)))
            .collect()
    }
}

/// Weighted sum in grid order, so results do not depend on thread count.
fn quadrature(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RegionDescription {
    /// Sorted disjoint closed intervals.
    Intervals(Vec<(f64, f64)>),
    /// Grid membership, first coordinate slowest, with the cell-counted volume.
    Mask { grid: GridSpec, mask: Vec<bool>, volume: f64 },
}

impl RegionDescription {
    pub fn volume(&self) -> f64 {
        match self {
            RegionDescription::Intervals(iv) => iv.iter().map(|(a, b)| b - a).sum(),
            RegionDescription::Mask { volume, .. } => *volume,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            RegionDescription::Intervals(iv) => iv.is_empty(),
            RegionDescription::Mask { mask, .. } => !mask.iter().any(|&b| b),
        }
    }

    /// Volume of the symmetric difference with another region of the same kind.
    pub fn symmetric_difference(&self, other: &RegionDescription) -> Result<f64> {
        match (self, other) {
            (RegionDescription::Intervals(a), RegionDescription::Intervals(b)) => {
                Ok(self.volume() + other.volume() - 2.0 * interval_overlap(a, b))
            }
            (
                RegionDescription::Mask { grid, mask: a, .. },
                RegionDescription::Mask { grid: g2, mask: b, .. },
            ) if grid == g2 => Ok(grid
                .weights()
                .iter()
                .zip(a.iter().zip(b))
                .filter(|(_, (x, y))| x != y)
                .map(|(w, _)| w)
                .sum()),
            _ => Err(Error::InvalidGrid("regions are not comparable".into())),
        }
    }
}

fn interval_overlap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            total += (a1.min(b1) - a0.max(b0)).max(0.0);
        }
    }
    total
}

/// `{q : f(q) < 0}` on the grid. In one dimension the endpoints of each
/// run are refined by bisection on `f`.
pub fn sublevel_region<F>(grid: &GridSpec, values: &[f64], f: F) -> RegionDescription
where
    F: Fn(f64) -> f64,
{
    if grid.n != 1 {
        let mask: Vec<bool> = values.iter().map(|&v| v < 0.0).collect();
        let volume = grid
            .weights()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum();
        return RegionDescription::Mask { grid: *grid, mask, volume };
    }
    let axis = grid.axis();
    let refine = |lo: f64, hi: f64| -> f64 {
        // f(lo) and f(hi) differ in sign with respect to `< 0`.
        let neg_lo = f(lo) < 0.0;
        let (mut a, mut b) = (lo, hi);
        while b - a > BISECTION_TOL {
            let mid = 0.5 * (a + b);
            if (f(mid) < 0.0) == neg_lo {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..axis.len() {
        let neg = values[i] < 0.0;
        match (neg, start) {
            (true, None) => {
                start = Some(if i == 0 { axis[0] } else { refine(axis[i - 1], axis[i]) });
            }
            (false, Some(s)) => {
                out.push((s, refine(axis[i - 1], axis[i])));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, *axis.last().expect("grid has points")));
    }
    RegionDescription::Intervals(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub grid: GridSpec,
    /// Trapezoid estimate of `∫ |approx - reference|`.
    pub l1_gap: f64,
    pub linf_gap: f64,
    /// Where `linf_gap` is attained.
    pub linf_at: Vec<f64>,
    /// Points where the bound fails by more than `VALIDITY_TOL`.
    pub violation_count: usize,
    pub violation_points: Vec<Vec<f64>>,
    /// Same count at `COARSE_TOL`.
    pub coarse_violation_count: usize,
    /// Largest amount by which the bound fails (0 when valid everywhere).
    pub max_violation: f64,
    /// `{approx < 0}`; for the Hermite scheme `{g > 0}`.
    pub sublevel_approx: RegionDescription,
    /// `{reference < 0}`.
    pub sublevel_oracle: RegionDescription,
    /// Gauß-Lucas only: points where the stage-1 bound is not tight where
    /// the scheme needs it to be.
    pub hypothesis_violations: Option<Vec<Vec<f64>>>,
}

/// Compares an approximation with the oracle on a grid.
///
/// Upper and lower bounds on the abscissa are compared with `a(q)`, the
/// naive lower bound with the smallest real part, and a Hermite inner
/// function `g` through `-g` against `a(q)`.
pub fn gap_report(approx: &AbscissaApprox, p: &ParamPolynomial, grid: &GridSpec) -> Result<GapReport> {
    gap_report_for(&approx.poly, approx.direction, approx.aux_poly.as_ref(), p, grid)
}

/// As [`gap_report`], from the polynomial and its direction alone.
pub fn gap_report_for(
    poly: &MultiPoly,
    dir: Direction,
    aux_poly: Option<&MultiPoly>,
    p: &ParamPolynomial,
    grid: &GridSpec,
) -> Result<GapReport> {
    if poly.nvars() != p.n() || grid.n != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: if poly.nvars() != p.n() { poly.nvars() } else { grid.n },
        });
    }
    let fpoly = poly.to_f64();
    let value = |q: &[f64]| -> f64 {
        let v = fpoly.eval(q);
        if dir == Direction::HermiteInner {
            -v
        } else {
            v
        }
    };
    let reference = |q: &[f64]| -> f64 {
        if dir == Direction::LowerOnMinRealPart {
            min_realpart_oracle(p, q)
        } else {
            abscissa_oracle(p, q)
        }
    };
    let approx_vals = grid.map(value);
    let ref_vals = grid.map(reference);
    let weights = grid.weights();
    let diffs: Vec<f64> = approx_vals.iter().zip(&ref_vals).map(|(a, r)| (a - r).abs()).collect();
    let l1_gap = quadrature(&diffs, &weights);
    let (imax, linf_gap) = diffs
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });

    // How much the bound fails by at each point.
    let failure: Vec<f64> = approx_vals
        .iter()
        .zip(&ref_vals)
        .map(|(&a, &r)| match dir {
            Direction::UpperOnAbscissa => r - a,
            Direction::LowerOnAbscissa | Direction::LowerOnMinRealPart => a - r,
            // Inner approximation: g > 0 must imply a < 0.
            Direction::HermiteInner => {
                if a < 0.0 {
                    r.min(-a)
                } else {
                    0.0
                }
            }
        })
        .collect();
    let mut violation_points = Vec::new();
    let mut violation_count = 0;
    let mut coarse_violation_count = 0;
    for (i, &f) in failure.iter().enumerate() {
        if f > VALIDITY_TOL {
            violation_count += 1;
            if violation_points.len() < POINT_CAP {
                violation_points.push(grid.point(i));
            }
        }
        if f > COARSE_TOL {
            coarse_violation_count += 1;
        }
    }
    let max_violation = failure.iter().copied().fold(0.0, f64::max);

    let sublevel_approx = sublevel_region(grid, &approx_vals, |t| value(&[t]));
    let sublevel_oracle = sublevel_region(grid, &ref_vals, |t| reference(&[t]));
    let hypothesis_violations = match (aux_poly, dir) {
        (Some(vhat), Direction::LowerOnAbscissa) => Some(check_assumption2_grid(p, vhat, grid)?),
        _ => None,
    };
    Ok(GapReport {
        grid: *grid,
        l1_gap,
        linf_gap,
        linf_at: grid.point(imax),
        violation_count,
        violation_points,
        coarse_violation_count,
        max_violation,
        sublevel_approx,
        sublevel_oracle,
        hypothesis_violations,
    })
}

/// Points where a root's real part lies strictly between the abscissa of
/// `p'` and that of `p`.
pub fn check_assumption1(p: &ParamPolynomial, grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
    check_dims(p, grid)?;
    if p.m() < 2 {
        return Ok(Vec::new());
    }
    let dp = derivative_in_s(p)?;
    let flags: Vec<f64> = grid.map(|q| {
        let roots = roots_at(p, q);
        let a = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
        let a_d = abscissa_oracle(&dp, q);
        let inside = roots
            .iter()
            .any(|r| r.re > a_d + ASSUMPTION1_TOL && r.re < a - ASSUMPTION1_TOL);
        if inside {
            1.0
        } else {
            0.0
        }
    });
    Ok(collect_flagged(grid, &flags))
}

/// Points where `a_p` and `a_{p'}` agree but `vhat` is not tight on `a_{p'}`.
pub fn check_assumption2_grid(
    p: &ParamPolynomial,
    vhat: &MultiPoly,
    grid: &GridSpec,
) -> Result<Vec<Vec<f64>>> {
    check_dims(p, grid)?;
    if vhat.nvars() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: vhat.nvars(),
        });
    }
    if p.m() < 2 {
        return Ok(Vec::new());
    }
    let dp = derivative_in_s(p)?;
    let fv = vhat.to_f64();
    let flags: Vec<f64> = grid.map(|q| {
        let a = abscissa_oracle(p, q);
        let a_d = abscissa_oracle(&dp, q);
        if (a - a_d).abs() <= ASSUMPTION2_TOL && fv.eval(q) - a_d > ASSUMPTION2_TOL {
            1.0
        } else {
            0.0
        }
    });
    Ok(collect_flagged(grid, &flags))
}

fn check_dims(p: &ParamPolynomial, grid: &GridSpec) -> Result<()> {
    if grid.n != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: grid.n,
        });
    }
    Ok(())
}

fn collect_flagged(grid: &GridSpec, flags: &[f64]) -> Vec<Vec<f64>> {
    flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f != 0.0)
        .map(|(i, _)| grid.point(i))
        .collect()
}
