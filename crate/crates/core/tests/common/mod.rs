#![allow(dead_code)]
pub mod esf;

use abscissa_core::cli::ProblemFile;
use abscissa_core::poly::ParamPolynomial;
use abscissa_core::sdp::{ConstraintRow, SdpProblem, SymEntry};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PROBLEMS: [&str; 6] = [
    "damped",
    "cubic",
    "two-parameter",
    "quadratic-derivative",
    "quartic-crossing",
    "damped-hermite",
];

pub fn problem_path(name: &str) -> String {
    format!("{}/problems/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn problem(name: &str) -> ParamPolynomial {
    ProblemFile::load(problem_path(name).as_ref())
        .and_then(|f| f.polynomial())
        .unwrap()
}

fn entries(block: usize, a: &DMatrix<f64>) -> Vec<SymEntry> {
    let mut out = Vec::new();
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            if a[(i, j)] != 0.0 {
                out.push(SymEntry { block, i, j, value: a[(i, j)] });
            }
        }
    }
    out
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

/// Random orthogonal basis split into complementary ranges, giving
/// `X = U_1 D_1 U_1ᵀ` and `S = U_2 D_2 U_2ᵀ` with `XS = 0`.
fn complementary_pair(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
    let rank = rng.gen_range(1..n.max(2)).min(n);
    let mut x = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    for k in 0..n {
        let u = q.column(k);
        let w = rng.gen_range(0.5..2.0);
        if k < rank {
            x += w * u * u.transpose();
        } else {
            s += w * u * u.transpose();
        }
    }
    (x, s)
}

/// Random SDP with a known optimum: a strictly complementary primal-dual
/// pair is chosen first and the data is built around it.
pub fn planted_sdp(seed: u64) -> (SdpProblem, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=4)).collect();
    let n_free = rng.gen_range(0..=2);
    let svec: usize = dims.iter().map(|d| d * (d + 1) / 2).sum();
    let n_rows = n_free + rng.gen_range(1..=svec.min(6));

    let (xs, ss): (Vec<_>, Vec<_>) = dims.iter().map(|&d| complementary_pair(&mut rng, d)).unzip();
    let f: Vec<f64> = (0..n_free).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n_rows).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut p = SdpProblem::new(dims.clone(), n_free);
    let mut cmat: Vec<DMatrix<f64>> = ss.clone();
    let mut cf = vec![0.0; n_free];
    for (r, &yr) in y.iter().enumerate() {
        let mut row = ConstraintRow::default();
        let mut rhs = 0.0;
        for (b, &d) in dims.iter().enumerate() {
            let a = random_sym(&mut rng, d);
            rhs += a.dot(&xs[b]);
            cmat[b] += yr * &a;
            row.gram.extend(entries(b, &a));
        }
        // Free columns form an identity block on the first rows so they
        // stay independent.
        for j in 0..n_free {
            let v = if r == j { 1.0 } else { rng.gen_range(-0.5..0.5) };
            row.free.push((j, v));
            rhs += v * f[j];
            cf[j] += v * yr;
        }
        row.rhs = rhs;
        p.rows.push(row);
    }
    for (b, c) in cmat.iter().enumerate() {
        p.obj_gram.extend(entries(b, c));
    }
    p.obj_free = cf;
    let optimum = p.objective(&xs, &f);
    (p, optimum)
}

fn entry(block: usize, i: usize, j: usize, value: f64) -> SymEntry {
    SymEntry { block, i, j, value }
}

/// Small problems whose optimum is known by hand.
pub fn hand_checked() -> Vec<(&'static str, SdpProblem, f64)> {
    // min x with x - 1 = X, X >= 0.
    let mut scalar = SdpProblem::new(vec![1], 1);
    scalar.rows.push(ConstraintRow { gram: vec![entry(0, 0, 0, -1.0)], free: vec![(0, 1.0)], rhs: 1.0 });
    scalar.obj_free[0] = 1.0;

    // Gram of (1 + q)^2 over [1, q].
    let mut gram = SdpProblem::new(vec![2], 0);
    for (e, rhs) in [(entry(0, 0, 0, 1.0), 1.0), (entry(0, 0, 1, 1.0), 2.0), (entry(0, 1, 1, 1.0), 1.0)] {
        gram.rows.push(ConstraintRow { gram: vec![e], free: vec![], rhs });
    }

    // min t with t I - [[2, 1], [1, 2]] = X >= 0.
    let mut eig = SdpProblem::new(vec![2], 1);
    eig.rows.push(ConstraintRow { gram: vec![entry(0, 0, 0, 1.0)], free: vec![(0, -1.0)], rhs: -2.0 });
    eig.rows.push(ConstraintRow { gram: vec![entry(0, 0, 1, 0.5)], free: vec![], rhs: -1.0 });
    eig.rows.push(ConstraintRow { gram: vec![entry(0, 1, 1, 1.0)], free: vec![(0, -1.0)], rhs: -2.0 });
    eig.obj_free[0] = 1.0;

    vec![("scalar bound", scalar, 1.0), ("rank-one gram", gram, 0.0), ("max eigenvalue", eig, 3.0)]
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}
