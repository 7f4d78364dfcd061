//! Block semidefinite programs with free variables.
//!
//! ```text
//! minimize    Σ_k <C_k, X_k> + c_f · f
//! subject to  Σ_k <A_{r,k}, X_k> + Σ_j B_{r,j} f_j = b_r   for every row r
//!             X_k ⪰ 0,  f free
//! ```
//!
//! Symmetric coefficient matrices are stored sparsely by their upper
//! triangle: an entry `(i, j, v)` with `i <= j` means `A_ij = A_ji = v`, so
//! its contribution to `<A, X>` is `v X_ii` on the diagonal and `2 v X_ij`
//! off it.

mod solver;

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use solver::{kkt_residuals, solve, Residuals, SdpSolution, SolveStatus, SolverConfig};

/// One upper-triangle entry of a symmetric coefficient matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintRow {
    pub gram: Vec<SymEntry>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl ConstraintRow {
    pub fn max_abs(&self) -> f64 {
        self.gram
            .iter()
            .map(|e| e.value.abs())
            .chain(self.free.iter().map(|(_, v)| v.abs()))
            .fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.gram.is_empty() && self.free.is_empty()
    }

    /// `<A_r, X> + B_r · f`.
    pub fn eval(&self, x: &[DMatrix<f64>], f: &[f64]) -> f64 {
        gram_inner(&self.gram, x) + self.free.iter().map(|&(j, v)| v * f[j]).sum::<f64>()
    }
}

/// `<A, X>` for a sparse symmetric `A` spread over blocks.
pub fn gram_inner(entries: &[SymEntry], x: &[DMatrix<f64>]) -> f64 {
    entries
        .iter()
        .map(|e| {
            let v = x[e.block][(e.i, e.j)];
            if e.i == e.j {
                e.value * v
            } else {
                e.value * (v + x[e.block][(e.j, e.i)])
            }
        })
        .sum()
}

/// Adds `scale · A` into dense blocks.
pub fn gram_accumulate(entries: &[SymEntry], scale: f64, out: &mut [DMatrix<f64>]) {
    for e in entries {
        out[e.block][(e.i, e.j)] += scale * e.value;
        if e.i != e.j {
            out[e.block][(e.j, e.i)] += scale * e.value;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub n_free: usize,
    pub rows: Vec<ConstraintRow>,
    pub obj_gram: Vec<SymEntry>,
    pub obj_free: Vec<f64>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, n_free: usize) -> Self {
        SdpProblem {
            block_dims,
            n_free,
            rows: Vec::new(),
            obj_gram: Vec::new(),
            obj_free: vec![0.0; n_free],
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.obj_free.len() != self.n_free {
            return Err(Error::MalformedSdp(format!(
                "objective has {} free coefficients, expected {}",
                self.obj_free.len(),
                self.n_free
            )));
        }
        let check = |e: &SymEntry| -> Result<()> {
            let dim = *self.block_dims.get(e.block).ok_or_else(|| {
                Error::MalformedSdp(format!("block {} does not exist", e.block))
            })?;
            if e.i > e.j || e.j >= dim {
                return Err(Error::MalformedSdp(format!(
                    "entry ({}, {}) invalid for block {} of size {dim}",
                    e.i, e.j, e.block
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::MalformedSdp("non-finite coefficient".into()));
            }
            Ok(())
        };
        for e in &self.obj_gram {
            check(e)?;
        }
        for (r, row) in self.rows.iter().enumerate() {
            for e in &row.gram {
                check(e)?;
            }
            if let Some((j, _)) = row.free.iter().find(|(j, _)| *j >= self.n_free) {
                return Err(Error::MalformedSdp(format!(
                    "row {r} references free variable {j}"
                )));
            }
            if !row.rhs.is_finite() {
                return Err(Error::MalformedSdp(format!("row {r} has non-finite rhs")));
            }
        }
        Ok(())
    }

    /// Primal objective at `(X, f)`.
    pub fn objective(&self, x: &[DMatrix<f64>], f: &[f64]) -> f64 {
        gram_inner(&self.obj_gram, x)
            + self.obj_free.iter().zip(f).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Sparse text dump.
    ///
    /// ```text
    /// SDP blocks=<k> free=<f> rows=<r>
    /// dims <n_1> ... <n_k>
    /// <row> <block> <i> <j> <value>        (block -1: free variable i, j = 0)
    /// obj <block> <i> <j> <value>
    /// rhs <row> <value>
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "SDP blocks={} free={} rows={}",
            self.block_dims.len(),
            self.n_free,
            self.rows.len()
        );
        let dims: Vec<String> = self.block_dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "dims {}", dims.join(" "));
        for (r, row) in self.rows.iter().enumerate() {
            for e in &row.gram {
                let _ = writeln!(s, "{r} {} {} {} {:e}", e.block, e.i, e.j, e.value);
            }
            for (j, v) in &row.free {
                let _ = writeln!(s, "{r} -1 {j} 0 {v:e}");
            }
        }
        for e in &self.obj_gram {
            let _ = writeln!(s, "obj {} {} {} {:e}", e.block, e.i, e.j, e.value);
        }
        for (j, v) in self.obj_free.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(s, "obj -1 {j} 0 {v:e}");
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.rhs != 0.0 {
                let _ = writeln!(s, "rhs {r} {:e}", row.rhs);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<SdpProblem> {
        let bad = |line: usize, msg: &str| Error::MalformedSdp(format!("line {}: {msg}", line + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(0, "empty input"))?;
        let mut nblocks = None;
        let mut nfree = None;
        let mut nrows = None;
        for tok in header.split_whitespace().skip(1) {
            let (k, v) = tok.split_once('=').ok_or_else(|| bad(0, "bad header"))?;
            let v: usize = v.parse().map_err(|_| bad(0, "bad header value"))?;
            match k {
                "blocks" => nblocks = Some(v),
                "free" => nfree = Some(v),
                "rows" => nrows = Some(v),
                _ => return Err(bad(0, "unknown header key")),
            }
        }
        let (nblocks, nfree, nrows) = match (nblocks, nfree, nrows) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(bad(0, "incomplete header")),
        };
        let (dl, dims_line) = lines.next().ok_or_else(|| bad(1, "missing dims"))?;
        let dims: Vec<usize> = dims_line
            .split_whitespace()
            .skip(1)
            .map(|t| t.parse().map_err(|_| bad(dl, "bad dimension")))
            .collect::<Result<_>>()?;
        if dims.len() != nblocks {
            return Err(bad(dl, "dims count differs from header"));
        }
        let mut p = SdpProblem::new(dims, nfree);
        p.rows = vec![ConstraintRow::default(); nrows];
        for (ln, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64> {
                toks.get(i)
                    .ok_or_else(|| bad(ln, "missing field"))?
                    .parse()
                    .map_err(|_| bad(ln, "bad number"))
            };
            let idx = |i: usize| -> Result<i64> {
                toks.get(i)
                    .ok_or_else(|| bad(ln, "missing field"))?
                    .parse()
                    .map_err(|_| bad(ln, "bad index"))
            };
            match toks.first().copied() {
                Some("rhs") => {
                    let r = idx(1)? as usize;
                    let row = p.rows.get_mut(r).ok_or_else(|| bad(ln, "row out of range"))?;
                    row.rhs = num(2)?;
                }
                Some("obj") => {
                    let block = idx(1)?;
                    let (i, j, v) = (idx(2)? as usize, idx(3)? as usize, num(4)?);
                    if block < 0 {
                        *p.obj_free.get_mut(i).ok_or_else(|| bad(ln, "free index"))? = v;
                    } else {
                        p.obj_gram.push(SymEntry { block: block as usize, i, j, value: v });
                    }
                }
                Some(_) => {
                    let r = idx(0)? as usize;
                    let block = idx(1)?;
                    let (i, j, v) = (idx(2)? as usize, idx(3)? as usize, num(4)?);
                    let row = p.rows.get_mut(r).ok_or_else(|| bad(ln, "row out of range"))?;
                    if block < 0 {
                        row.free.push((i, v));
                    } else {
                        row.gram.push(SymEntry { block: block as usize, i, j, value: v });
                    }
                }
                None => {}
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SdpProblem {
        let mut p = SdpProblem::new(vec![2, 1], 1);
        p.rows.push(ConstraintRow {
            gram: vec![
                SymEntry { block: 0, i: 0, j: 1, value: 0.5 },
                SymEntry { block: 1, i: 0, j: 0, value: -2.0 },
            ],
            free: vec![(0, 1.25)],
            rhs: 3.0,
        });
        p.obj_gram.push(SymEntry { block: 0, i: 0, j: 0, value: 1.0 });
        p.obj_free[0] = -0.1;
        p
    }

    #[test]
    fn text_dump_round_trip() {
        let p = small();
        let text = p.to_text();
        assert!(text.starts_with("SDP blocks=2 free=1 rows=1\n"));
        assert_eq!(SdpProblem::from_text(&text).unwrap(), p);
    }

    #[test]
    fn validation_catches_bad_indices() {
        let mut p = small();
        p.rows[0].gram.push(SymEntry { block: 0, i: 1, j: 0, value: 1.0 });
        assert!(p.validate().is_err());
        let mut p = small();
        p.rows[0].free.push((4, 1.0));
        assert!(p.validate().is_err());
    }

    #[test]
    fn row_evaluation_counts_off_diagonal_twice() {
        let p = small();
        let x = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]),
            DMatrix::from_element(1, 1, 3.0),
        ];
        // 0.5 * (2 + 2) - 2 * 3 + 1.25 * 4
        assert!((p.rows[0].eval(&x, &[4.0]) - 1.0).abs() < 1e-15);
    }
}
