//! Coefficient matching for SOS certificates.
//!
//! A template describes the identity
//!
//! ```text
//! sign · v(q) + fixed = Σ_i σ_i · g_i + Σ_j τ_j · h_j
//! ```
//!
//! where `v` is the decision polynomial in the parameters, `σ_i` are sums of
//! squares (Gram matrices over a monomial basis) and `τ_j` are unrestricted
//! polynomials. Compiling at level `d` bounds every product by degree `2d`
//! and equates coefficients monomial by monomial.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num::{Signed, Zero};

use crate::error::{Error, Result};
use crate::moments::MomentTable;
use crate::poly::{monomials_up_to, rational_from_f64, rational_to_f64, Monomial, MultiPoly, Rational};
use crate::sdp::{ConstraintRow, SdpProblem, SdpSolution, SymEntry};

/// All monomials over `nvars` variables of total degree at most `degree`,
/// graded with earlier variables first within a degree.
pub fn monomial_basis(nvars: usize, degree: u32) -> Vec<Monomial> {
    monomials_up_to(nvars, degree)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub name: String,
    pub poly: MultiPoly,
}

#[derive(Clone, Debug)]
pub struct CertificateTemplate {
    pub vars: Vec<String>,
    /// The decision polynomial lives in the first `n_params` variables.
    pub n_params: usize,
    /// +1 when the decision polynomial enters the target positively, -1
    /// when negatively, 0 for a pure feasibility template without one.
    pub decision_sign: i32,
    pub fixed: MultiPoly,
    /// SOS-weighted generators; the first is always the constant 1.
    pub ineq: Vec<Generator>,
    pub eq: Vec<Generator>,
    pub sense: Sense,
}

impl CertificateTemplate {
    /// Template with only the σ₀ slot.
    pub fn new(
        vars: Vec<String>,
        n_params: usize,
        decision_sign: i32,
        fixed: MultiPoly,
        sense: Sense,
    ) -> Result<Self> {
        if fixed.vars() != vars.as_slice() {
            return Err(Error::VariableMismatch {
                left: vars,
                right: fixed.vars().to_vec(),
            });
        }
        if n_params > vars.len() {
            return Err(Error::DimensionMismatch {
                expected: vars.len(),
                got: n_params,
            });
        }
        let one = MultiPoly::one(&vars);
        Ok(CertificateTemplate {
            vars,
            n_params,
            decision_sign: decision_sign.signum(),
            fixed,
            ineq: vec![Generator {
                name: "sigma0".into(),
                poly: one,
            }],
            eq: Vec::new(),
            sense,
        })
    }

    fn check_vars(&self, g: &MultiPoly) -> Result<()> {
        if g.vars() != self.vars.as_slice() {
            return Err(Error::VariableMismatch {
                left: self.vars.clone(),
                right: g.vars().to_vec(),
            });
        }
        Ok(())
    }

    pub fn add_ineq(&mut self, name: impl Into<String>, g: MultiPoly) -> Result<()> {
        self.check_vars(&g)?;
        self.ineq.push(Generator { name: name.into(), poly: g });
        Ok(())
    }

    pub fn add_eq(&mut self, name: impl Into<String>, h: MultiPoly) -> Result<()> {
        self.check_vars(&h)?;
        self.eq.push(Generator { name: name.into(), poly: h });
        Ok(())
    }

    /// Adds the box generators `1 - q_j^2`.
    pub fn add_box(&mut self) -> Result<()> {
        for j in 0..self.n_params {
            let qj = MultiPoly::var_at(&self.vars, j);
            let g = &MultiPoly::one(&self.vars) - &qj.pow(2);
            self.add_ineq(format!("box_{}", self.vars[j]), g)?;
        }
        Ok(())
    }

    /// Smallest level at which every multiplier degree bound is nonnegative
    /// and the fixed part fits.
    pub fn minimal_level(&self) -> usize {
        let max_deg = self
            .ineq
            .iter()
            .chain(&self.eq)
            .map(|g| g.poly.degree())
            .chain(std::iter::once(self.fixed.degree()))
            .max()
            .unwrap_or(0);
        max_deg.div_ceil(2) as usize
    }

    pub fn sos_degree(&self, g: &Generator, d: usize) -> u32 {
        (2 * d as u32 - g.poly.degree()) / 2
    }

    pub fn free_degree(&self, h: &Generator, d: usize) -> u32 {
        2 * d as u32 - h.poly.degree()
    }
}

#[derive(Clone, Debug)]
pub struct BlockLayout {
    pub name: String,
    pub basis: Vec<Monomial>,
    /// When set, the Gram matrix is `V G Vᵀ` with `G` the solver's block and
    /// `V` this matrix (orthonormal columns).
    pub face: Option<DMatrix<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    /// Restrict each Gram matrix to the complement of the coefficient
    /// vectors of `h_j · r` (deg ≤ basis degree). Those directions are
    /// absorbed by the free multipliers, so the optimum is unchanged, but
    /// without the restriction every dual slack is singular on them and the
    /// interior-point iteration loses accuracy.
    pub facial_reduction: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            facial_reduction: true,
        }
    }
}

/// Orthonormal basis of the complement of `span{h · r}` in the coefficient
/// space of `basis`, or `None` if that span is trivial.
fn ideal_face(basis: &[Monomial], eq: &[Generator], top: u32) -> Option<DMatrix<f64>> {
    let n = basis.len();
    let nv = basis.first()?.nvars();
    let index: HashMap<&Monomial, usize> = basis.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for h in eq {
        let dh = h.poly.degree();
        if dh > top || h.poly.is_zero() {
            continue;
        }
        let terms: Vec<(&Monomial, f64)> = h.poly.terms().map(|(m, c)| (m, rational_to_f64(c))).collect();
        for r in monomials_up_to(nv, top - dh) {
            let mut col = DVector::zeros(n);
            for &(m, c) in &terms {
                col[index[&r.mul(m)]] += c;
            }
            cols.push(col);
        }
    }
    if cols.is_empty() {
        return None;
    }
    let k = DMatrix::from_columns(&cols);
    let eig = (&k * k.transpose()).symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-9 * lmax).collect();
    if keep.len() == n {
        return None;
    }
    Some(eig.eigenvectors.select_columns(&keep))
}

/// Rewrites the entries of faced blocks in face coordinates.
fn restrict_rows(entries: &mut Vec<SymEntry>, faces: &[Option<DMatrix<f64>>]) {
    let mut dense: HashMap<usize, DMatrix<f64>> = HashMap::new();
    entries.retain(|e| {
        let Some(v) = &faces[e.block] else {
            return true;
        };
        let acc = dense
            .entry(e.block)
            .or_insert_with(|| DMatrix::zeros(v.ncols(), v.ncols()));
        let vi = v.row(e.i);
        let vj = v.row(e.j);
        let outer = vi.transpose() * vj;
        if e.i == e.j {
            *acc += outer * e.value;
        } else {
            *acc += (&outer + outer.transpose()) * e.value;
        }
        false
    });
    let mut blocks: Vec<usize> = dense.keys().copied().collect();
    blocks.sort_unstable();
    for b in blocks {
        let m = &dense[&b];
        let big = m.amax();
        for j in 0..m.ncols() {
            for i in 0..=j {
                let v = m[(i, j)];
                if v.abs() > 1e-14 * big {
                    entries.push(SymEntry { block: b, i, j, value: v });
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct FreeLayout {
    pub name: String,
    pub basis: Vec<Monomial>,
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub struct CompiledSdp {
    pub level: usize,
    pub problem: SdpProblem,
    pub row_monomials: Vec<Monomial>,
    pub blocks: Vec<BlockLayout>,
    /// Decision coefficients occupy free variables `0..decision_basis.len()`.
    pub decision_basis: Vec<Monomial>,
    pub free_multipliers: Vec<FreeLayout>,
}

pub fn compile(template: &CertificateTemplate, d: usize) -> Result<CompiledSdp> {
    compile_with(template, d, &CompileOptions::default())
}

pub fn compile_with(
    template: &CertificateTemplate,
    d: usize,
    options: &CompileOptions,
) -> Result<CompiledSdp> {
    let minimal = template.minimal_level();
    if d < minimal {
        return Err(Error::LevelTooLow {
            requested: d,
            minimal,
        });
    }
    let nv = template.vars.len();
    let np = template.n_params;
    let top = 2 * d as u32;
    let row_monomials = monomial_basis(nv, top);
    let row_of: HashMap<&Monomial, usize> =
        row_monomials.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut rows = vec![ConstraintRow::default(); row_monomials.len()];

    let blocks: Vec<BlockLayout> = template
        .ineq
        .iter()
        .map(|g| {
            let t = template.sos_degree(g, d);
            let basis = monomial_basis(nv, t);
            let face = if options.facial_reduction {
                ideal_face(&basis, &template.eq, t)
            } else {
                None
            };
            BlockLayout {
                name: g.name.clone(),
                basis,
                face,
            }
        })
        .collect();

    let decision_top = if template.decision_sign == 0 { None } else { Some(top) };
    let decision_basis: Vec<Monomial> = decision_top
        .map(|t| monomial_basis(np, t))
        .unwrap_or_default()
        .into_iter()
        .map(|m| {
            let mut e = m.0;
            e.resize(nv, 0);
            Monomial(e)
        })
        .collect();
    let mut offset = decision_basis.len();
    let mut free_multipliers = Vec::new();
    for h in &template.eq {
        let basis = monomial_basis(nv, template.free_degree(h, d));
        let len = basis.len();
        free_multipliers.push(FreeLayout {
            name: h.name.clone(),
            basis,
            offset,
        });
        offset += len;
    }
    let dims = blocks
        .iter()
        .map(|b| b.face.as_ref().map_or(b.basis.len(), |v| v.ncols()))
        .collect();
    let mut problem = SdpProblem::new(dims, offset);

    // Σ σ_i g_i
    for (k, (g, layout)) in template.ineq.iter().zip(&blocks).enumerate() {
        let terms: Vec<(&Monomial, f64)> = g.poly.terms().map(|(m, c)| (m, rational_to_f64(c))).collect();
        for (i, bi) in layout.basis.iter().enumerate() {
            for (j, bj) in layout.basis.iter().enumerate().skip(i) {
                let prod = bi.mul(bj);
                for &(m, c) in &terms {
                    let r = row_of[&prod.mul(m)];
                    rows[r].gram.push(SymEntry { block: k, i, j, value: c });
                }
            }
        }
    }
    // Σ τ_j h_j
    for (h, layout) in template.eq.iter().zip(&free_multipliers) {
        let terms: Vec<(&Monomial, f64)> = h.poly.terms().map(|(m, c)| (m, rational_to_f64(c))).collect();
        for (i, b) in layout.basis.iter().enumerate() {
            for &(m, c) in &terms {
                let r = row_of[&b.mul(m)];
                rows[r].free.push((layout.offset + i, c));
            }
        }
    }
    // - sign · v
    let sign = -(template.decision_sign as f64);
    for (i, m) in decision_basis.iter().enumerate() {
        rows[row_of[m]].free.push((i, sign));
    }
    for (m, c) in template.fixed.terms() {
        let r = *row_of.get(m).ok_or_else(|| {
            Error::MalformedSdp(format!("fixed part term {m:?} exceeds degree {top}"))
        })?;
        rows[r].rhs = rational_to_f64(c);
    }
    let faces: Vec<Option<DMatrix<f64>>> = blocks.iter().map(|b| b.face.clone()).collect();
    if faces.iter().any(Option::is_some) {
        for row in &mut rows {
            restrict_rows(&mut row.gram, &faces);
        }
    }
    problem.rows = rows;

    let moments = MomentTable::new(np);
    let obj_sign = match template.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for (i, m) in decision_basis.iter().enumerate() {
        problem.obj_free[i] = obj_sign * rational_to_f64(&moments.moment(&m.0[..np]));
    }

    Ok(CompiledSdp {
        level: d,
        problem,
        row_monomials,
        blocks,
        decision_basis,
        free_multipliers,
    })
}

/// Multipliers read back from a solver solution.
#[derive(Clone, Debug)]
pub struct Multipliers {
    /// Decision polynomial over the parameter variables.
    pub decision: MultiPoly,
    pub grams: Vec<(String, Vec<Monomial>, DMatrix<f64>)>,
    pub free: Vec<(String, MultiPoly)>,
}

impl CompiledSdp {
    pub fn extract(&self, template: &CertificateTemplate, sol: &SdpSolution) -> Multipliers {
        let qvars = &template.vars[..template.n_params];
        let decision = MultiPoly::from_terms(
            qvars,
            self.decision_basis.iter().enumerate().map(|(i, m)| {
                (
                    Monomial(m.0[..template.n_params].to_vec()),
                    rational_from_f64(sol.free_values[i]),
                )
            }),
        );
        let grams = self
            .blocks
            .iter()
            .zip(&sol.psd_values)
            .map(|(b, g)| {
                let full = match &b.face {
                    Some(v) => v * g * v.transpose(),
                    None => g.clone(),
                };
                (b.name.clone(), b.basis.clone(), full)
            })
            .collect();
        let free = self
            .free_multipliers
            .iter()
            .map(|l| {
                let p = MultiPoly::from_terms(
                    &template.vars,
                    l.basis
                        .iter()
                        .enumerate()
                        .map(|(i, m)| (m.clone(), rational_from_f64(sol.free_values[l.offset + i]))),
                );
                (l.name.clone(), p)
            })
            .collect();
        Multipliers { decision, grams, free }
    }
}

/// Largest coefficient of `sign·v + fixed - Σ σ_i g_i - Σ τ_j h_j`, expanded
/// in exact arithmetic from the floating-point multipliers.
pub fn identity_residual(template: &CertificateTemplate, mult: &Multipliers) -> Result<f64> {
    let vars = &template.vars;
    let mut acc: HashMap<Monomial, Rational> = HashMap::new();
    let mut add = |m: Monomial, c: Rational| {
        let e = acc.entry(m).or_insert_with(Rational::zero);
        *e += c;
    };
    for (m, c) in template.fixed.terms() {
        add(m.clone(), c.clone());
    }
    let v = mult.decision.embed(vars)?;
    let sign = Rational::from_integer(template.decision_sign.into());
    for (m, c) in v.terms() {
        add(m.clone(), c * &sign);
    }
    for (g, (_, basis, gram)) in template.ineq.iter().zip(&mult.grams) {
        // σ = bᵀ G b expanded over products of basis monomials.
        let mut sigma: HashMap<Monomial, Rational> = HashMap::new();
        for (i, bi) in basis.iter().enumerate() {
            for (j, bj) in basis.iter().enumerate().skip(i) {
                let mut c = rational_from_f64(gram[(i, j)]);
                if i != j {
                    c += rational_from_f64(gram[(j, i)]);
                }
                if c.is_zero() {
                    continue;
                }
                *sigma.entry(bi.mul(bj)).or_insert_with(Rational::zero) += c;
            }
        }
        for (sm, sc) in &sigma {
            for (gm, gc) in g.poly.terms() {
                add(sm.mul(gm), -(sc * gc));
            }
        }
    }
    for (h, (_, tau)) in template.eq.iter().zip(&mult.free) {
        let prod = tau.try_mul(&h.poly)?;
        for (m, c) in prod.terms() {
            add(m.clone(), -c.clone());
        }
    }
    Ok(acc
        .values()
        .map(|c| rational_to_f64(&c.abs()))
        .fold(0.0, f64::max))
}
