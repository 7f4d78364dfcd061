//! Root-set description through elementary symmetric functions.
//!
//! The roots are written `s_l = x_l + i y_l`, `l = 1..m`, with `x_m` the
//! largest real part. Half of the imaginary parts are eliminated by fixing
//! which roots pair up as conjugates: `y_{k-1} = -y_k` for even `k`, and for
//! odd `m` the last three slots share `y_{m-2} = -y_{m-1} - y_m`.

use num::One;

use super::{int, parse::param_var_names, MultiPoly, ParamPolynomial};

#[derive(Clone, Debug, PartialEq)]
pub struct EsfSystem {
    pub m: usize,
    /// Variables `q1..qn, x1..xm` followed by the retained `y`s.
    pub vars: Vec<String>,
    /// `(-1)^k p_{m-k}(q) - Re e_k` for `k = 1..m`.
    pub real_equalities: Vec<MultiPoly>,
    /// `Im e_k` for `k = floor(m/2)+1..m`.
    pub imag_equalities: Vec<MultiPoly>,
    /// `x_m - x_k` for `k = 1..m-1`, each required to be nonnegative.
    pub order_constraints: Vec<MultiPoly>,
    /// 1-based indices of the retained `y` variables.
    pub retained_y: Vec<usize>,
}

impl EsfSystem {
    /// Real equalities followed by the surviving imaginary ones.
    pub fn equalities(&self) -> Vec<MultiPoly> {
        self.real_equalities
            .iter()
            .chain(&self.imag_equalities)
            .cloned()
            .collect()
    }

    /// Position of `x_k` (1-based `k`) in `vars`.
    pub fn x_index(&self, k: usize) -> usize {
        self.vars.len() - self.retained_y.len() - self.m + k - 1
    }

    /// Imaginary part of each root slot, as a linear form in the retained
    /// `y` variables: `(retained position, coefficient)` pairs.
    pub fn y_forms(&self) -> Vec<Vec<(usize, i64)>> {
        y_forms(self.m)
    }
}

/// Retained `y` indices (1-based) for degree `m`.
pub fn retained_y(m: usize) -> Vec<usize> {
    if m.is_multiple_of(2) {
        (1..=m / 2).map(|j| 2 * j).collect()
    } else {
        let mut r: Vec<usize> = (2..m.saturating_sub(2)).step_by(2).collect();
        if m >= 3 {
            r.push(m - 1);
        }
        r.push(m);
        r
    }
}

fn y_forms(m: usize) -> Vec<Vec<(usize, i64)>> {
    let kept = retained_y(m);
    let pos = |k: usize| kept.iter().position(|&r| r == k).expect("retained y");
    let mut forms = vec![Vec::new(); m + 1];
    if m.is_multiple_of(2) {
        for k in (2..=m).step_by(2) {
            forms[k] = vec![(pos(k), 1)];
            forms[k - 1] = vec![(pos(k), -1)];
        }
    } else {
        for k in (2..m.saturating_sub(2)).step_by(2) {
            forms[k] = vec![(pos(k), 1)];
            forms[k - 1] = vec![(pos(k), -1)];
        }
        forms[m] = vec![(pos(m), 1)];
        if m >= 3 {
            forms[m - 1] = vec![(pos(m - 1), 1)];
            forms[m - 2] = vec![(pos(m - 1), -1), (pos(m), -1)];
        }
    }
    forms.remove(0);
    forms
}

pub fn esf_constraints(p: &ParamPolynomial) -> EsfSystem {
    let m = p.m();
    let n = p.n();
    let kept = retained_y(m);
    let mut vars = param_var_names(n);
    vars.extend((1..=m).map(|k| format!("x{k}")));
    vars.extend(kept.iter().map(|k| format!("y{k}")));
    let ybase = n + m;

    let roots: Vec<(MultiPoly, MultiPoly)> = y_forms(m)
        .into_iter()
        .enumerate()
        .map(|(l, form)| {
            let x = MultiPoly::var_at(&vars, n + l);
            let mut y = MultiPoly::zero(&vars);
            for (pos, c) in form {
                y = &y + &MultiPoly::var_at(&vars, ybase + pos).scale(&int(c));
            }
            (x, y)
        })
        .collect();

    // e_0..e_m as (re, im), built one root at a time.
    let mut e: Vec<(MultiPoly, MultiPoly)> = vec![(MultiPoly::zero(&vars), MultiPoly::zero(&vars)); m + 1];
    e[0].0 = MultiPoly::one(&vars);
    for (l, (sx, sy)) in roots.iter().enumerate() {
        for k in (1..=l + 1).rev() {
            let (pr, pi) = &e[k - 1];
            let re = &(pr * sx) - &(pi * sy);
            let im = &(pr * sy) + &(pi * sx);
            e[k].0 = &e[k].0 + &re;
            e[k].1 = &e[k].1 + &im;
        }
    }

    let real_equalities = (1..=m)
        .map(|k| {
            let sign = if k % 2 == 0 { int(1) } else { -num::BigRational::one() };
            let pk = p.coeff(m - k).embed(&vars).expect("parameters embed");
            &pk.scale(&sign) - &e[k].0
        })
        .collect();
    let imag_equalities = (m / 2 + 1..=m).map(|k| e[k].1.clone()).collect();
    let xm = MultiPoly::var_at(&vars, n + m - 1);
    let order_constraints = (1..m)
        .map(|k| &xm - &MultiPoly::var_at(&vars, n + k - 1))
        .collect();

    EsfSystem {
        m,
        vars,
        real_equalities,
        imag_equalities,
        order_constraints,
        retained_y: kept,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    fn sys(coeffs: &[&str]) -> EsfSystem {
        let vars = param_var_names(1);
        let p = ParamPolynomial::from_lower(
            1,
            coeffs.iter().map(|c| parse_poly(c, &vars).unwrap()).collect(),
        )
        .unwrap();
        esf_constraints(&p)
    }

    #[test]
    fn retained_counts() {
        for m in 2..=9 {
            let r = retained_y(m);
            assert_eq!(r.len(), m.div_ceil(2), "m = {m}");
            assert_eq!(*r.last().unwrap(), m);
        }
        assert_eq!(retained_y(3), vec![2, 3]);
        assert_eq!(retained_y(4), vec![2, 4]);
        assert_eq!(retained_y(5), vec![2, 4, 5]);
    }

    #[test]
    fn forms_sum_to_zero() {
        // The imaginary parts of a conjugate-closed root set cancel.
        for m in 2..=8 {
            let mut total = vec![0i64; retained_y(m).len()];
            for form in y_forms(m) {
                for (pos, c) in form {
                    total[pos] += c;
                }
            }
            assert!(total.iter().all(|&t| t == 0), "m = {m}");
        }
    }

    #[test]
    fn damped_oscillator_system() {
        let s = sys(&["1 - 2*q1", "2*q1"]);
        assert_eq!(s.vars, vec!["q1", "x1", "x2", "y2"]);
        let v = &s.vars;
        assert_eq!(s.real_equalities[0], parse_poly("-2*q1 - x1 - x2", v).unwrap());
        assert_eq!(
            s.real_equalities[1],
            parse_poly("1 - 2*q1 - x1*x2 - y2^2", v).unwrap()
        );
        assert_eq!(s.imag_equalities, vec![parse_poly("x1*y2 - x2*y2", v).unwrap()]);
        assert_eq!(s.order_constraints, vec![parse_poly("x2 - x1", v).unwrap()]);
    }
}
