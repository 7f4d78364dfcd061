//! The m = 3 and m = 4 symmetric-function systems written out by hand.

use abscissa_core::poly::{esf_constraints, int, param_var_names, parse_poly, MultiPoly, ParamPolynomial};

fn generic(m: usize) -> ParamPolynomial {
    // Distinct coefficients so each p_k is identifiable in the output.
    let vars = param_var_names(1);
    let lower = (0..m)
        .map(|k| parse_poly(&format!("{}*q1^{} + {}", k + 2, k + 1, k + 1), &vars).unwrap())
        .collect();
    ParamPolynomial::from_lower(1, lower).unwrap()
}

struct Ring<'a>(&'a [String], &'a ParamPolynomial);

impl Ring<'_> {
    fn v(&self, name: &str) -> MultiPoly {
        MultiPoly::var(self.0, name).unwrap()
    }
    fn p(&self, k: usize) -> MultiPoly {
        self.1.coeff(k).embed(self.0).unwrap()
    }
}

fn sq(a: &MultiPoly) -> MultiPoly {
    a * a
}

fn neg(a: &MultiPoly) -> MultiPoly {
    a.scale(&int(-1))
}

fn expect(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn compare(
    m: usize,
    vars: &[&str],
    real: impl Fn(&Ring) -> Vec<MultiPoly>,
    imag: impl Fn(&Ring) -> Vec<MultiPoly>,
) -> Result<(), String> {
    let p = generic(m);
    let s = esf_constraints(&p);
    expect(s.vars == vars, || format!("variables {:?}", s.vars))?;
    let r = Ring(&s.vars, &p);
    let want = real(&r);
    expect(s.real_equalities.len() == want.len(), || "real equality count".into())?;
    for (k, (got, want)) in s.real_equalities.iter().zip(&want).enumerate() {
        expect(got == want, || format!("real equality {}: {got} vs {want}", k + 1))?;
    }
    // The imaginary identities read `0 = ...`, so the sign is free.
    let want = imag(&r);
    expect(s.imag_equalities.len() == want.len(), || "imaginary equality count".into())?;
    for (got, want) in s.imag_equalities.iter().zip(&want) {
        expect(got == want || got == &neg(want), || format!("imaginary equality {got} vs {want}"))?;
    }
    let xm = r.v(&format!("x{m}"));
    let order: Vec<MultiPoly> = (1..m).map(|k| &xm - &r.v(&format!("x{k}"))).collect();
    expect(s.order_constraints == order, || "order constraints".into())
}

pub fn cubic_system_matches_display() -> Result<(), String> {
    compare(
        3,
        &["q1", "x1", "x2", "x3", "y2", "y3"],
        |r| {
            let (x1, x2, x3, y2, y3) = (r.v("x1"), r.v("x2"), r.v("x3"), r.v("y2"), r.v("y3"));
            let e1 = &(&x1 + &x2) + &x3;
            let e2 = &(&(&(&(&x1 * &x2) + &(&x1 * &x3)) + &(&x2 * &x3)) + &sq(&y2)) + &(&(&y2 * &y3) + &sq(&y3));
            let e3 = &(&(&(&x1 * &x2) * &x3) + &(&(&(&(&x2 + &x3) - &x1) * &y2) * &y3))
                + &(&(&x2 * &sq(&y3)) + &(&x3 * &sq(&y2)));
            vec![&neg(&r.p(2)) - &e1, &r.p(1) - &e2, &neg(&r.p(0)) - &e3]
        },
        |r| {
            let (x1, x2, x3, y2, y3) = (r.v("x1"), r.v("x2"), r.v("x3"), r.v("y2"), r.v("y3"));
            let im2 = &(&(&x1 - &x2) * &y2) + &(&(&x1 - &x3) * &y3);
            let im3 = &(&(&(&(&x1 - &x2) * &x3) * &y2) + &(&(&(&x1 - &x3) * &x2) * &y3))
                + &(&(&sq(&y2) * &y3) + &(&y2 * &sq(&y3)));
            vec![im2, im3]
        },
    )
}

pub fn quartic_system_matches_display() -> Result<(), String> {
    compare(
        4,
        &["q1", "x1", "x2", "x3", "x4", "y2", "y4"],
        |r| {
            let (x1, x2, x3, x4, y2, y4) = (r.v("x1"), r.v("x2"), r.v("x3"), r.v("x4"), r.v("y2"), r.v("y4"));
            let e1 = &(&(&x1 + &x2) + &x3) + &x4;
            let pairs = &(&(&(&(&(&x1 * &x2) + &(&x1 * &x3)) + &(&x1 * &x4)) + &(&x2 * &x3)) + &(&x2 * &x4))
                + &(&x3 * &x4);
            let e2 = &(&pairs + &sq(&y2)) + &sq(&y4);
            let e3 = &(&(&(&(&x1 * &x2) * &(&x3 + &x4)) + &(&(&x1 + &x2) * &(&x3 * &x4)))
                + &(&(&x1 + &x2) * &sq(&y4)))
                + &(&(&x3 + &x4) * &sq(&y2));
            let e4 = &(&(&(&(&(&x1 * &x2) * &x3) * &x4) + &(&(&(&(&x1 - &x2) * &(&x4 - &x3)) * &y2) * &y4))
                + &(&(&(&x1 * &x2) * &sq(&y4)) + &(&(&x3 * &x4) * &sq(&y2))))
                + &(&sq(&y2) * &sq(&y4));
            vec![&neg(&r.p(3)) - &e1, &r.p(2) - &e2, &neg(&r.p(1)) - &e3, &r.p(0) - &e4]
        },
        |r| {
            let (x1, x2, x3, x4, y2, y4) = (r.v("x1"), r.v("x2"), r.v("x3"), r.v("x4"), r.v("y2"), r.v("y4"));
            let im3 = &(&(&(&x1 - &x2) * &(&x3 + &x4)) * &y2) + &(&(&(&x1 + &x2) * &(&x3 - &x4)) * &y4);
            let im4 = &(&(&(&x1 - &x2) * &(&(&x3 * &x4) + &sq(&y4))) * &y2)
                + &(&(&(&x3 - &x4) * &(&(&x1 * &x2) + &sq(&y2))) * &y4);
            vec![im3, im4]
        },
    )
}
