use num::One;

use super::{int, parse::param_var_names, Monomial, MultiPoly, Rational};
use crate::error::{Error, Result};

/// Monic polynomial in `s` whose coefficients are polynomials in the
/// parameters `q1..qn`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPolynomial {
    n: usize,
    coeffs: Vec<MultiPoly>,
    /// Factor the raw polynomial was divided by to make it monic.
    normalization: Rational,
}

impl ParamPolynomial {
    /// Builds from `p_0..p_m`; `p_m` must be the constant 1.
    pub fn new(n: usize, coeffs: Vec<MultiPoly>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidPolynomial(
                "degree in s must be positive".into(),
            ));
        }
        let qvars = param_var_names(n);
        let coeffs = coeffs
            .into_iter()
            .map(|c| {
                c.restrict(&qvars)
                    .map_err(|e| match e {
                        Error::UnknownVariable(v) => Error::NotParametric(v),
                        other => other,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if coeffs.last().unwrap() != &MultiPoly::one(&qvars) {
            return Err(Error::InvalidPolynomial(
                "leading coefficient must be 1".into(),
            ));
        }
        Ok(ParamPolynomial {
            n,
            coeffs,
            normalization: Rational::one(),
        })
    }

    /// Builds from `p_0..p_{m-1}`, appending the leading 1.
    pub fn from_lower(n: usize, mut lower: Vec<MultiPoly>) -> Result<Self> {
        lower.push(MultiPoly::one(&param_var_names(n)));
        Self::new(n, lower)
    }

    /// Degree in `s`.
    pub fn m(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Number of parameters.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[MultiPoly] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &MultiPoly {
        &self.coeffs[k]
    }

    pub fn param_vars(&self) -> Vec<String> {
        param_var_names(self.n)
    }

    pub fn normalization(&self) -> &Rational {
        &self.normalization
    }

    /// Coefficients `p_0(q)..p_m(q)` at a parameter point.
    pub fn eval_coeffs(&self, q: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.eval(q)).collect()
    }

    /// Largest coefficient magnitude of the specialization at `q`.
    pub fn max_abs_coeff_at(&self, q: &[f64]) -> f64 {
        self.eval_coeffs(q).iter().fold(0.0, |a, c| a.max(c.abs()))
    }
}

/// Real and imaginary parts of `p(q, x + iy)` as polynomials in `(q, x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSplit {
    pub re: MultiPoly,
    pub im: MultiPoly,
}

impl ComplexSplit {
    /// Variables `q1..qn, x, y`.
    pub fn vars(&self) -> &[String] {
        self.re.vars()
    }
}

pub fn complex_split(p: &ParamPolynomial) -> ComplexSplit {
    let mut vars = p.param_vars();
    vars.push("x".into());
    vars.push("y".into());
    let n = p.n();
    let xi = n;
    let yi = n + 1;
    let mut re = MultiPoly::zero(&vars);
    let mut im = MultiPoly::zero(&vars);
    for (k, pk) in p.coeffs().iter().enumerate() {
        let pk = pk.embed(&vars).expect("parameter variables embed");
        let mut binom = Rational::one();
        for j in 0..=k {
            // C(k, j) x^(k-j) (iy)^j
            let mut e = vec![0u32; vars.len()];
            e[xi] = (k - j) as u32;
            e[yi] = j as u32;
            let sign = if j % 4 >= 2 { -binom.clone() } else { binom.clone() };
            let term = pk.shift(&Monomial(e)).scale(&sign);
            if j % 2 == 0 {
                re = &re + &term;
            } else {
                im = &im + &term;
            }
            binom = binom * int((k - j) as i64) / int(j as i64 + 1);
        }
    }
    ComplexSplit { re, im }
}

/// `p'(q, s) / m`, which is monic of degree `m - 1`.
pub fn derivative_in_s(p: &ParamPolynomial) -> Result<ParamPolynomial> {
    let m = p.m();
    if m < 2 {
        return Err(Error::DegreeTooLow(format!(
            "derivative of a degree-{m} polynomial in s has no roots"
        )));
    }
    let scale = int(m as i64);
    let inv = Rational::one() / &scale;
    let coeffs: Vec<MultiPoly> = (1..=m)
        .map(|k| p.coeff(k).scale(&(int(k as i64) * &inv)))
        .collect();
    let mut d = ParamPolynomial::new(p.n(), coeffs)?;
    d.normalization = &p.normalization * scale;
    Ok(d)
}
