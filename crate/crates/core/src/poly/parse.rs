//! Text format for polynomials: a sum of terms `c * q1^a * q2^b * s^k`,
//! where `c` is an integer, a decimal, or a rational `p/r`. Whitespace is
//! ignored. When there is a single parameter, `q` is accepted for `q1`.

use num::{BigInt, One, Zero};

use super::{Monomial, MultiPoly, ParamPolynomial, Rational};
use crate::error::{Error, Result};

pub fn param_var_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("q{i}")).collect()
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<Rational> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = &self.src[start..self.pos];
        let mut frac_part: &[u8] = &[];
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fs = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac_part = &self.src[fs..self.pos];
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return self.err("expected a number");
        }
        let digits: String = int_part
            .iter()
            .chain(frac_part)
            .map(|&b| b as char)
            .collect();
        let mantissa: BigInt = digits.parse().expect("digits");
        let mut value = Rational::from_integer(mantissa)
            / Rational::from_integer(BigInt::from(10u32).pow(frac_part.len() as u32));
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E')
        {
            self.pos += 1;
            let neg = match self.src.get(self.pos) {
                Some(b'-') => {
                    self.pos += 1;
                    true
                }
                Some(b'+') => {
                    self.pos += 1;
                    false
                }
                _ => false,
            };
            let es = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if es == self.pos {
                return self.err("expected exponent digits");
            }
            let e: u32 = std::str::from_utf8(&self.src[es..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse {
                    pos: es,
                    msg: "exponent too large".into(),
                })?;
            let p = Rational::from_integer(BigInt::from(10u32).pow(e));
            value = if neg { value / p } else { value * p };
        }
        Ok(value)
    }

    fn exponent(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer exponent");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                pos: start,
                msg: "exponent too large".into(),
            })
    }

    fn ident(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if let Some(i) = self.vars.iter().position(|v| v == name) {
            return Ok(i);
        }
        if name == "q" {
            let qs: Vec<usize> = self
                .vars
                .iter()
                .enumerate()
                .filter(|(_, v)| v.starts_with('q'))
                .map(|(i, _)| i)
                .collect();
            if qs.len() == 1 && self.vars[qs[0]] == "q1" {
                return Ok(qs[0]);
            }
        }
        self.pos = start;
        self.err(format!("unknown variable `{name}`"))
    }

    /// One product of factors, without sign.
    fn term(&mut self) -> Result<(Monomial, Rational)> {
        let mut coeff = Rational::one();
        let mut exps = vec![0u32; self.vars.len()];
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    let mut v = self.number()?;
                    if self.peek() == Some(b'/') {
                        self.pos += 1;
                        let d = self.number()?;
                        if d.is_zero() {
                            return self.err("division by zero");
                        }
                        v /= d;
                    }
                    coeff *= v;
                }
                Some(c) if c.is_ascii_alphabetic() => {
                    let i = self.ident()?;
                    let e = if self.peek() == Some(b'^') {
                        self.pos += 1;
                        self.exponent()?
                    } else {
                        1
                    };
                    exps[i] += e;
                }
                _ => return self.err("expected a number or a variable"),
            }
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((Monomial(exps), coeff))
    }

    fn poly(&mut self) -> Result<MultiPoly> {
        let mut out = MultiPoly::zero(self.vars);
        let mut first = true;
        loop {
            let sign = match self.peek() {
                None if !first => break,
                None => return self.err("empty polynomial"),
                Some(b'+') => {
                    self.pos += 1;
                    1
                }
                Some(b'-') => {
                    self.pos += 1;
                    -1
                }
                Some(_) if first => 1,
                Some(_) => return self.err("expected `+` or `-`"),
            };
            first = false;
            let (m, c) = self.term()?;
            out.add_term(m, if sign < 0 { -c } else { c });
        }
        Ok(out)
    }
}

/// Parses a polynomial over the given variables.
pub fn parse_poly(text: &str, vars: &[String]) -> Result<MultiPoly> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
    };
    p.poly()
}

impl ParamPolynomial {
    /// Parses a full polynomial in `s` with parameters `q1..qn`.
    pub fn parse(text: &str, n: usize) -> Result<ParamPolynomial> {
        let qvars = param_var_names(n);
        let mut vars = qvars.clone();
        vars.push("s".into());
        let full = parse_poly(text, &vars)?;
        let m = full.terms().map(|(mono, _)| mono.0[n]).max().unwrap_or(0) as usize;
        let mut coeffs = vec![MultiPoly::zero(&qvars); m + 1];
        for (mono, c) in full.terms() {
            let k = mono.0[n] as usize;
            coeffs[k].add_term(Monomial(mono.0[..n].to_vec()), c.clone());
        }
        ParamPolynomial::new(n, coeffs)
    }
}
