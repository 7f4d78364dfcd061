//! Lebesgue moments on the box `[-1, 1]^n`.

use std::collections::HashMap;
use std::sync::RwLock;

use num::{BigInt, Zero};

use crate::error::{Error, Result};
use crate::poly::{Monomial, MultiPoly, Rational};

/// `∫_{[-1,1]^n} q^α dq` for a single exponent vector.
pub fn box_moment(alpha: &[u32]) -> Rational {
    let mut z = Rational::from_integer(BigInt::from(1));
    for &a in alpha {
        if a % 2 == 1 {
            return Rational::zero();
        }
        z *= Rational::new(BigInt::from(2), BigInt::from(a + 1));
    }
    z
}

/// Memoized moments for a fixed dimension.
#[derive(Debug, Default)]
pub struct MomentTable {
    n: usize,
    cache: RwLock<HashMap<Vec<u32>, Rational>>,
}

impl MomentTable {
    pub fn new(n: usize) -> Self {
        MomentTable {
            n,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn moment(&self, alpha: &[u32]) -> Rational {
        assert_eq!(alpha.len(), self.n, "moment index dimension");
        if let Some(z) = self.cache.read().expect("moment cache").get(alpha) {
            return z.clone();
        }
        let z = box_moment(alpha);
        self.cache
            .write()
            .expect("moment cache")
            .insert(alpha.to_vec(), z.clone());
        z
    }

    /// Exact integral of `f` over the box. The first `n` variables of `f`
    /// are the parameters; any other variable must not occur.
    pub fn integrate(&self, f: &MultiPoly) -> Result<Rational> {
        if f.nvars() < self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: f.nvars(),
            });
        }
        let mut acc = Rational::zero();
        for (m, c) in f.terms() {
            if let Some(i) = (self.n..m.nvars()).find(|&i| m.0[i] != 0) {
                return Err(Error::NotParametric(f.vars()[i].clone()));
            }
            acc += c * self.moment(&m.0[..self.n]);
        }
        Ok(acc)
    }

    pub fn moment_of(&self, m: &Monomial) -> Rational {
        self.moment(&m.0[..self.n])
    }
}

/// Integral of a polynomial in the parameters over `[-1, 1]^n`.
pub fn integrate_over_box(f: &MultiPoly, n: usize) -> Result<Rational> {
    MomentTable::new(n).integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, param_var_names, parse_poly, ratio};

    #[test]
    fn product_form() {
        assert_eq!(box_moment(&[0]), int(2));
        assert_eq!(box_moment(&[1]), int(0));
        assert_eq!(box_moment(&[2, 0]), ratio(4, 3));
        assert_eq!(box_moment(&[]), int(1));
    }

    #[test]
    fn integrals() {
        let v1 = param_var_names(1);
        let v2 = param_var_names(2);
        assert_eq!(integrate_over_box(&parse_poly("1", &v1).unwrap(), 1).unwrap(), int(2));
        assert_eq!(
            integrate_over_box(&parse_poly("q1^2", &v1).unwrap(), 1).unwrap(),
            ratio(2, 3)
        );
        assert_eq!(
            integrate_over_box(&parse_poly("q1*q2", &v2).unwrap(), 2).unwrap(),
            int(0)
        );
    }

    #[test]
    fn rejects_root_variables() {
        let vars: Vec<String> = ["q1", "x", "y"].iter().map(|s| s.to_string()).collect();
        let f = parse_poly("q1 + x", &vars).unwrap();
        assert!(matches!(
            integrate_over_box(&f, 1),
            Err(Error::NotParametric(v)) if v == "x"
        ));
        // A zero exponent on a root variable is fine.
        let g = parse_poly("q1^2 + 1", &vars).unwrap();
        assert_eq!(integrate_over_box(&g, 1).unwrap(), ratio(8, 3));
    }

    #[test]
    fn cache_is_shared_across_threads() {
        let table = MomentTable::new(2);
        std::thread::scope(|s| {
            for t in 0..4u32 {
                let table = &table;
                s.spawn(move || {
                    for a in 0..10u32 {
                        let z = table.moment(&[a, t]);
                        assert_eq!(z, box_moment(&[a, t]));
                    }
                });
            }
        });
    }
}
