//! Sparse affine expressions over real decision variables.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Handle to a scalar decision variable of a [`crate::ConicProgram`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

/// `constant + Σ coef·x[var]`.
///
/// Terms are kept unsorted and may repeat a variable; they are merged when the
/// program is lowered to matrix form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: Var, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_scaled(&mut self, other: &AffExpr, k: f64) -> &mut Self {
        if k != 0.0 {
            self.terms
                .extend(other.terms.iter().map(|&(v, c)| (v, c * k)));
            self.constant += other.constant * k;
        }
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * x[v.0])
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|(v, _)| v.0).max()
    }
}

impl From<Var> for AffExpr {
    fn from(v: Var) -> Self {
        AffExpr::term(v, 1.0)
    }
}

impl From<f64> for AffExpr {
    fn from(c: f64) -> Self {
        AffExpr::constant(c)
    }
}

impl Add for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: AffExpr) -> AffExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Add<f64> for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: f64) -> AffExpr {
        self.constant += rhs;
        self
    }
}

impl AddAssign for AffExpr {
    fn add_assign(&mut self, rhs: AffExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Sub for AffExpr {
    type Output = AffExpr;
    fn sub(self, rhs: AffExpr) -> AffExpr {
        self + rhs.scaled(-1.0)
    }
}

impl Sub<f64> for AffExpr {
    type Output = AffExpr;
    fn sub(mut self, rhs: f64) -> AffExpr {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for AffExpr {
    type Output = AffExpr;
    fn mul(self, k: f64) -> AffExpr {
        self.scaled(k)
    }
}

impl Neg for AffExpr {
    type Output = AffExpr;
    fn neg(self) -> AffExpr {
        self.scaled(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_merges_repeated_terms() {
        let mut e = AffExpr::constant(1.0);
        e.add_term(Var(0), 2.0).add_term(Var(0), 3.0).add_term(Var(1), -1.0);
        assert_eq!(e.eval(&[1.0, 4.0]), 1.0 + 5.0 - 4.0);
    }

    #[test]
    fn arithmetic() {
        let x = AffExpr::from(Var(0));
        let y = AffExpr::from(Var(1));
        let e = (x.clone() * 2.0 - y + 3.0) + (-x);
        assert_eq!(e.eval(&[5.0, 7.0]), 5.0 - 7.0 + 3.0);
        assert_eq!(e.max_var(), Some(1));
        assert_eq!(AffExpr::zero().max_var(), None);
    }
}
