//! Canonical conic program: a linear objective (maximized) and an ordered list
//! of affine maps, each constrained to lie in one cone.

use crate::expr::{AffExpr, Var};
use crate::ConicError;

/// Cones understood by the solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// `{0}^n`
    Zero(usize),
    /// `R_+^n`
    Nonnegative(usize),
    /// `{(t, u) : ‖u‖₂ ≤ t}` of total dimension `n`.
    SecondOrder(usize),
    /// Closure of `{(x, y, z) : y > 0, y·exp(x/y) ≤ z}`.
    Exponential,
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonnegative(n) | Cone::SecondOrder(n) => n,
            Cone::Exponential => 3,
        }
    }

    pub(crate) fn tag(&self) -> &'static str {
        match self {
            Cone::Zero(_) => "zero",
            Cone::Nonnegative(_) => "nonneg",
            Cone::SecondOrder(_) => "soc",
            Cone::Exponential => "exp",
        }
    }
}

/// One cone membership `rows(x) ∈ cone`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeConstraint {
    pub cone: Cone,
    pub rows: Vec<AffExpr>,
}

impl ConeConstraint {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval(x)).collect()
    }
}

/// A conic program in maximization form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    n_vars: usize,
    objective: AffExpr,
    constraints: Vec<ConeConstraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn objective(&self) -> &AffExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[ConeConstraint] {
        &self.constraints
    }

    pub fn add_var(&mut self) -> Var {
        self.n_vars += 1;
        Var(self.n_vars - 1)
    }

    pub fn add_vars(&mut self, n: usize) -> Vec<Var> {
        (0..n).map(|_| self.add_var()).collect()
    }

    /// Replaces the objective; the program maximizes it.
    pub fn maximize(&mut self, objective: AffExpr) {
        self.objective = objective;
    }

    /// Appends a raw cone membership. Shape errors surface in [`Self::validate`].
    pub fn add_constraint(&mut self, cone: Cone, rows: Vec<AffExpr>) {
        self.constraints.push(ConeConstraint { cone, rows });
    }

    /// `expr = 0`
    pub fn equal_zero(&mut self, expr: AffExpr) {
        self.add_constraint(Cone::Zero(1), vec![expr]);
    }

    /// `expr ≥ 0`
    pub fn nonneg(&mut self, expr: AffExpr) {
        self.add_constraint(Cone::Nonnegative(1), vec![expr]);
    }

    /// `lhs ≤ rhs`
    pub fn less_eq(&mut self, lhs: AffExpr, rhs: AffExpr) {
        self.nonneg(rhs - lhs);
    }

    /// `‖tail‖₂ ≤ head`
    pub fn soc(&mut self, head: AffExpr, tail: Vec<AffExpr>) {
        let mut rows = Vec::with_capacity(tail.len() + 1);
        rows.push(head);
        rows.extend(tail);
        self.add_constraint(Cone::SecondOrder(rows.len()), rows);
    }

    /// `y·exp(x/y) ≤ z`, `y > 0`.
    pub fn exp_cone(&mut self, x: AffExpr, y: AffExpr, z: AffExpr) {
        self.add_constraint(Cone::Exponential, vec![x, y, z]);
    }

    /// `Σ terms² ≤ bound`, encoded as `‖(bound − 1, 2·terms)‖ ≤ bound + 1`.
    pub fn sum_squares_le(&mut self, terms: Vec<AffExpr>, bound: AffExpr) {
        let mut tail = Vec::with_capacity(terms.len() + 1);
        tail.push(bound.clone() - 1.0);
        tail.extend(terms.into_iter().map(|t| t * 2.0));
        self.soc(bound + 1.0, tail);
    }

    /// Checks cone dimensions against row counts and variable indices against `n_vars`.
    pub fn validate(&self) -> Result<(), ConicError> {
        let check_vars = |e: &AffExpr, ctx: &str| match e.max_var() {
            Some(v) if v >= self.n_vars => Err(ConicError::Malformed(format!(
                "{ctx}: variable {v} out of range (n_vars = {})",
                self.n_vars
            ))),
            _ => Ok(()),
        };
        check_vars(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            let dim = c.cone.dim();
            if dim == 0 {
                return Err(ConicError::Malformed(format!(
                    "constraint {i}: empty {} cone",
                    c.cone.tag()
                )));
            }
            if c.rows.len() != dim {
                return Err(ConicError::Malformed(format!(
                    "constraint {i}: {} cone of dimension {dim} given {} rows",
                    c.cone.tag(),
                    c.rows.len()
                )));
            }
            for r in &c.rows {
                check_vars(r, &format!("constraint {i}"))?;
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.iter().map(|c| c.rows.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_row_mismatch() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_constraint(Cone::SecondOrder(3), vec![x.into(), x.into()]);
        assert!(matches!(p.validate(), Err(ConicError::Malformed(_))));
    }

    #[test]
    fn validate_rejects_bad_exp_block() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_constraint(Cone::Exponential, vec![x.into(); 4]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn validate_rejects_unknown_var() {
        let mut p = ConicProgram::new();
        let _ = p.add_var();
        p.nonneg(AffExpr::term(Var(3), 1.0));
        assert!(p.validate().is_err());
    }

    #[test]
    fn sum_squares_encoding_is_exact() {
        let mut p = ConicProgram::new();
        let y = p.add_var();
        let z = p.add_var();
        p.sum_squares_le(vec![y.into()], z.into());
        let c = &p.constraints()[0];
        // y² ≤ z ⇔ ‖(z−1, 2y)‖ ≤ z+1
        for &(yv, zv, inside) in &[(1.0, 1.0, true), (2.0, 3.9, false), (0.5, 0.3, true)] {
            let r = c.eval(&[yv, zv]);
            let norm = (r[1] * r[1] + r[2] * r[2]).sqrt();
            assert_eq!(norm <= r[0] + 1e-12, inside, "y={yv} z={zv}");
        }
    }
}
