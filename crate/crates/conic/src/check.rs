//! Cone-membership residuals for a candidate point.

use crate::program::{Cone, ConeConstraint, ConicProgram};

/// Violation magnitude of each constraint, in constraint order. Zero means the
/// block is satisfied exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub per_constraint: Vec<f64>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.per_constraint.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max() <= tol
    }

    /// Index and magnitude of the worst block.
    pub fn worst(&self) -> Option<(usize, f64)> {
        self.per_constraint
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Evaluates every affine map at `x` and measures how far it lies outside its cone.
///
/// Panics if `x.len() != prog.n_vars()`.
pub fn check_solution(prog: &ConicProgram, x: &[f64]) -> ResidualReport {
    assert_eq!(x.len(), prog.n_vars(), "point has wrong dimension");
    ResidualReport {
        per_constraint: prog.constraints().iter().map(|c| violation(c, x)).collect(),
    }
}

fn violation(c: &ConeConstraint, x: &[f64]) -> f64 {
    let v = c.eval(x);
    cone_violation(c.cone, &v)
}

/// Violation of a concrete vector against a cone.
pub fn cone_violation(cone: Cone, v: &[f64]) -> f64 {
    match cone {
        Cone::Zero(_) => v.iter().fold(0.0, |m, r| m.max(r.abs())),
        Cone::Nonnegative(_) => v.iter().fold(0.0, |m, r| m.max(-r)),
        Cone::SecondOrder(_) => {
            let tail = v[1..].iter().map(|r| r * r).sum::<f64>().sqrt();
            (tail - v[0]).max(0.0)
        }
        Cone::Exponential => exp_violation(v[0], v[1], v[2]),
    }
}

fn exp_violation(x: f64, y: f64, z: f64) -> f64 {
    if y > 0.0 {
        let lhs = y * (x / y).exp();
        if lhs.is_finite() {
            (lhs - z).max(0.0)
        } else {
            f64::INFINITY
        }
    } else {
        // boundary piece of the closure: y = 0, x ≤ 0, z ≥ 0
        (-y) + x.max(0.0) + (-z).max(0.0)
    }
}
