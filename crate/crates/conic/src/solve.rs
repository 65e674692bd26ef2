//! Interior-point solve of a [`ConicProgram`] through Clarabel.
//!
//! Clarabel works with `min ½xᵀPx + qᵀx  s.t.  Ax + s = b, s ∈ K`. Each
//! constraint row `r(x) = c + aᵀx` becomes `s = b − Ax` with `A = −aᵀ`, `b = c`,
//! and the objective is negated since programs here are maximized.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus as BackendStatus, SupportedConeT,
};

use crate::check::check_solution;
use crate::program::{Cone, ConicProgram};
use crate::ConicError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Feasibility and duality-gap tolerance handed to the backend.
    pub tol: f64,
    pub max_iter: u32,
    /// Largest cone violation (see [`check_solution`]) accepted for an
    /// `Optimal` status.
    pub accept_residual: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            accept_residual: 1e-8,
        }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            accept_residual: tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Residuals {
    /// Largest cone-membership violation of the returned point.
    pub primal: f64,
    /// Backend's scaled dual residual.
    pub dual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Objective value (maximization sense) at `x`.
    pub obj: f64,
    pub residuals: Residuals,
    pub iterations: u32,
}

/// Solves `prog`. Structural problems are reported as errors before the
/// backend runs; everything the backend reports comes back as a status.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    prog.validate()?;
    let n = prog.n_vars();
    let m = prog.n_rows();

    let mut q = vec![0.0; n];
    for &(v, c) in &prog.objective().terms {
        q[v.0] -= c;
    }

    let mut triplets = Vec::new();
    let mut b = Vec::with_capacity(m);
    let mut cones = Vec::with_capacity(prog.constraints().len());
    let mut row = 0;
    for c in prog.constraints() {
        for r in &c.rows {
            for &(v, coef) in &r.terms {
                triplets.push((v.0, row, -coef));
            }
            b.push(r.constant);
            row += 1;
        }
        cones.push(match c.cone {
            Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
            Cone::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
            Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
            Cone::Exponential => SupportedConeT::ExponentialConeT(),
        });
    }
    let a = csc_from_triplets(m, n, triplets);
    let p = CscMatrix::zeros((n, n));

    // The backend measures feasibility in a scaled norm; aiming two orders
    // tighter keeps the unscaled cone violation under `tol`.
    let inner_tol = (settings.tol * 1e-2).max(1e-13);
    let backend_settings = DefaultSettings {
        verbose: false,
        max_iter: settings.max_iter,
        tol_feas: inner_tol,
        tol_gap_abs: inner_tol,
        tol_gap_rel: inner_tol,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, backend_settings)
        .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let x = if sol.x.iter().all(|v| v.is_finite()) {
        sol.x.clone()
    } else {
        vec![f64::NAN; n]
    };
    let primal = if x.iter().all(|v| v.is_finite()) {
        check_solution(prog, &x).max()
    } else {
        f64::INFINITY
    };
    let status = match sol.status {
        BackendStatus::Solved | BackendStatus::AlmostSolved => {
            if primal <= settings.accept_residual {
                SolveStatus::Optimal
            } else {
                SolveStatus::NumericalFailure
            }
        }
        BackendStatus::PrimalInfeasible | BackendStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        BackendStatus::DualInfeasible | BackendStatus::AlmostDualInfeasible => {
            SolveStatus::Unbounded
        }
        BackendStatus::MaxIterations | BackendStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalFailure,
    };
    let obj = prog.objective().eval(&x);
    Ok(ConicSolution {
        status,
        x,
        obj,
        residuals: Residuals {
            primal,
            dual: sol.r_dual,
        },
        iterations: sol.iterations,
    })
}

/// Builds a CSC matrix from `(col, row, value)` triplets, summing duplicates.
fn csc_from_triplets(m: usize, n: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    t.sort_unstable_by_key(|a| (a.0, a.1));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(t.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (col, row, val) in t {
        if last == Some((col, row)) {
            *nzval.last_mut().unwrap() += val;
            continue;
        }
        rowval.push(row);
        nzval.push(val);
        colptr[col + 1] += 1;
        last = Some((col, row));
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AffExpr;

    #[test]
    fn csc_merges_duplicates() {
        let a = csc_from_triplets(2, 2, vec![(1, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        assert_eq!(a.colptr, vec![0, 1, 2]);
        assert_eq!(a.rowval, vec![1, 0]);
        assert_eq!(a.nzval, vec![2.0, 4.0]);
    }

    #[test]
    fn malformed_program_is_rejected_before_solving() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_constraint(Cone::Nonnegative(2), vec![AffExpr::from(x)]);
        assert!(matches!(
            solve(&p, &SolverSettings::default()),
            Err(ConicError::Malformed(_))
        ));
    }
}
