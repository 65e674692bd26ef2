//! Conic programs over the zero cone, the nonnegative orthant, second-order
//! cones and the three-dimensional exponential cone.
//!
//! Programs are assembled from sparse [`AffExpr`] rows, solved with an
//! interior-point backend, and can be re-checked independently of the backend
//! with [`check_solution`]. Objectives are always maximized.

mod check;
mod dump;
mod expr;
mod program;
mod solve;

pub use check::{check_solution, cone_violation, ResidualReport};
pub use dump::{read_dump, write_dump};
pub use expr::{AffExpr, Var};
pub use program::{Cone, ConeConstraint, ConicProgram};
pub use solve::{solve, ConicSolution, Residuals, SolveStatus, SolverSettings};

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("backend rejected program: {0}")]
    Backend(String),
    #[error("dump parse error: {0}")]
    Parse(String),
}
