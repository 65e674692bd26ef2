//! Convex pieces of the trajectory program.
//!
//! Distances are squared horizontal offsets plus altitude; all slacks enter
//! scaled by their value at the expansion point so that every row is O(1).

use rsma_conic::{AffExpr, ConicProgram, Var};

use crate::error::{Error, Result};
use crate::model::Point;

/// `2x^τ·x − (x^τ)²`: global minorant of `x²`, tight at `x^τ`.
pub fn quadratic_lower(x: AffExpr, x_prev: f64) -> AffExpr {
    x * (2.0 * x_prev) - x_prev * x_prev
}

/// Tangent of the convex map `a ↦ a^(−4/α)` at `a_prev`.
pub fn user_tangent_bound(a: f64, a_prev: f64, alpha: f64) -> f64 {
    let k = 4.0 / alpha;
    a_prev.powf(-k) - k * a_prev.powf(-k - 1.0) * (a - a_prev)
}

/// Affine minorant of `‖q − p‖² + z²` at `q_prev`.
pub fn distance_minorant(q: Point, q_prev: Point, node: Point, z: f64) -> f64 {
    let dx = q_prev[0] - node[0];
    let dy = q_prev[1] - node[1];
    dx * dx + dy * dy + z * z + 2.0 * (dx * (q[0] - q_prev[0]) + dy * (q[1] - q_prev[1]))
}

/// `ln(1 + r^τ) + (r − r^τ)/(1 + r^τ)`, the tangent majorant of `ln(1 + r)`.
pub fn log1p_tangent(r: f64, r_prev: f64) -> f64 {
    r_prev.ln_1p() + (r - r_prev) / (1.0 + r_prev)
}

/// `log₂(1+r_ll) − log₂(1+r_lj) − log₂(1+r_kk) + log₂(1+r_kj)`.
pub fn secrecy_exact(r_ll: f64, r_lj: f64, r_kk: f64, r_kj: f64) -> f64 {
    (r_ll.ln_1p() - r_lj.ln_1p() - r_kk.ln_1p() + r_kj.ln_1p()) / std::f64::consts::LN_2
}

/// [`secrecy_exact`] with both subtracted logarithms replaced by their
/// tangents at `(lj_prev, kk_prev)`, constants kept.
pub fn secrecy_surrogate(r_ll: f64, r_lj: f64, r_kk: f64, r_kj: f64, lj_prev: f64, kk_prev: f64) -> f64 {
    (r_ll.ln_1p() - log1p_tangent(r_lj, lj_prev) - log1p_tangent(r_kk, kk_prev) + r_kj.ln_1p())
        / std::f64::consts::LN_2
}

/// `‖q − p‖² + z² ≤ a_prev^(−κ)·(1 − κ(â − 1))` with `â = a/a_prev` and
/// `κ = 4/α`: the squared distance stays below the tangent of `a^(−κ)`,
/// hence `a ≤ d^(−α/2)`.
pub fn distance_gain_user_block(
    prog: &mut ConicProgram,
    q: &[AffExpr; 2],
    node: Point,
    z: f64,
    a_scaled: AffExpr,
    a_prev: f64,
    alpha: f64,
) -> Result<()> {
    if !(a_prev > 0.0) || !a_prev.is_finite() {
        return Err(Error::Domain(format!("expansion point of the user gain slack must be positive (got {a_prev})")));
    }
    let k = 4.0 / alpha;
    let m = a_prev.powf(-k);
    let s = 1.0 / m.sqrt();
    let terms = vec![(q[0].clone() - node[0]) * s, (q[1].clone() - node[1]) * s];
    let rhs = (a_scaled - 1.0) * (-k) + (1.0 - z * z / m);
    prog.sum_squares_le(terms, rhs);
    Ok(())
}

/// `b^(−κ) ≤` affine minorant of the squared distance at `q_prev`, so
/// `b ≥ d^(−α/2)`. Encoded as `v ≤ ln b̂` and `e^(−κv) ≤ lin/M` with
/// `M = b_prev^(−κ)`. Returns `v`.
#[allow(clippy::too_many_arguments)]
pub fn distance_gain_eve_block(
    prog: &mut ConicProgram,
    q: &[AffExpr; 2],
    q_prev: Point,
    node: Point,
    z: f64,
    b_scaled: AffExpr,
    b_prev: f64,
    alpha: f64,
) -> Var {
    let k = 4.0 / alpha;
    let m = b_prev.powf(-k);
    let dx = q_prev[0] - node[0];
    let dy = q_prev[1] - node[1];
    let lin = (q[0].clone() - q_prev[0]) * (2.0 * dx) + (q[1].clone() - q_prev[1]) * (2.0 * dy) + (dx * dx + dy * dy + z * z);
    let v = prog.add_var();
    prog.exp_cone(v.into(), AffExpr::constant(1.0), b_scaled);
    prog.exp_cone(AffExpr::from(v) * (-k), AffExpr::constant(1.0), lin * (1.0 / m));
    v
}

/// Step bounds `‖q[t+1] − q[t]‖ ≤ step`, `‖q[T−1] − q_f‖ ≤ step` and `q[0] = q_0`.
pub fn kinematics_block(prog: &mut ConicProgram, q: &[[Var; 2]], q0: Point, qf: Point, step: f64) {
    prog.equal_zero(AffExpr::from(q[0][0]) - q0[0]);
    prog.equal_zero(AffExpr::from(q[0][1]) - q0[1]);
    for w in q.windows(2) {
        prog.soc(
            AffExpr::constant(step),
            vec![AffExpr::from(w[1][0]) - AffExpr::from(w[0][0]), AffExpr::from(w[1][1]) - AffExpr::from(w[0][1])],
        );
    }
    let last = q[q.len() - 1];
    prog.soc(AffExpr::constant(step), vec![AffExpr::from(last[0]) - qf[0], AffExpr::from(last[1]) - qf[1]]);
}

/// Largest violation of the kinematic constraints and the name of the
/// constraint attaining it.
pub fn kinematic_violation(traj: &[Point], q0: Point, qf: Point, step: f64) -> (f64, String) {
    let mut worst = (0.0, String::new());
    let mut see = |v: f64, name: String| {
        if v > worst.0 {
            worst = (v, name);
        }
    };
    let d = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    if let Some(&first) = traj.first() {
        see(d(first, q0), "initial position q[0] = q0".into());
    }
    for (t, w) in traj.windows(2).enumerate() {
        see(d(w[1], w[0]) - step, format!("speed limit between slots {t} and {}", t + 1));
    }
    if let Some(&last) = traj.last() {
        see(d(last, qf) - step, "final position within one step of qF".into());
    }
    worst
}
