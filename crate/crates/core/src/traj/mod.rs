//! Trajectory design for fixed beamformers.
//!
//! Small-scale fading is frozen; only the distance gains move with the UAV.
//! Positions are handled in hectometres inside the program. Per user and slot
//! a gain slack `a ≤ d^(−α/2)` lower-bounds the useful and interference SNRs,
//! per eavesdropper and slot `b ≥ d^(−α/2)` upper-bounds its SNRs, and the
//! secrecy rate is assembled from the four SNR slacks with the two subtracted
//! logarithms replaced by their tangents.

pub mod blocks;

use rsma_conic::{solve, AffExpr, ConicProgram, SolveStatus, SolverSettings, Var};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::model::{Geometry, NetworkConfig, Point, QoEParams};
use crate::rates::{evaluate_all, Beamformers, MetricsReport, RateAllocation};
pub use blocks::{
    distance_gain_eve_block, distance_gain_user_block, distance_minorant, kinematic_violation, kinematics_block,
    log1p_tangent, quadratic_lower, secrecy_exact, secrecy_surrogate, user_tangent_bound,
};

const HM: f64 = 100.0;
/// Relative shrink of the step bound inside the program, so solver round-off
/// cannot leave the returned path infeasible.
const STEP_MARGIN: f64 = 1e-7;
/// Gains below this (relative to noise) are treated as absent.
const GAIN_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajOptions {
    pub solver: SolverSettings,
}

impl Default for TrajOptions {
    fn default() -> Self {
        Self { solver: SolverSettings::with_tol(1e-6) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajStatus {
    Converged,
    IterationCap,
    /// The solver's point did not improve the true objective.
    Stalled,
    /// No user has positive secrecy at the fixed beams; nothing to optimize.
    Inactive,
}

/// Slack values at the returned trajectory, SNRs relative to noise.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajSlacks {
    /// `[user][slot]` amplitude gain slack `𝔞 ≤ d^(−α/2)`.
    pub a_slack: Vec<Vec<f64>>,
    /// `[eve][slot]` amplitude gain slack `𝔟 ≥ d^(−α/2)`.
    pub b_slack: Vec<Vec<f64>>,
    pub r_ll: Vec<Vec<f64>>,
    pub r_lj: Vec<Vec<f64>>,
    pub r_kk: Vec<Vec<f64>>,
    /// `[eve][user][slot]`
    pub r_kj: Vec<Vec<Vec<f64>>>,
    /// Expansion points of the last program.
    pub a_prev: Vec<Vec<f64>>,
    pub b_prev: Vec<Vec<f64>>,
    pub q_prev: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajResult {
    /// Metres.
    pub trajectory: Vec<Point>,
    pub slacks: TrajSlacks,
    pub sum_mos: f64,
    /// True sum MOS after each accepted iterate (index 0 is the start).
    pub inner_objective: Vec<f64>,
    pub statuses: Vec<SolveStatus>,
    /// Surrogate secrecy never exceeded the true secrecy margin.
    pub minorant_ok: bool,
    pub status: TrajStatus,
}

/// Unit-distance SNRs (distance in hectometres) for one slot.
#[derive(Clone, Debug)]
struct SlotGains {
    /// useful, `[user]`
    s: Vec<f64>,
    /// interference, `[user]`
    i: Vec<f64>,
    /// worst-case total at each eavesdropper
    e_all: Vec<f64>,
    /// worst-case excluding user `l`'s beam, `[eve][user]`
    e_other: Vec<Vec<f64>>,
}

fn slot_gains(real: &ChannelRealization, t: usize, bf: &Beamformers, sigma2: f64) -> SlotGains {
    let unit = HM.powf(-real.alpha) / sigma2;
    let lu = real.users.len();
    let mut s = vec![0.0; lu];
    let mut i = vec![0.0; lu];
    for l in 0..lu {
        let g = &real.users[l][t];
        for (j, w) in bf.w.iter().enumerate() {
            let p = unit * dot(g, w).norm_sqr();
            if j == l {
                s[l] = p;
            } else {
                i[l] += p;
            }
        }
    }
    let mut e_all = Vec::with_capacity(real.eves.len());
    let mut e_other = Vec::with_capacity(real.eves.len());
    for k in 0..real.eves_est.len() {
        let h = &real.eves_est[k][t];
        let ups = real.upsilon[k][t];
        let worst = |w: &[num_complex::Complex64]| unit * (dot(h, w).norm_sqr() + ups * norm_sq(w));
        let total: f64 = bf.all().map(|w| worst(w)).sum();
        e_all.push(total);
        e_other.push(bf.w.iter().map(|w| (total - worst(w)).max(0.0)).collect());
    }
    SlotGains { s, i, e_all, e_other }
}

fn dist2(q: Point, p: Point, z: f64) -> f64 {
    (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + z * z
}

fn to_hm(p: Point) -> Point {
    [p[0] / HM, p[1] / HM]
}

struct Ctx<'a> {
    gains: Vec<SlotGains>,
    users: Vec<Point>,
    eves: Vec<Point>,
    z: f64,
    alpha: f64,
    step: f64,
    q0: Point,
    qf: Point,
    lambda1: f64,
    eta: f64,
    real: &'a ChannelRealization,
}

/// Slack variables of one program, indexed like [`TrajSlacks`]. Scaled by
/// their expansion values.
struct Handles {
    q: Vec<[Var; 2]>,
    a: Vec<Vec<Option<Var>>>,
    b: Vec<Vec<Option<Var>>>,
    r_ll: Vec<Vec<Option<Var>>>,
    r_lj: Vec<Vec<Option<Var>>>,
    r_kk: Vec<Vec<Option<Var>>>,
    r_kj: Vec<Vec<Vec<Option<Var>>>>,
    t: Vec<Vec<Option<Var>>>,
}

/// Expansion values at a trajectory (hectometres).
struct Point0 {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

fn expansion(ctx: &Ctx, x: &[Point]) -> Point0 {
    let h = -ctx.alpha / 4.0;
    let a = ctx.users.iter().map(|&u| x.iter().map(|&q| dist2(q, u, ctx.z).powf(h)).collect()).collect();
    let b = ctx.eves.iter().map(|&e| x.iter().map(|&q| dist2(q, e, ctx.z).powf(h)).collect()).collect();
    Point0 { a, b }
}

fn build(ctx: &Ctx, x: &[Point], margin: &[Vec<f64>]) -> Result<(ConicProgram, Handles)> {
    let n_t = x.len();
    let lu = ctx.users.len();
    let ke = ctx.eves.len();
    let e0 = expansion(ctx, x);
    let mut prog = ConicProgram::new();
    let q: Vec<[Var; 2]> = (0..n_t).map(|_| [prog.add_var(), prog.add_var()]).collect();
    kinematics_block(&mut prog, &q, ctx.q0, ctx.qf, ctx.step * (1.0 - STEP_MARGIN));
    let one = AffExpr::constant(1.0);

    let mut h = Handles {
        q: q.clone(),
        a: vec![vec![None; n_t]; lu],
        b: vec![vec![None; n_t]; ke],
        r_ll: vec![vec![None; n_t]; lu],
        r_lj: vec![vec![None; n_t]; lu],
        r_kk: vec![vec![None; n_t]; ke],
        r_kj: vec![vec![vec![None; n_t]; lu]; ke],
        t: vec![vec![None; n_t]; lu],
    };
    let mut obj = AffExpr::zero();
    for t in 0..n_t {
        let g = &ctx.gains[t];
        let qe = [AffExpr::from(q[t][0]), AffExpr::from(q[t][1])];
        let active: Vec<bool> = (0..lu).map(|l| g.s[l] > GAIN_FLOOR && margin[t][l] > 1e-9).collect();
        if !active.iter().any(|&a| a) {
            continue;
        }
        // eavesdropper rate upper bounds, nats, per [eve][user]
        let mut eve_ub: Vec<Vec<Option<AffExpr>>> = vec![vec![None; lu]; ke];
        for k in 0..ke {
            if g.e_all[k] <= GAIN_FLOOR {
                continue;
            }
            let b_prev = e0.b[k][t];
            let b = prog.add_var();
            distance_gain_eve_block(&mut prog, &qe, x[t], ctx.eves[k], ctx.z, b.into(), b_prev, ctx.alpha);
            prog.less_eq(b.into(), AffExpr::constant(ctx.z.powf(-ctx.alpha / 2.0) / b_prev));
            let kk_prev = b_prev * b_prev * g.e_all[k];
            let r_kk = prog.add_var();
            prog.sum_squares_le(vec![b.into()], r_kk.into());
            h.b[k][t] = Some(b);
            h.r_kk[k][t] = Some(r_kk);
            let head = AffExpr::from(r_kk) * (kk_prev / (1.0 + kk_prev)) + (kk_prev.ln_1p() - kk_prev / (1.0 + kk_prev));
            for l in (0..lu).filter(|&l| active[l]) {
                let kj_prev = b_prev * b_prev * g.e_other[k][l];
                let tail = if g.e_other[k][l] > GAIN_FLOOR {
                    let r = prog.add_var();
                    prog.less_eq(r.into(), AffExpr::from(b) * 2.0 - 1.0);
                    let y = prog.add_var();
                    prog.exp_cone(y.into(), one.clone(), (AffExpr::from(r) * kj_prev + 1.0) * (1.0 / (1.0 + kj_prev)));
                    h.r_kj[k][l][t] = Some(r);
                    AffExpr::from(y) + kj_prev.ln_1p()
                } else {
                    AffExpr::zero()
                };
                eve_ub[k][l] = Some(head.clone() - tail);
            }
        }
        for l in (0..lu).filter(|&l| active[l]) {
            let a_prev = e0.a[l][t];
            let a = prog.add_var();
            distance_gain_user_block(&mut prog, &qe, ctx.users[l], ctx.z, a.into(), a_prev, ctx.alpha)?;
            let ll_prev = a_prev * a_prev * (g.s[l] + g.i[l]);
            let r_ll = prog.add_var();
            prog.less_eq(r_ll.into(), AffExpr::from(a) * 2.0 - 1.0);
            let y = prog.add_var();
            prog.exp_cone(y.into(), one.clone(), (AffExpr::from(r_ll) * ll_prev + 1.0) * (1.0 / (1.0 + ll_prev)));
            let mut rate = AffExpr::from(y) + ll_prev.ln_1p();
            if g.i[l] > GAIN_FLOOR {
                let lj_prev = a_prev * a_prev * g.i[l];
                let r_lj = prog.add_var();
                prog.sum_squares_le(vec![a.into()], r_lj.into());
                rate = rate - (AffExpr::from(r_lj) * (lj_prev / (1.0 + lj_prev)) + (lj_prev.ln_1p() - lj_prev / (1.0 + lj_prev)));
                h.r_lj[l][t] = Some(r_lj);
            }
            let pi = prog.add_var();
            prog.nonneg(pi.into());
            for row in &eve_ub {
                if let Some(ub) = &row[l] {
                    prog.less_eq(ub.clone() * (1.0 / LN_2), pi.into());
                }
            }
            let tv = prog.add_var();
            prog.less_eq(AffExpr::from(tv) + AffExpr::from(pi), rate * (1.0 / LN_2));
            prog.less_eq(AffExpr::constant(ctx.eta.min(margin[t][l])), tv.into());
            let u = prog.add_var();
            prog.exp_cone(u.into(), one.clone(), tv.into());
            obj.add_term(u, ctx.lambda1);
            h.a[l][t] = Some(a);
            h.r_ll[l][t] = Some(r_ll);
            h.t[l][t] = Some(tv);
        }
    }
    prog.maximize(obj);
    Ok((prog, h))
}

fn evaluate(
    ctx: &Ctx,
    geometry: &Geometry,
    traj_m: &[Point],
    bf: &[Beamformers],
    ra: &[RateAllocation],
    sigma2: f64,
    qoe: &QoEParams,
) -> Result<MetricsReport> {
    let geo = Geometry { trajectory: traj_m.to_vec(), ..geometry.clone() };
    evaluate_all(&ctx.real.slots(&geo), bf, ra, sigma2, qoe)
}

fn margins(m: &MetricsReport) -> Vec<Vec<f64>> {
    m.slots.iter().map(|s| s.margin.clone()).collect()
}

fn record_slacks(ctx: &Ctx, h: &Handles, x: &[f64], x_prev: &[Point]) -> TrajSlacks {
    let e0 = expansion(ctx, x_prev);
    let n_t = x_prev.len();
    let phys = HM.powf(-ctx.alpha / 2.0);
    let val = |v: &Option<Var>| v.map_or(0.0, |v| x[v.0]);
    let scaled = |m: &Vec<Vec<Option<Var>>>, pre: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        m.iter().zip(pre).map(|(r, p)| r.iter().zip(p).map(|(v, p)| val(v) * p * phys).collect()).collect()
    };
    let user_snr = |m: &Vec<Vec<Option<Var>>>, f: &dyn Fn(&SlotGains, usize) -> f64| -> Vec<Vec<f64>> {
        (0..ctx.users.len())
            .map(|l| (0..n_t).map(|t| val(&m[l][t]) * e0.a[l][t].powi(2) * f(&ctx.gains[t], l)).collect())
            .collect()
    };
    TrajSlacks {
        a_slack: scaled(&h.a, &e0.a),
        b_slack: scaled(&h.b, &e0.b),
        r_ll: user_snr(&h.r_ll, &|g, l| g.s[l] + g.i[l]),
        r_lj: user_snr(&h.r_lj, &|g, l| g.i[l]),
        r_kk: (0..ctx.eves.len())
            .map(|k| (0..n_t).map(|t| val(&h.r_kk[k][t]) * e0.b[k][t].powi(2) * ctx.gains[t].e_all[k]).collect())
            .collect(),
        r_kj: (0..ctx.eves.len())
            .map(|k| {
                (0..ctx.users.len())
                    .map(|l| {
                        (0..n_t)
                            .map(|t| val(&h.r_kj[k][l][t]) * e0.b[k][t].powi(2) * ctx.gains[t].e_other[k][l])
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        a_prev: e0.a.iter().map(|r| r.iter().map(|v| v * phys).collect()).collect(),
        b_prev: e0.b.iter().map(|r| r.iter().map(|v| v * phys).collect()).collect(),
        q_prev: x_prev.iter().map(|p| [p[0] * HM, p[1] * HM]).collect(),
    }
}

/// Inner SCA loop on the trajectory with beamformers and rate split fixed.
#[allow(clippy::too_many_arguments)]
pub fn solve_traj(
    real: &ChannelRealization,
    geometry: &Geometry,
    bf: &[Beamformers],
    ra: &[RateAllocation],
    net: &NetworkConfig,
    sigma2: f64,
    qoe: &QoEParams,
    opts: &TrajOptions,
) -> Result<TrajResult> {
    let n_t = geometry.trajectory.len();
    if bf.len() != n_t || ra.len() != n_t || real.t_slots() != n_t {
        return Err(Error::Shape(format!(
            "trajectory has {n_t} slots, beamformers {}, rate splits {}, channels {}",
            bf.len(),
            ra.len(),
            real.t_slots()
        )));
    }
    let d_max = net.d_max();
    let (viol, name) = kinematic_violation(&geometry.trajectory, net.q0, net.qf, d_max);
    if viol > 1e-9 * d_max.max(1.0) {
        return Err(Error::Init(format!("initial trajectory violates {name} by {viol:.3e} m")));
    }
    if real.alpha <= 2.0 {
        return Err(Error::Domain(format!("path-loss exponent must exceed 2 (got {})", real.alpha)));
    }
    let ctx = Ctx {
        gains: (0..n_t).map(|t| slot_gains(real, t, &bf[t], sigma2)).collect(),
        users: geometry.users.iter().map(|&p| to_hm(p)).collect(),
        eves: geometry.eves.iter().map(|&p| to_hm(p)).collect(),
        z: geometry.z_u / HM,
        alpha: real.alpha,
        step: d_max / HM,
        q0: to_hm(net.q0),
        qf: to_hm(net.qf),
        lambda1: qoe.lambda1,
        eta: if net.eta > 0.0 { net.eta } else { crate::bf::ETA_FLOOR },
        real,
    };

    let mut traj = geometry.trajectory.clone();
    let mut report = evaluate(&ctx, geometry, &traj, bf, ra, sigma2, qoe)?;
    let mut inner_objective = vec![report.sum_mos];
    let mut statuses = Vec::new();
    let mut minorant_ok = true;
    let mut slacks = TrajSlacks::default();
    let mut status = TrajStatus::IterationCap;

    for _ in 0..net.max_inner_iters {
        let x: Vec<Point> = traj.iter().map(|&p| to_hm(p)).collect();
        let m = margins(&report);
        if !m.iter().flatten().any(|&v| v > 1e-9) {
            status = TrajStatus::Inactive;
            break;
        }
        let (prog, h) = build(&ctx, &x, &m)?;
        let sol = solve(&prog, &opts.solver)?;
        statuses.push(sol.status);
        let usable = matches!(
            sol.status,
            SolveStatus::Optimal | SolveStatus::NumericalFailure | SolveStatus::IterationLimit
        ) && sol.x.iter().all(|v| v.is_finite());
        if !usable {
            status = TrajStatus::Stalled;
            break;
        }
        let mut cand: Vec<Point> = h.q.iter().map(|v| [sol.x[v[0].0] * HM, sol.x[v[1].0] * HM]).collect();
        cand[0] = net.q0;
        if kinematic_violation(&cand, net.q0, net.qf, d_max).0 > 0.0 {
            status = TrajStatus::Stalled;
            break;
        }
        let next = evaluate(&ctx, geometry, &cand, bf, ra, sigma2, qoe)?;
        for (l, row) in h.t.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    minorant_ok &= sol.x[v.0] <= next.slots[t].margin[l] + 1e-6;
                }
            }
        }
        if next.sum_mos < report.sum_mos - 1e-6 {
            status = TrajStatus::Stalled;
            break;
        }
        let gain = next.sum_mos - report.sum_mos;
        slacks = record_slacks(&ctx, &h, &sol.x, &x);
        traj = cand;
        report = next;
        inner_objective.push(report.sum_mos);
        if gain < net.inner_tol {
            status = TrajStatus::Converged;
            break;
        }
    }
    Ok(TrajResult {
        trajectory: traj,
        slacks,
        sum_mos: report.sum_mos,
        inner_objective,
        statuses,
        minorant_ok,
        status,
    })
}

/// CSV rows `iteration,slot,x,y,z` for one or more trajectories.
pub fn write_trajectory_csv<W: Write>(out: W, iterations: &[(usize, &[Point])], z_u: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "slot", "x", "y", "z"]).map_err(csv_err)?;
    for (it, traj) in iterations {
        for (t, p) in traj.iter().enumerate() {
            w.write_record([it.to_string(), t.to_string(), p[0].to_string(), p[1].to_string(), z_u.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
