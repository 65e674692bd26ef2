//! Per-slot beamforming and common-rate design for a fixed trajectory.
//!
//! Each slot is an independent successive-convex-approximation loop. Beams are
//! normalized, `p = w/√P_max`, and channels scaled by `√(P_max/σ²)` so the noise
//! power is one. Around the current point `p^τ` the program keeps every
//! quantity that must be *large* (useful power, eavesdropper interference)
//! through its tangent minorant and every quantity that must be *small*
//! (interference at users, total power at eavesdroppers) exactly, with the
//! logarithm capped from above by the exponential's tangent. Every feasible
//! point therefore satisfies the original constraints, and the surrogate is
//! tight at `p^τ`, so the true objective never decreases.

pub mod blocks;

use rayon::prelude::*;
use rsma_conic::{solve, AffExpr, ConicProgram, SolveStatus, SolverSettings, Var};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::channel::SlotChannels;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq, scale, sub, CVec};
use crate::model::{NetworkConfig, QoEParams};
use crate::rates::{self, Beamformers, RateAllocation};
use crate::traj::blocks::quadratic_lower;
pub use blocks::{
    exp_taylor_upper, rank_one_linearize, secrecy_lambda_upsilon, soc_secrecy_block, soc_secrecy_rows, CVar,
    GramFactor,
};

/// Secrecy margin requested beyond `η` while restoring feasibility.
const PHASE1_EXTRA: f64 = 1e-3;
/// Threshold used when `η = 0` is requested.
pub const ETA_FLOOR: f64 = 1e-3;

/// How `ln(t_l)` enters the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BfEncoding {
    /// `u_l ≤ ln t_l` as one exponential cone per user.
    #[default]
    ExpCone,
    /// `𝔮_l² ≤ t_l` and `u_l ≤ ln(2𝔮_l^τ𝔮_l − (𝔮_l^τ)²)`.
    Quadratic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfOptions {
    pub encoding: BfEncoding,
    pub solver: SolverSettings,
}

impl Default for BfOptions {
    fn default() -> Self {
        Self { encoding: BfEncoding::ExpCone, solver: SolverSettings::with_tol(1e-6) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BfStatus {
    /// Inner objective improved by less than the tolerance.
    Converged,
    IterationCap,
    /// The solver returned a point that did not improve the true objective.
    Stalled,
    /// `P_max = 0`: nothing to design.
    ZeroBudget,
    /// Secrecy threshold could not be reached for every user.
    SecrecyInfeasible,
}

/// Epigraph values and diagnostics at the returned point of one slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfAuxiliaries {
    pub beta: f64,
    /// `ln` of useful-plus-interference power per user.
    pub c1: Vec<f64>,
    /// `ln` of interference power per user.
    pub c2: Vec<f64>,
    /// `ln` of total worst-case power per eavesdropper.
    pub c3: Vec<f64>,
    /// `ln` of worst-case interference per `[eve][user]`.
    pub c4: Vec<Vec<f64>>,
    /// Worst eavesdropper rate per user.
    pub pi: Vec<f64>,
    /// `𝔮_l = √t_l`.
    pub q_aux: Vec<f64>,
    /// `Σ λ₁ ln R_sec` after each accepted inner iterate (index 0 is the start).
    pub inner_objective: Vec<f64>,
    pub statuses: Vec<SolveStatus>,
    pub phase1_iters: usize,
    /// `‖W − wwᴴ‖_F` of the rank-one linearization at the last step, common beam first.
    pub rank_one_defect: Vec<f64>,
    /// `‖W‖_F` of the same linearization.
    pub rank_one_norm: Vec<f64>,
    /// All exponential tangent caps hold at the returned point.
    pub taylor_ok: bool,
    pub status: BfStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfSlotResult {
    pub bf: Beamformers,
    pub ra: RateAllocation,
    pub aux: BfAuxiliaries,
}

/// Matched filters: `w₀` toward the strongest user, `w_l` toward user `l`,
/// total power `0.9·P_max` split evenly.
pub fn initial_beamformers(ch: &SlotChannels, antennas: usize, p_max: f64) -> Beamformers {
    let users = ch.users.len();
    let per = (0.9 * p_max / (users + 1) as f64).sqrt();
    let mf = |h: &CVec| -> CVec {
        let n = norm(h);
        if n > 0.0 {
            scale(h, per / n)
        } else {
            let mut v = crate::linalg::zeros(antennas);
            v[0].re = per;
            v
        }
    };
    let strongest = (0..users)
        .max_by(|&a, &b| norm_sq(&ch.users[a]).total_cmp(&norm_sq(&ch.users[b])))
        .unwrap_or(0);
    Beamformers { w0: mf(&ch.users[strongest]), w: ch.users.iter().map(mf).collect() }
}

/// Scaled instance of one slot.
struct Slot<'a> {
    users: Vec<GramFactor>,
    eves: Vec<GramFactor>,
    /// Raw user channels, for matched-filter repairs.
    h: &'a [CVec],
    lambda1: f64,
    eta: f64,
}

/// True quantities at a normalized point.
#[derive(Clone, Debug)]
struct Eval {
    eve: Vec<Vec<f64>>,
    margin: Vec<f64>,
}

impl Eval {
    fn objective(&self, lambda1: f64) -> f64 {
        self.margin
            .iter()
            .map(|&m| if m > 0.0 { lambda1 * m.ln() } else { f64::NEG_INFINITY })
            .sum()
    }

    fn phase1(&self, target: f64) -> f64 {
        self.margin.iter().map(|&m| (m - target).min(0.0)).sum()
    }

    fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Slot<'_> {
    fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Useful power `S` and interference `I` (without noise) at user `l`.
    fn user_powers(&self, l: usize, p: &[CVec]) -> (f64, f64) {
        let g = &self.users[l];
        let s = g.quad(&p[l + 1]);
        let i = (1..p.len()).filter(|&j| j != l + 1).map(|j| g.quad(&p[j])).sum();
        (s, i)
    }

    /// Total and excluding-`l` worst-case power at eavesdropper `k`.
    fn eve_powers(&self, k: usize, l: usize, p: &[CVec]) -> (f64, f64) {
        let g = &self.eves[k];
        let total: f64 = p.iter().map(|x| g.quad(x)).sum();
        let leak = g.quad(&p[l + 1]);
        (total, total - leak)
    }

    fn eval(&self, p: &[CVec]) -> Eval {
        let lu = self.n_users();
        let rate: Vec<f64> = (0..lu)
            .map(|l| {
                let (s, i) = self.user_powers(l, p);
                ((1.0 + s + i) / (1.0 + i)).log2()
            })
            .collect();
        let eve: Vec<Vec<f64>> = (0..self.eves.len())
            .map(|k| {
                (0..lu)
                    .map(|l| {
                        let (a, b) = self.eve_powers(k, l, p);
                        ((1.0 + a) / (1.0 + b)).log2()
                    })
                    .collect()
            })
            .collect();
        let margin = (0..lu)
            .map(|l| rate[l] - eve.iter().map(|r| r[l]).fold(0.0, f64::max))
            .collect();
        Eval { eve, margin }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// Drive every secrecy margin above `η`.
    Restore,
    /// Maximize `Σ λ₁ ln t_l` subject to `t_l ≥ η`.
    Improve,
}

/// Offset variable `c = c^τ + δ` with `c^τ = ln F`.
#[derive(Clone, Copy, Debug)]
struct LogVar {
    delta: Var,
    ln_f: f64,
}

impl LogVar {
    fn value(&self, x: &[f64]) -> f64 {
        self.ln_f + x[self.delta.0]
    }
}

struct Handles {
    beams: Vec<CVar>,
    c1: Vec<LogVar>,
    c2: Vec<LogVar>,
    c3: Vec<LogVar>,
    c4: Vec<Vec<LogVar>>,
    pi: Vec<Var>,
    t: Vec<Var>,
}

/// `e^{c} ≤ 1 + lin`: tangent minorant on the right, scaled by `F = 1 + lin(p^τ)`.
fn exp_below(prog: &mut ConicProgram, lin_plus_one: AffExpr, f: f64) -> LogVar {
    let d = prog.add_var();
    prog.exp_cone(d.into(), AffExpr::constant(1.0), lin_plus_one * (1.0 / f));
    LogVar { delta: d, ln_f: f.ln() }
}

/// `1 + quad ≤ e^{c^τ}(c − c^τ + 1)` with the quadratic given by its square-root terms,
/// scaled by `F = 1 + quad(p^τ)`.
fn exp_above(prog: &mut ConicProgram, terms: Vec<AffExpr>, f: f64) -> LogVar {
    let d = prog.add_var();
    let cap = exp_taylor_upper(AffExpr::from(d) + f.ln(), f.ln()) * (1.0 / f);
    let s = 1.0 / f.sqrt();
    prog.sum_squares_le(terms.into_iter().map(|t| t * s).collect(), cap - 1.0 / f);
    LogVar { delta: d, ln_f: f.ln() }
}

/// Enforces `Σ_l a_l ≤ min_l log₂(1 + |a_lᴴp₀|²/(1 + Σ_{j≥1}|a_lᴴp_j|²))` through
/// per-user pairs `e^{c₅} ≤ total power` (tangent minorant) and
/// `1 + Σ_{j≥1}|a_lᴴp_j|² ≤` tangent cap of `e^{c₆}`.
pub fn common_rate_block(
    prog: &mut ConicProgram,
    a: &[Var],
    beams: &[CVar],
    users: &[GramFactor],
    p_prev: &[CVec],
) -> Vec<(Var, Var)> {
    let mut out = Vec::with_capacity(users.len());
    let sum_a = a.iter().fold(AffExpr::zero(), |acc, &v| acc + AffExpr::from(v));
    for &v in a {
        prog.nonneg(v.into());
    }
    for g in users {
        let mut lin = AffExpr::constant(1.0);
        let mut f5 = 1.0;
        for (j, b) in beams.iter().enumerate() {
            lin += g.linearize(b, &p_prev[j]);
            f5 += g.quad(&p_prev[j]);
        }
        let c5 = exp_below(prog, lin, f5);
        let f6 = 1.0 + (1..beams.len()).map(|j| g.quad(&p_prev[j])).sum::<f64>();
        let terms = (1..beams.len()).flat_map(|j| g.terms(&beams[j], 1.0)).collect();
        let c6 = exp_above(prog, terms, f6);
        let rate = (AffExpr::from(c5.delta) - AffExpr::from(c6.delta) + (c5.ln_f - c6.ln_f)) * (1.0 / LN_2);
        prog.less_eq(sum_a.clone(), rate);
        out.push((c5.delta, c6.delta));
    }
    out
}

/// Secrecy epigraph for every user: `t_l ≤ (c₁ − c₂)/ln2 − π_l` and
/// `π_l ≥ (c₃ₖ − c₄ₖₗ)/ln2` for every eavesdropper, with the exponential links
/// on the powers.
fn secrecy_epigraph(prog: &mut ConicProgram, slot: &Slot, beams: &[CVar], p_prev: &[CVec]) -> Handles {
    let lu = slot.n_users();
    let nb = beams.len();
    let mut c1 = Vec::with_capacity(lu);
    let mut c2 = Vec::with_capacity(lu);
    for (l, g) in slot.users.iter().enumerate() {
        let mut lin = AffExpr::constant(1.0);
        for j in 1..nb {
            lin += g.linearize(&beams[j], &p_prev[j]);
        }
        let (s, i) = slot.user_powers(l, p_prev);
        c1.push(exp_below(prog, lin, 1.0 + s + i));
        let terms = (1..nb).filter(|&j| j != l + 1).flat_map(|j| g.terms(&beams[j], 1.0)).collect();
        c2.push(exp_above(prog, terms, 1.0 + i));
    }
    let mut c3 = Vec::with_capacity(slot.eves.len());
    let mut c4 = Vec::with_capacity(slot.eves.len());
    for g in &slot.eves {
        let total: f64 = p_prev.iter().map(|x| g.quad(x)).sum();
        let terms = beams.iter().flat_map(|b| g.terms(b, 1.0)).collect();
        c3.push(exp_above(prog, terms, 1.0 + total));
        let row: Vec<LogVar> = (0..lu)
            .map(|l| {
                let mut lin = AffExpr::constant(1.0);
                let mut f = 1.0;
                for j in (0..nb).filter(|&j| j != l + 1) {
                    lin += g.linearize(&beams[j], &p_prev[j]);
                    f += g.quad(&p_prev[j]);
                }
                exp_below(prog, lin, f)
            })
            .collect();
        c4.push(row);
    }
    let pi = prog.add_vars(lu);
    let t = prog.add_vars(lu);
    for l in 0..lu {
        for k in 0..slot.eves.len() {
            let leak = (AffExpr::from(c3[k].delta) - AffExpr::from(c4[k][l].delta) + (c3[k].ln_f - c4[k][l].ln_f))
                * (1.0 / LN_2);
            prog.less_eq(leak, pi[l].into());
        }
        if slot.eves.is_empty() {
            prog.equal_zero(pi[l].into());
        }
        let rate =
            (AffExpr::from(c1[l].delta) - AffExpr::from(c2[l].delta) + (c1[l].ln_f - c2[l].ln_f)) * (1.0 / LN_2);
        prog.less_eq(AffExpr::from(t[l]) + AffExpr::from(pi[l]), rate);
    }
    Handles { beams: beams.to_vec(), c1, c2, c3, c4, pi, t }
}

fn prog_objective_improve(
    prog: &mut ConicProgram,
    t: &[Var],
    slot: &Slot,
    q_prev: &[f64],
    encoding: BfEncoding,
    obj: &mut AffExpr,
) {
    for &v in t {
        prog.less_eq(AffExpr::constant(slot.eta), v.into());
    }
    *obj += objective_epigraph_block(prog, t, slot.lambda1, encoding, q_prev);
}

/// `Σ λ₁ u_l` with `u_l ≤ ln t_l`, either directly as `(u_l, 1, t_l) ∈ K_exp`
/// or through `𝔮_l² ≤ t_l` and `u_l ≤ ln(2𝔮_l^τ𝔮_l − (𝔮_l^τ)²)`.
pub fn objective_epigraph_block(
    prog: &mut ConicProgram,
    t: &[Var],
    lambda1: f64,
    encoding: BfEncoding,
    q_prev: &[f64],
) -> AffExpr {
    let mut obj = AffExpr::zero();
    for (l, &tv) in t.iter().enumerate() {
        let u = prog.add_var();
        match encoding {
            BfEncoding::ExpCone => prog.exp_cone(u.into(), AffExpr::constant(1.0), tv.into()),
            BfEncoding::Quadratic => {
                let q = prog.add_var();
                prog.sum_squares_le(vec![q.into()], tv.into());
                prog.exp_cone(u.into(), AffExpr::constant(1.0), quadratic_lower(q.into(), q_prev[l]));
            }
        }
        obj.add_term(u, lambda1);
    }
    obj
}

fn build(slot: &Slot, p_prev: &[CVec], margins: &[f64], phase: Phase, encoding: BfEncoding) -> (ConicProgram, Handles) {
    let mut prog = ConicProgram::new();
    let n = p_prev[0].len();
    let beams: Vec<CVar> = (0..p_prev.len()).map(|_| CVar::new(&mut prog, n)).collect();
    prog.soc(AffExpr::constant(1.0), beams.iter().flat_map(CVar::components).collect());
    let h = secrecy_epigraph(&mut prog, slot, &beams, p_prev);
    let a = prog.add_vars(slot.n_users());
    common_rate_block(&mut prog, &a, &beams, &slot.users, p_prev);

    let mut obj = AffExpr::zero();
    match phase {
        Phase::Improve => {
            let q_prev: Vec<f64> = margins.iter().map(|m| m.max(slot.eta).sqrt()).collect();
            prog_objective_improve(&mut prog, &h.t, slot, &q_prev, encoding, &mut obj);
        }
        Phase::Restore => {
            for &t in &h.t {
                let s = prog.add_var();
                prog.less_eq(s.into(), AffExpr::zero());
                prog.less_eq(s.into(), AffExpr::from(t) - (slot.eta + PHASE1_EXTRA));
                obj.add_term(s, 1.0);
            }
        }
    }
    prog.maximize(obj);
    (prog, h)
}

/// Replaces vanishing beams by small matched filters so the tangent
/// expansion at them is not identically zero.
fn repair(p: &mut [CVec], h: &[CVec]) {
    let users = h.len();
    let small = (1e-2 * 0.9 / (users + 1) as f64).sqrt();
    for j in 0..p.len() {
        if norm_sq(&p[j]) < 1e-16 {
            let target = if j == 0 { (0..users).max_by(|&a, &b| norm_sq(&h[a]).total_cmp(&norm_sq(&h[b]))).unwrap_or(0) } else { j - 1 };
            let hn = norm(&h[target]);
            if hn > 0.0 {
                p[j] = scale(&h[target], small / hn);
            } else {
                p[j][0].re = small;
            }
        }
    }
    let total: f64 = p.iter().map(|x| norm_sq(x)).sum();
    if total > 1.0 {
        let s = 1.0 / total.sqrt();
        for x in p.iter_mut() {
            *x = scale(x, s);
        }
    }
}

fn project_power(p: &mut [CVec]) {
    let total: f64 = p.iter().map(|x| norm_sq(x)).sum();
    if total > 1.0 {
        let s = 1.0 / total.sqrt();
        for x in p.iter_mut() {
            *x = scale(x, s);
        }
    }
}

fn effective_eta(eta: f64) -> f64 {
    if eta > 0.0 {
        eta
    } else {
        ETA_FLOOR
    }
}

/// Solves one slot starting from `init`.
pub fn solve_bf_slot(
    ch: &SlotChannels,
    init: &Beamformers,
    net: &NetworkConfig,
    sigma2: f64,
    qoe: &QoEParams,
    opts: &BfOptions,
) -> Result<BfSlotResult> {
    let lu = ch.users.len();
    let n = init.antennas();
    let eta = effective_eta(net.eta);
    let beta = 2f64.powf(eta);
    if !(net.p_max > 0.0) {
        let bf = Beamformers::zeros(n, lu);
        return Ok(BfSlotResult {
            bf,
            ra: RateAllocation::zeros(lu),
            aux: BfAuxiliaries {
                beta,
                c1: vec![0.0; lu],
                c2: vec![0.0; lu],
                c3: vec![0.0; ch.eves.len()],
                c4: vec![vec![0.0; lu]; ch.eves.len()],
                pi: vec![0.0; lu],
                q_aux: vec![0.0; lu],
                inner_objective: vec![],
                statuses: vec![],
                phase1_iters: 0,
                rank_one_defect: vec![0.0; lu + 1],
                rank_one_norm: vec![0.0; lu + 1],
                taylor_ok: true,
                status: BfStatus::ZeroBudget,
            },
        });
    }
    let snr = net.p_max / sigma2;
    let rs = snr.sqrt();
    let slot = Slot {
        users: ch.users.iter().map(|h| GramFactor::rank_one(scale(h, rs))).collect(),
        eves: ch.eves.iter().map(|e| GramFactor::with_identity(scale(&e.h_tilde, rs), snr * e.upsilon)).collect(),
        h: &ch.users,
        lambda1: qoe.lambda1,
        eta,
    };
    let ps = 1.0 / net.p_max.sqrt();
    let mut p: Vec<CVec> = init.all().map(|w| scale(w, ps)).collect();
    repair(&mut p, slot.h);
    project_power(&mut p);

    let mut cur = slot.eval(&p);
    let mut phase = if cur.min_margin() >= eta { Phase::Improve } else { Phase::Restore };
    let mut objective = cur.objective(slot.lambda1);
    let mut inner_objective = vec![objective];
    let mut statuses = Vec::new();
    let mut phase1_iters = 0;
    let mut last_step: Option<Vec<CVec>> = None;
    let mut last_handles: Option<(Handles, Vec<f64>)> = None;
    let mut status = BfStatus::IterationCap;

    for it in 0..net.max_inner_iters {
        let (prog, h) = build(&slot, &p, &cur.margin, phase, opts.encoding);
        let sol = solve(&prog, &opts.solver)?;
        statuses.push(sol.status);
        let usable = matches!(
            sol.status,
            SolveStatus::Optimal | SolveStatus::NumericalFailure | SolveStatus::IterationLimit
        ) && sol.x.iter().all(|v| v.is_finite());
        if !usable {
            if it == 0 && sol.status == SolveStatus::Infeasible {
                return Err(Error::Init(format!(
                    "beamforming program infeasible at its expansion point (min secrecy margin {:.4e})",
                    cur.min_margin()
                )));
            }
            status = BfStatus::Stalled;
            break;
        }
        let mut cand: Vec<CVec> = h.beams.iter().map(|b| b.value(&sol.x)).collect();
        project_power(&mut cand);
        let next = slot.eval(&cand);
        match phase {
            Phase::Restore => {
                phase1_iters += 1;
                let target = eta + PHASE1_EXTRA;
                let gain = next.phase1(target) - cur.phase1(target);
                if gain < -1e-9 {
                    status = BfStatus::SecrecyInfeasible;
                    break;
                }
                last_step = Some(p.iter().zip(&cand).map(|(a, b)| sub(b, a)).collect());
                p = cand;
                cur = next;
                last_handles = Some((h, sol.x));
                if cur.min_margin() >= eta {
                    phase = Phase::Improve;
                    objective = cur.objective(slot.lambda1);
                    inner_objective.push(objective);
                } else if gain < net.inner_tol * 1e-2 {
                    status = BfStatus::SecrecyInfeasible;
                    break;
                }
            }
            Phase::Improve => {
                let value = next.objective(slot.lambda1);
                if value < objective - 1e-7 || next.min_margin() < eta - 1e-7 {
                    status = BfStatus::Stalled;
                    break;
                }
                last_step = Some(p.iter().zip(&cand).map(|(a, b)| sub(b, a)).collect());
                p = cand;
                cur = next;
                last_handles = Some((h, sol.x));
                let gain = value - objective;
                objective = value;
                inner_objective.push(objective);
                if gain < net.inner_tol {
                    status = BfStatus::Converged;
                    break;
                }
            }
        }
    }
    if phase == Phase::Restore && status != BfStatus::SecrecyInfeasible {
        status = BfStatus::SecrecyInfeasible;
    }

    let rs_w = net.p_max.sqrt();
    let w: Vec<CVec> = p.iter().map(|x| scale(x, rs_w)).collect();
    let bf = Beamformers { w0: w[0].clone(), w: w[1..].to_vec() };
    let r0 = rates::common_rate(&ch.users, &bf, sigma2).max(0.0);
    let ra = RateAllocation { a: vec![r0 / lu as f64; lu] };

    let (defect, wnorm): (Vec<f64>, Vec<f64>) = match &last_step {
        Some(step) => w
            .iter()
            .zip(step)
            .map(|(wj, dj)| {
                let dw = scale(dj, rs_w);
                let prev = sub(wj, &dw);
                let lin = rank_one_linearize(&prev, wj);
                (lin.sub(&crate::linalg::CMat::outer(wj, wj)).frobenius(), lin.frobenius())
            })
            .unzip(),
        None => (vec![0.0; w.len()], w.iter().map(|x| norm_sq(x)).collect()),
    };

    let eval_c = |lv: &LogVar, x: &[f64]| lv.value(x);
    let mut taylor_ok = true;
    let (c1, c2, c3, c4, pi) = match &last_handles {
        Some((h, x)) => {
            for (l, lv) in h.c2.iter().enumerate() {
                let (_, i) = slot.user_powers(l, &p);
                let c = eval_c(lv, x);
                let cap = exp_taylor_upper(AffExpr::constant(c), lv.ln_f).eval(&[]);
                taylor_ok &= 1.0 + i <= cap * (1.0 + 1e-6) + 1e-9 && cap <= c.exp() * (1.0 + 1e-12);
            }
            for (k, lv) in h.c3.iter().enumerate() {
                let (a, _) = slot.eve_powers(k, 0, &p);
                let c = eval_c(lv, x);
                let cap = exp_taylor_upper(AffExpr::constant(c), lv.ln_f).eval(&[]);
                taylor_ok &= 1.0 + a <= cap * (1.0 + 1e-6) + 1e-9 && cap <= c.exp() * (1.0 + 1e-12);
            }
            (
                h.c1.iter().map(|v| eval_c(v, x)).collect(),
                h.c2.iter().map(|v| eval_c(v, x)).collect(),
                h.c3.iter().map(|v| eval_c(v, x)).collect(),
                h.c4.iter().map(|r| r.iter().map(|v| eval_c(v, x)).collect()).collect(),
                h.pi.iter().map(|v| x[v.0]).collect(),
            )
        }
        None => {
            let c1 = (0..lu).map(|l| { let (s, i) = slot.user_powers(l, &p); (1.0 + s + i).ln() }).collect();
            let c2 = (0..lu).map(|l| (1.0 + slot.user_powers(l, &p).1).ln()).collect();
            let c3 = (0..ch.eves.len()).map(|k| (1.0 + slot.eve_powers(k, 0, &p).0).ln()).collect();
            let c4 = (0..ch.eves.len())
                .map(|k| (0..lu).map(|l| (1.0 + slot.eve_powers(k, l, &p).1).ln()).collect())
                .collect();
            let pi = (0..lu).map(|l| cur.eve.iter().map(|r| r[l]).fold(0.0, f64::max)).collect();
            (c1, c2, c3, c4, pi)
        }
    };
    let q_aux = cur.margin.iter().map(|m| m.max(0.0).sqrt()).collect();
    Ok(BfSlotResult {
        bf,
        ra,
        aux: BfAuxiliaries {
            beta,
            c1,
            c2,
            c3,
            c4,
            pi,
            q_aux,
            inner_objective,
            statuses,
            phase1_iters,
            rank_one_defect: defect,
            rank_one_norm: wnorm,
            taylor_ok,
            status,
        },
    })
}

/// Solves every slot independently (in parallel).
pub fn solve_bf(
    channels: &[SlotChannels],
    init: &[Beamformers],
    net: &NetworkConfig,
    sigma2: f64,
    qoe: &QoEParams,
    opts: &BfOptions,
) -> Result<Vec<BfSlotResult>> {
    if channels.len() != init.len() {
        return Err(Error::Shape(format!("{} slots of channels, {} of beamformers", channels.len(), init.len())));
    }
    channels
        .par_iter()
        .zip(init.par_iter())
        .map(|(c, b)| solve_bf_slot(c, b, net, sigma2, qoe, opts))
        .collect()
}

/// `|hᴴw|²` shortcut used by tests and diagnostics.
pub fn received_power(h: &[num_complex::Complex64], w: &[num_complex::Complex64]) -> f64 {
    dot(h, w).norm_sqr()
}
