//! Alternating optimization: beamforming for the current path, then the path
//! for the new beams, until the sum MOS settles.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use crate::bf::{initial_beamformers, solve_bf, BfAuxiliaries, BfOptions, BfStatus};
use crate::channel::{sample_channel, ChannelRealization, SlotChannels};
use crate::error::{Error, Result};
use crate::model::{initial_geometry, Geometry, Scenario};
use crate::rates::{common_rate, evaluate_all, Beamformers, MetricsReport, RateAllocation};
use crate::traj::{kinematic_violation, solve_traj, TrajOptions, TrajSlacks, TrajStatus};
use rsma_conic::SolveStatus;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AoOptions {
    pub bf: BfOptions,
    pub traj: TrajOptions,
}

/// Solver statuses of one block and how often each occurred.
pub type StatusCounts = Vec<(SolveStatus, usize)>;

fn count(statuses: impl IntoIterator<Item = SolveStatus>) -> StatusCounts {
    let mut out: StatusCounts = Vec::new();
    for s in statuses {
        match out.iter_mut().find(|(k, _)| *k == s) {
            Some((_, n)) => *n += 1,
            None => out.push((s, 1)),
        }
    }
    out.sort_by_key(|(k, _)| k.as_str());
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub outer_iter: usize,
    pub sum_mos: f64,
    /// Inner iterations summed over slots.
    pub bf_inner_iters: usize,
    pub traj_inner_iters: usize,
    pub bf_statuses: StatusCounts,
    pub traj_statuses: StatusCounts,
    pub secrecy_infeasible_slots: usize,
    pub traj_status: TrajStatus,
    /// Blocks whose candidate was discarded by the safeguard.
    pub rejected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionState {
    pub version: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub geometry: Geometry,
    pub bf: Vec<Beamformers>,
    pub ra: Vec<RateAllocation>,
    pub aux: Vec<BfAuxiliaries>,
    pub slacks: TrajSlacks,
    pub initial_sum_mos: f64,
    pub history: Vec<HistoryEntry>,
    /// Wall time per history entry (ms); kept apart so the history itself is reproducible.
    pub wall_ms: Vec<u64>,
    pub converged: bool,
}

impl SolutionState {
    pub fn sum_mos(&self) -> f64 {
        self.history.last().map_or(self.initial_sum_mos, |h| h.sum_mos)
    }

    pub fn outer_iters(&self) -> usize {
        self.history.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let state: SolutionState = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if state.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                state.version
            )));
        }
        Ok(state)
    }
}

/// Constraint residuals of a state, all `≤ 0` (or `≥ 0` where noted) when feasible.
#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility {
    /// `max_t (‖w‖² − P_max)`
    pub power_excess: f64,
    pub kinematic_excess: f64,
    pub kinematic_constraint: String,
    /// `min a_l` (≥ 0)
    pub min_split: f64,
    /// `max_t (Σ a_l − R₀)`
    pub common_rate_excess: f64,
    /// `min (R_l − max_k R_kl) − η` with worst-case eavesdropper Grams (≥ 0)
    pub secrecy_slack: f64,
}

pub fn feasibility(state: &SolutionState, slots: &[SlotChannels], report: &MetricsReport) -> Feasibility {
    let net = &state.scenario.net;
    let sigma2 = state.scenario.channel.noise_power;
    let power_excess = state.bf.iter().map(|b| b.total_power() - net.p_max).fold(f64::NEG_INFINITY, f64::max);
    let (kinematic_excess, kinematic_constraint) = kinematic_violation(&state.geometry.trajectory, net.q0, net.qf, net.d_max());
    let min_split = state.ra.iter().flat_map(|r| r.a.iter().copied()).fold(f64::INFINITY, f64::min);
    let common_rate_excess = slots
        .iter()
        .zip(state.bf.iter().zip(&state.ra))
        .map(|(c, (b, r))| r.a.iter().sum::<f64>() - common_rate(&c.users, b, sigma2))
        .fold(f64::NEG_INFINITY, f64::max);
    Feasibility {
        power_excess,
        kinematic_excess,
        kinematic_constraint,
        min_split,
        common_rate_excess,
        secrecy_slack: report.min_margin() - net.eta,
    }
}

/// Amount by which the secrecy threshold or the power budget is missed.
fn violation(report: &MetricsReport, bf: &[Beamformers], eta: f64, p_max: f64) -> f64 {
    let secrecy = (eta - report.min_margin()).max(0.0);
    let power = bf.iter().map(|b| (b.total_power() - p_max).max(0.0)).fold(0.0, f64::max);
    secrecy + power
}

/// Lexicographic: smaller violation first, then larger sum MOS.
fn no_worse(cand: (f64, f64), inc: (f64, f64)) -> bool {
    const VTOL: f64 = 1e-9;
    if cand.0 < inc.0 - VTOL {
        return true;
    }
    cand.0 <= inc.0 + VTOL && cand.1 >= inc.1 - 1e-12
}

fn split_for(slots: &[SlotChannels], bf: &[Beamformers], sigma2: f64) -> Vec<RateAllocation> {
    slots
        .iter()
        .zip(bf)
        .map(|(c, b)| {
            let r0 = common_rate(&c.users, b, sigma2).max(0.0);
            let l = c.users.len();
            RateAllocation { a: vec![r0 / l as f64; l] }
        })
        .collect()
}

/// Regenerates the channel realization a state was computed with.
pub fn channels_for(scenario: &Scenario, seed: u64) -> Result<(Geometry, ChannelRealization)> {
    let geometry = initial_geometry(scenario, seed);
    let real = sample_channel(&scenario.channel, &geometry, scenario.net.antennas, seed)?;
    Ok((geometry, real))
}

/// Straight-line path, matched-filter beams and zero split for `seed`.
pub fn initial_state(scenario: &Scenario, seed: u64) -> Result<(SolutionState, ChannelRealization)> {
    let report = scenario.validate();
    if !report.is_empty() {
        return Err(Error::Config(report));
    }
    let (geometry, real) = channels_for(scenario, seed)?;
    let net = &scenario.net;
    let slots = real.slots(&geometry);
    let bf: Vec<Beamformers> = slots.iter().map(|c| initial_beamformers(c, net.antennas, net.p_max)).collect();
    let ra = vec![RateAllocation::zeros(net.users); net.t_slots];
    let initial = evaluate_all(&slots, &bf, &ra, scenario.channel.noise_power, &scenario.qoe)?;
    let state = SolutionState {
        version: CHECKPOINT_VERSION,
        scenario: scenario.clone(),
        seed,
        geometry,
        bf,
        ra,
        aux: Vec::new(),
        slacks: TrajSlacks::default(),
        initial_sum_mos: initial.sum_mos,
        history: Vec::new(),
        wall_ms: Vec::new(),
        converged: false,
    };
    Ok((state, real))
}

/// Runs the alternating loop from the initial state for `seed`.
pub fn run_aom(scenario: &Scenario, seed: u64, opts: &AoOptions) -> Result<SolutionState> {
    let (mut state, real) = initial_state(scenario, seed)?;
    let n = scenario.net.max_outer_iters;
    iterate(&mut state, &real, n, opts)?;
    Ok(state)
}

/// Continues a stored state for up to `extra_iters` outer iterations.
pub fn resume(mut state: SolutionState, extra_iters: usize, opts: &AoOptions) -> Result<SolutionState> {
    if extra_iters == 0 {
        return Ok(state);
    }
    let (_, real) = channels_for(&state.scenario, state.seed)?;
    check_integrity(&state, &real)?;
    state.converged = false;
    iterate(&mut state, &real, extra_iters, opts)?;
    Ok(state)
}

/// Shapes agree, history is numbered consecutively, and the recorded
/// sum MOS matches a fresh evaluation of the stored variables.
pub fn check_integrity(state: &SolutionState, real: &ChannelRealization) -> Result<()> {
    let net = &state.scenario.net;
    let t = net.t_slots;
    let bad = |m: String| Err(Error::Integrity(m));
    if state.bf.len() != t || state.ra.len() != t || state.geometry.trajectory.len() != t {
        return bad(format!(
            "{t} slots configured but {} beamformer sets, {} splits and {} waypoints stored",
            state.bf.len(),
            state.ra.len(),
            state.geometry.trajectory.len()
        ));
    }
    if state.wall_ms.len() != state.history.len() {
        return bad(format!("{} history entries but {} timings", state.history.len(), state.wall_ms.len()));
    }
    for (i, h) in state.history.iter().enumerate() {
        if h.outer_iter != i + 1 {
            return bad(format!("history entry {i} is numbered {}", h.outer_iter));
        }
    }
    let slots = real.slots(&state.geometry);
    let m = evaluate_all(&slots, &state.bf, &state.ra, state.scenario.channel.noise_power, &state.scenario.qoe)?;
    let recorded = state.sum_mos();
    if (m.sum_mos - recorded).abs() > 1e-9 * recorded.abs().max(1.0) {
        return bad(format!("recorded sum MOS {recorded} but stored variables give {}", m.sum_mos));
    }
    Ok(())
}

fn iterate(state: &mut SolutionState, real: &ChannelRealization, max_iters: usize, opts: &AoOptions) -> Result<()> {
    let sc = state.scenario.clone();
    let net = &sc.net;
    let sigma2 = sc.channel.noise_power;
    let qoe = &sc.qoe;
    let eval = |geo: &Geometry, bf: &[Beamformers], ra: &[RateAllocation]| -> Result<(f64, f64, MetricsReport)> {
        let m = evaluate_all(&real.slots(geo), bf, ra, sigma2, qoe)?;
        Ok((violation(&m, bf, net.eta, net.p_max), m.sum_mos, m))
    };
    let (mut v_inc, mut f_inc, _) = eval(&state.geometry, &state.bf, &state.ra)?;
    let mut prev = state.sum_mos();

    for _ in 0..max_iters {
        let it = state.history.len() + 1;
        let wrap = |e: Error| Error::Outer { iter: it, source: Box::new(e) };
        let clock = Instant::now();
        let mut rejected = Vec::new();

        let slots = real.slots(&state.geometry);
        let res = solve_bf(&slots, &state.bf, net, sigma2, qoe, &opts.bf).map_err(wrap)?;
        let bf_inner_iters = res.iter().map(|r| r.aux.statuses.len()).sum();
        let bf_statuses = count(res.iter().flat_map(|r| r.aux.statuses.iter().copied()));
        let secrecy_infeasible_slots = res.iter().filter(|r| r.aux.status == BfStatus::SecrecyInfeasible).count();
        let bf: Vec<Beamformers> = res.iter().map(|r| r.bf.clone()).collect();
        let ra: Vec<RateAllocation> = res.iter().map(|r| r.ra.clone()).collect();
        let (v, f, _) = eval(&state.geometry, &bf, &ra).map_err(wrap)?;
        if no_worse((v, f), (v_inc, f_inc)) {
            state.bf = bf;
            state.ra = ra;
            state.aux = res.into_iter().map(|r| r.aux).collect();
            (v_inc, f_inc) = (v, f);
        } else {
            rejected.push(format!("beamforming (sum MOS {f:.6} < {f_inc:.6})"));
        }

        let tr = solve_traj(real, &state.geometry, &state.bf, &state.ra, net, sigma2, qoe, &opts.traj).map_err(wrap)?;
        let geo = Geometry { trajectory: tr.trajectory.clone(), ..state.geometry.clone() };
        let ra = split_for(&real.slots(&geo), &state.bf, sigma2);
        let (v, f, _) = eval(&geo, &state.bf, &ra).map_err(wrap)?;
        if no_worse((v, f), (v_inc, f_inc)) {
            state.geometry = geo;
            state.ra = ra;
            state.slacks = tr.slacks.clone();
            (v_inc, f_inc) = (v, f);
        } else {
            rejected.push(format!("trajectory (sum MOS {f:.6} < {f_inc:.6})"));
        }

        state.history.push(HistoryEntry {
            outer_iter: it,
            sum_mos: f_inc,
            bf_inner_iters,
            traj_inner_iters: tr.statuses.len(),
            bf_statuses,
            traj_statuses: count(tr.statuses.iter().copied()),
            secrecy_infeasible_slots,
            traj_status: tr.status,
            rejected,
        });
        state.wall_ms.push(clock.elapsed().as_millis() as u64);
        if (f_inc - prev).abs() <= net.conv_eps {
            state.converged = true;
            break;
        }
        prev = f_inc;
    }
    Ok(())
}
