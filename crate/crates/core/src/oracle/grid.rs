//! Exhaustive trajectory search on a grid for tiny instances.

use num_complex::Complex64;

use super::brute_force_rates;
use crate::channel::{ChannelRealization, EveChannel, SlotChannels};
use crate::error::{Error, Result};
use crate::model::{Geometry, NetworkConfig, Point, QoEParams};
use crate::rates::Beamformers;

const MAX_STATES: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOptions {
    /// Points per axis.
    pub n: usize,
    /// Allow steps up to `D + h√2` so every feasible path has a grid neighbour path.
    pub relax: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { n: 21, relax: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub best_sum_mos: f64,
    pub path: Vec<Point>,
    /// Grid spacing (m).
    pub spacing: f64,
    /// Slot-averaged largest score change between diagonal grid neighbours.
    pub resolution_slack: f64,
    pub states: usize,
}

fn slot_at(real: &ChannelRealization, geometry: &Geometry, t: usize, q: Point) -> SlotChannels {
    let gain = |p: Point| {
        let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + geometry.z_u * geometry.z_u;
        d2.powf(-real.alpha / 2.0)
    };
    let amp = |v: &[Complex64], g: f64| v.iter().map(|z| z * g.sqrt()).collect::<Vec<_>>();
    SlotChannels {
        users: geometry.users.iter().enumerate().map(|(l, &p)| amp(&real.users[l][t], gain(p))).collect(),
        eves: geometry
            .eves
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let g = gain(p);
                EveChannel { h_tilde: amp(&real.eves_est[k][t], g), upsilon: real.upsilon[k][t] * g }
            })
            .collect(),
    }
}

/// Best true sum MOS over grid paths from `q0` with fixed beamformers, by
/// dynamic programming over slots.
#[allow(clippy::too_many_arguments)]
pub fn grid_trajectory_oracle(
    real: &ChannelRealization,
    geometry: &Geometry,
    bf: &[Beamformers],
    net: &NetworkConfig,
    sigma2: f64,
    qoe: &QoEParams,
    opts: &GridOptions,
) -> Result<GridResult> {
    let n_t = geometry.trajectory.len();
    let n = opts.n.max(1);
    let states = n_t.saturating_mul(n * n);
    if states > MAX_STATES {
        return Err(Error::Size(format!("{n_t} slots × {n}×{n} grid = {states} states exceeds {MAX_STATES}")));
    }
    if bf.len() != n_t {
        return Err(Error::Shape(format!("{n_t} slots but {} beamformer sets", bf.len())));
    }
    let d = net.d_max();
    let half = d * (n_t.max(2) - 1) as f64;
    let h = if n > 1 { 2.0 * half / (n - 1) as f64 } else { 0.0 };
    let c = (n / 2) as f64;
    let pts: Vec<Point> = (0..n * n)
        .map(|i| [net.q0[0] + ((i % n) as f64 - c) * h, net.q0[1] + ((i / n) as f64 - c) * h])
        .collect();
    let reach = d + if opts.relax { h * std::f64::consts::SQRT_2 } else { 0.0 } + 1e-9 * d.max(1.0);
    let dist = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

    let score: Vec<Vec<f64>> = (0..n_t)
        .map(|t| pts.iter().map(|&q| brute_force_rates(&slot_at(real, geometry, t, q), &bf[t], sigma2, qoe).sum_mos).collect())
        .collect();

    let start = (n / 2) * n + n / 2;
    let mut best = vec![f64::NEG_INFINITY; n * n];
    best[start] = score[0][start];
    let mut back: Vec<Vec<usize>> = vec![vec![usize::MAX; n * n]];
    for t in 1..n_t {
        let mut next = vec![f64::NEG_INFINITY; n * n];
        let mut from = vec![usize::MAX; n * n];
        for i in 0..n * n {
            for j in 0..n * n {
                if best[j] == f64::NEG_INFINITY || dist(pts[i], pts[j]) > reach {
                    continue;
                }
                let v = best[j] + score[t][i];
                if v > next[i] {
                    next[i] = v;
                    from[i] = j;
                }
            }
        }
        best = next;
        back.push(from);
    }
    let end = (0..n * n)
        .filter(|&i| best[i] > f64::NEG_INFINITY && dist(pts[i], net.qf) <= reach)
        .max_by(|&a, &b| best[a].total_cmp(&best[b]))
        .ok_or_else(|| Error::Init("no grid path reaches the final-position constraint".into()))?;
    let mut path = vec![end];
    for t in (1..n_t).rev() {
        let prev = back[t][*path.last().unwrap()];
        path.push(prev);
    }
    path.reverse();

    let mut slack = 0.0;
    for s in &score {
        let mut m: f64 = 0.0;
        for i in 0..n * n {
            let (x, y) = (i % n, i / n);
            for (dx, dy) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= n as i64 || ny >= n as i64 {
                    continue;
                }
                m = m.max((s[i] - s[ny as usize * n + nx as usize]).abs());
            }
        }
        slack += m;
    }
    Ok(GridResult {
        best_sum_mos: best[end] / n_t as f64,
        path: path.iter().map(|&i| pts[i]).collect(),
        spacing: h,
        resolution_slack: slack / n_t as f64,
        states,
    })
}

/// Values compared by [`trajectory_sanity`], all scored with the brute-force
/// rates.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySanity {
    pub initial: f64,
    pub sca: f64,
    pub grid: GridResult,
}

impl TrajectorySanity {
    pub fn passed(&self) -> bool {
        self.sca >= self.initial - 1e-9 && self.sca <= self.grid.best_sum_mos + self.grid.resolution_slack
    }
}

/// Tiny instance (5 slots, one user, one eavesdropper, 21×21 grid):
/// beamformers optimized for the straight line, then one trajectory solve,
/// checked against the straight line below and the grid optimum above.
pub fn trajectory_sanity(seed: u64) -> Result<TrajectorySanity> {
    use crate::bf::{initial_beamformers, solve_bf, BfOptions};
    use crate::channel::sample_channel;
    use crate::model::{straight_line, Scenario};
    use crate::traj::{solve_traj, TrajOptions};

    let net = NetworkConfig {
        users: 1,
        eves: 1,
        antennas: 2,
        t_slots: 5,
        q0: [200.0, 250.0],
        qf: [260.0, 250.0],
        ..NetworkConfig::default()
    };
    let sc = Scenario::new(net);
    let net = &sc.net;
    let geometry = Geometry {
        users: vec![[250.0, 190.0]],
        eves: vec![[170.0, 320.0]],
        trajectory: straight_line(net.q0, net.qf, net.t_slots),
        z_u: net.z_u,
    };
    let sigma2 = sc.channel.noise_power;
    let real = sample_channel(&sc.channel, &geometry, net.antennas, seed)?;
    let slots = real.slots(&geometry);
    let init: Vec<Beamformers> = slots.iter().map(|c| initial_beamformers(c, net.antennas, net.p_max)).collect();
    let res = solve_bf(&slots, &init, net, sigma2, &sc.qoe, &BfOptions::default())?;
    let bf: Vec<Beamformers> = res.iter().map(|r| r.bf.clone()).collect();
    let ra: Vec<_> = res.iter().map(|r| r.ra.clone()).collect();
    let tr = solve_traj(&real, &geometry, &bf, &ra, net, sigma2, &sc.qoe, &TrajOptions::default())?;
    let score = |path: &[Point]| {
        let total: f64 = path
            .iter()
            .enumerate()
            .map(|(t, &q)| brute_force_rates(&slot_at(&real, &geometry, t, q), &bf[t], sigma2, &sc.qoe).sum_mos)
            .sum();
        total / path.len() as f64
    };
    let grid = grid_trajectory_oracle(&real, &geometry, &bf, net, sigma2, &sc.qoe, &GridOptions::default())?;
    Ok(TrajectorySanity { initial: score(&geometry.trajectory), sca: score(&tr.trajectory), grid })
}
