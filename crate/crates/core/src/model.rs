//! Scenario constants, node geometry and configuration checks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Thermal noise power in watts for a noise density in dBm/Hz over `bandwidth_hz`.
pub fn noise_power_w(density_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(density_dbm_hz + 10.0 * bandwidth_hz.log10())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub users: usize,
    pub eves: usize,
    pub antennas: usize,
    pub t_slots: usize,
    pub slot_seconds: f64,
    /// Transmit power budget (W).
    pub p_max: f64,
    /// Secrecy threshold (bit/s/Hz).
    pub eta: f64,
    /// Outer stopping tolerance on sum MOS.
    pub conv_eps: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Inner stopping tolerance on the surrogate objective.
    pub inner_tol: f64,
    /// UAV speed (m/s).
    pub v_u: f64,
    /// UAV altitude (m).
    pub z_u: f64,
    pub q0: Point,
    pub qf: Point,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            users: 4,
            eves: 2,
            antennas: 4,
            t_slots: 40,
            slot_seconds: 1.0,
            p_max: 1.0,
            eta: 0.1,
            conv_eps: 1e-3,
            max_outer_iters: 50,
            max_inner_iters: 20,
            inner_tol: 1e-5,
            v_u: 20.0,
            z_u: 100.0,
            q0: [100.0, 250.0],
            qf: [400.0, 250.0],
        }
    }
}

impl NetworkConfig {
    /// Largest horizontal displacement per slot (m).
    pub fn d_max(&self) -> f64 {
        self.v_u * self.slot_seconds
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoEParams {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Bandwidth scale turning bit/s/Hz into bit/s (Hz).
    pub w_l: f64,
    /// Content size (bits).
    pub omega: f64,
    /// Score reported when the secrecy rate is zero.
    pub mos_floor: f64,
}

impl Default for QoEParams {
    fn default() -> Self {
        Self {
            lambda1: 1.12,
            lambda2: 4.675,
            w_l: 250e3,
            omega: 0.02e6,
            mos_floor: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub alpha: f64,
    /// Linear LoS path-loss factor.
    pub pl_los: f64,
    /// Linear NLoS path-loss factor.
    pub pl_nlos: f64,
    pub rician: f64,
    /// Receiver noise power (W).
    pub noise_power: f64,
    /// Norm bound on the eavesdropper channel error, relative to the
    /// distance-normalized channel.
    pub csi_eps: f64,
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Log-normal shadowing standard deviation (dB).
    pub shadow_std_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha: 3.5,
            pl_los: db_to_linear(-2.5),
            pl_nlos: db_to_linear(-3.5),
            rician: 2.0,
            noise_power: noise_power_w(-174.0, 250e3),
            csi_eps: 1e-3,
            wavelength: 0.15,
            shadow_std_db: 8.0,
        }
    }
}

/// Everything needed to regenerate an instance from a seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Scenario {
    pub net: NetworkConfig,
    pub qoe: QoEParams,
    pub channel: ChannelParams,
    /// Side of the square users and eavesdroppers are dropped in (m).
    pub area_m: f64,
}

impl Scenario {
    pub fn new(net: NetworkConfig) -> Self {
        Self {
            net,
            ..Self::default_scenario()
        }
    }

    pub fn default_scenario() -> Self {
        Self {
            net: NetworkConfig::default(),
            qoe: QoEParams::default(),
            channel: ChannelParams::default(),
            area_m: 500.0,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut report = validate_config(&self.net, &self.qoe, &self.channel);
        if !(self.area_m > 0.0) {
            report.push(format!("area_m must be positive (got {})", self.area_m));
        }
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    User(usize),
    Eve(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub users: Vec<Point>,
    pub eves: Vec<Point>,
    pub trajectory: Vec<Point>,
    pub z_u: f64,
}

impl Geometry {
    pub fn node(&self, node: Node) -> Result<Point> {
        match node {
            Node::User(l) => self.users.get(l).copied(),
            Node::Eve(k) => self.eves.get(k).copied(),
        }
        .ok_or_else(|| Error::Index(format!("{node:?} does not exist")))
    }

    pub fn t_slots(&self) -> usize {
        self.trajectory.len()
    }
}

/// UAV-to-node distance in slot `slot` (m).
pub fn distance(geometry: &Geometry, slot: usize, node: Node) -> Result<f64> {
    if !(geometry.z_u > 0.0) {
        return Err(Error::Domain(format!("altitude must be positive (got {})", geometry.z_u)));
    }
    let q = geometry.trajectory.get(slot).ok_or_else(|| {
        Error::Index(format!("slot {slot} of {}", geometry.trajectory.len()))
    })?;
    let p = geometry.node(node)?;
    Ok(dist3(*q, p, geometry.z_u))
}

pub(crate) fn dist3(q: Point, p: Point, z: f64) -> f64 {
    let dx = q[0] - p[0];
    let dy = q[1] - p[1];
    (dx * dx + dy * dy + z * z).sqrt()
}

pub fn straight_line(q0: Point, qf: Point, t_slots: usize) -> Vec<Point> {
    if t_slots == 1 {
        return vec![q0];
    }
    (0..t_slots)
        .map(|t| {
            let s = t as f64 / (t_slots - 1) as f64;
            [q0[0] + s * (qf[0] - q0[0]), q0[1] + s * (qf[1] - q0[1])]
        })
        .collect()
}

/// Drops users then eavesdroppers uniformly in `[0, area]²`.
pub fn place_nodes(users: usize, eves: usize, area: f64, seed: u64) -> (Vec<Point>, Vec<Point>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut draw = |n| -> Vec<Point> {
        (0..n)
            .map(|_| [rng.gen::<f64>() * area, rng.gen::<f64>() * area])
            .collect()
    };
    let u = draw(users);
    let e = draw(eves);
    (u, e)
}

/// Seeded node placement with the straight-line trajectory.
pub fn initial_geometry(scenario: &Scenario, seed: u64) -> Geometry {
    let net = &scenario.net;
    let (users, eves) = place_nodes(net.users, net.eves, scenario.area_m, seed);
    Geometry {
        users,
        eves,
        trajectory: straight_line(net.q0, net.qf, net.t_slots),
        z_u: net.z_u,
    }
}

/// Lists every violated invariant; an empty list means the scenario is usable.
pub fn validate_config(cfg: &NetworkConfig, qoe: &QoEParams, ch: &ChannelParams) -> Vec<String> {
    let mut r = Vec::new();
    let mut need = |ok: bool, msg: String| {
        if !ok {
            r.push(msg);
        }
    };
    need(cfg.users >= 1, format!("need at least one user (got {})", cfg.users));
    need(cfg.eves >= 1, format!("need at least one eavesdropper (got {})", cfg.eves));
    need(cfg.antennas >= 1, format!("need at least one antenna (got {})", cfg.antennas));
    need(cfg.t_slots >= 2, format!("need at least two slots (got {})", cfg.t_slots));
    need(cfg.slot_seconds > 0.0, format!("slot_seconds must be positive (got {})", cfg.slot_seconds));
    need(cfg.p_max > 0.0, format!("p_max must be positive (got {})", cfg.p_max));
    need(cfg.eta >= 0.0, format!("eta must be nonnegative (got {})", cfg.eta));
    need(cfg.conv_eps > 0.0, format!("conv_eps must be positive (got {})", cfg.conv_eps));
    need(cfg.inner_tol > 0.0, format!("inner_tol must be positive (got {})", cfg.inner_tol));
    need(cfg.max_outer_iters >= 1, "max_outer_iters must be at least 1".into());
    need(cfg.max_inner_iters >= 1, "max_inner_iters must be at least 1".into());
    need(cfg.z_u > 0.0, format!("z_u must be positive (got {})", cfg.z_u));
    need(cfg.v_u >= 0.0, format!("v_u must be nonnegative (got {})", cfg.v_u));
    let gap = ((cfg.q0[0] - cfg.qf[0]).powi(2) + (cfg.q0[1] - cfg.qf[1]).powi(2)).sqrt();
    let reach = cfg.t_slots.saturating_sub(1) as f64 * cfg.d_max();
    need(
        gap <= reach + 1e-9,
        format!("unreachable endpoint: |q0 - qF| = {gap:.3} m exceeds (T-1)*D = {reach:.3} m"),
    );
    need(qoe.lambda1 > 0.0, format!("lambda1 must be positive (got {})", qoe.lambda1));
    need(qoe.omega > 0.0, format!("omega must be positive (got {})", qoe.omega));
    need(qoe.w_l > 0.0, format!("w_l must be positive (got {})", qoe.w_l));
    need(ch.alpha > 2.0, format!("alpha must exceed 2 (got {})", ch.alpha));
    need(ch.rician >= 0.0, format!("rician must be nonnegative (got {})", ch.rician));
    need(ch.noise_power > 0.0, format!("noise_power must be positive (got {})", ch.noise_power));
    need(ch.csi_eps >= 0.0, format!("csi_eps must be nonnegative (got {})", ch.csi_eps));
    need(ch.pl_los > 0.0 && ch.pl_nlos > 0.0, "path-loss factors must be positive".into());
    need(ch.shadow_std_db >= 0.0, "shadow_std_db must be nonnegative".into());
    need(ch.wavelength > 0.0, "wavelength must be positive".into());
    let finite = [
        cfg.slot_seconds, cfg.p_max, cfg.eta, cfg.conv_eps, cfg.v_u, cfg.z_u, cfg.q0[0], cfg.q0[1],
        cfg.qf[0], cfg.qf[1], qoe.lambda1, qoe.lambda2, qoe.w_l, qoe.omega, ch.alpha, ch.noise_power,
        ch.csi_eps,
    ];
    need(finite.iter().all(|v| v.is_finite()), "all parameters must be finite".into());
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(q: Point, p: Point, z: f64) -> Geometry {
        Geometry { users: vec![p], eves: vec![], trajectory: vec![q], z_u: z }
    }

    #[test]
    fn distance_examples() {
        let d = distance(&geo([0.0, 0.0], [0.0, 0.0], 100.0), 0, Node::User(0)).unwrap();
        assert_eq!(d, 100.0);
        let d = distance(&geo([0.0, 0.0], [30.0, 40.0], 100.0), 0, Node::User(0)).unwrap();
        assert!((d - 12500f64.sqrt()).abs() < 1e-12);
        assert!((d - 111.8034).abs() < 1e-4);
        assert!(matches!(
            distance(&geo([10.0, 0.0], [0.0, 0.0], 0.0), 0, Node::User(0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn distance_index_errors() {
        let g = geo([0.0, 0.0], [1.0, 1.0], 100.0);
        assert!(matches!(distance(&g, 1, Node::User(0)), Err(Error::Index(_))));
        assert!(matches!(distance(&g, 0, Node::Eve(0)), Err(Error::Index(_))));
    }

    #[test]
    fn default_scenario_is_valid() {
        let s = Scenario::default_scenario();
        assert!(s.validate().is_empty(), "{:?}", s.validate());
        assert_eq!(s.net.d_max(), 20.0);
        assert!((s.channel.noise_power - 9.953e-16).abs() < 1e-19);
    }

    #[test]
    fn zero_travel_is_reachable() {
        let cfg = NetworkConfig { q0: [0.0, 0.0], qf: [0.0, 0.0], t_slots: 2, ..Default::default() };
        assert!(validate_config(&cfg, &QoEParams::default(), &ChannelParams::default()).is_empty());
    }

    #[test]
    fn unreachable_endpoint_is_reported() {
        let cfg = NetworkConfig { q0: [0.0, 0.0], qf: [200.0, 0.0], t_slots: 3, ..Default::default() };
        let r = validate_config(&cfg, &QoEParams::default(), &ChannelParams::default());
        assert!(r.iter().any(|m| m.contains("unreachable endpoint")), "{r:?}");
    }

    #[test]
    fn straight_line_hits_both_ends() {
        let q = straight_line([0.0, 0.0], [30.0, 40.0], 6);
        assert_eq!(q[0], [0.0, 0.0]);
        assert_eq!(q[5], [30.0, 40.0]);
        for w in q.windows(2) {
            assert!((dist3(w[0], w[1], 0.0) - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn placement_is_seeded() {
        assert_eq!(place_nodes(3, 2, 500.0, 7), place_nodes(3, 2, 500.0, 7));
        assert_ne!(place_nodes(3, 2, 500.0, 7), place_nodes(3, 2, 500.0, 8));
        let (u, e) = place_nodes(50, 50, 500.0, 1);
        assert!(u.iter().chain(&e).all(|p| p.iter().all(|c| (0.0..=500.0).contains(c))));
    }
}
