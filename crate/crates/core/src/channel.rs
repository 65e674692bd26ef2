//! Rician UAV channels, eavesdropper CSI uncertainty and the trace bounds it
//! induces.
//!
//! Channels are stored distance-normalized: the physical vector in slot `t` is
//! `d^(-α/2)·g` with `d` the UAV-node distance. The small-scale part `g`
//! (shadowing, LoS steering, NLoS scattering) is frozen at sampling time, so
//! the trajectory only moves the distance factor.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, CMat, CVec};
use crate::model::{dist3, ChannelParams, Geometry, Point};

/// LoS and NLoS amplitude weights `(√(Γ/(1+Γ)), √(1/(1+Γ)))`.
pub fn rician_weights(rician: f64) -> (f64, f64) {
    ((rician / (1.0 + rician)).sqrt(), (1.0 / (1.0 + rician)).sqrt())
}

/// `ε² + 2ε‖h̃‖`
pub fn uncertainty_radius(h_tilde: &[Complex64], csi_eps: f64) -> Result<f64> {
    if !(csi_eps >= 0.0) {
        return Err(Error::Domain(format!("csi_eps must be nonnegative (got {csi_eps})")));
    }
    Ok(csi_eps * csi_eps + 2.0 * csi_eps * norm(h_tilde))
}

/// Upper and lower trace bounds `h̃h̃ᴴ ± υI` on the Gram matrix of any channel
/// in the uncertainty set.
///
/// The lower bound is not clamped to the PSD cone: clamping raises it and can
/// break `Tr(G₋W) ≤ Tr(hhᴴW)`.
pub fn gram_bounds(h_tilde: &[Complex64], upsilon: f64) -> Result<(CMat, CMat)> {
    if !(upsilon >= 0.0) {
        return Err(Error::Domain(format!("upsilon must be nonnegative (got {upsilon})")));
    }
    let base = CMat::outer(h_tilde, h_tilde);
    Ok((base.clone().add_scaled_identity(upsilon), base.add_scaled_identity(-upsilon)))
}

/// Steering vector of a λ/2 ULA along the x axis for a node seen under
/// direction cosine `cos_theta`.
pub fn steering(n: usize, cos_theta: f64) -> CVec {
    (0..n)
        .map(|i| Complex64::from_polar(1.0, -PI * i as f64 * cos_theta))
        .collect()
}

/// Eavesdropper channel as seen by the transmitter: estimate plus error radius.
#[derive(Clone, Debug, PartialEq)]
pub struct EveChannel {
    pub h_tilde: CVec,
    pub upsilon: f64,
}

impl EveChannel {
    pub fn gram_worst(&self) -> CMat {
        CMat::outer(&self.h_tilde, &self.h_tilde).add_scaled_identity(self.upsilon)
    }

    /// `wᴴ(h̃h̃ᴴ + υI)w`
    pub fn worst_power(&self, w: &[Complex64]) -> f64 {
        dot(&self.h_tilde, w).norm_sqr() + self.upsilon * crate::linalg::norm_sq(w)
    }
}

/// Physical channels of one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotChannels {
    pub users: Vec<CVec>,
    pub eves: Vec<EveChannel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub antennas: usize,
    pub alpha: f64,
    pub csi_eps: f64,
    /// `[user][slot]`, distance-normalized.
    pub users: Vec<Vec<CVec>>,
    /// `[eve][slot]`, distance-normalized true channels.
    pub eves: Vec<Vec<CVec>>,
    /// `[eve][slot]`, distance-normalized estimates.
    pub eves_est: Vec<Vec<CVec>>,
    /// `[eve][slot]`, distance-normalized uncertainty radius.
    pub upsilon: Vec<Vec<f64>>,
}

impl ChannelRealization {
    pub fn t_slots(&self) -> usize {
        self.users.first().or(self.eves.first()).map_or(0, Vec::len)
    }

    /// Power gain `d^(-α)` for a horizontal UAV position.
    pub fn path_gain(&self, q: Point, node: Point, z_u: f64) -> f64 {
        dist3(q, node, z_u).powf(-self.alpha)
    }

    pub fn user_h(&self, geometry: &Geometry, l: usize, t: usize) -> CVec {
        let a = self.path_gain(geometry.trajectory[t], geometry.users[l], geometry.z_u).sqrt();
        self.users[l][t].iter().map(|z| z * a).collect()
    }

    pub fn eve_h(&self, geometry: &Geometry, k: usize, t: usize) -> CVec {
        let a = self.path_gain(geometry.trajectory[t], geometry.eves[k], geometry.z_u).sqrt();
        self.eves[k][t].iter().map(|z| z * a).collect()
    }

    pub fn eve_est(&self, geometry: &Geometry, k: usize, t: usize) -> EveChannel {
        let g = self.path_gain(geometry.trajectory[t], geometry.eves[k], geometry.z_u);
        let a = g.sqrt();
        EveChannel {
            h_tilde: self.eves_est[k][t].iter().map(|z| z * a).collect(),
            upsilon: self.upsilon[k][t] * g,
        }
    }

    pub fn slot(&self, geometry: &Geometry, t: usize) -> SlotChannels {
        SlotChannels {
            users: (0..self.users.len()).map(|l| self.user_h(geometry, l, t)).collect(),
            eves: (0..self.eves.len()).map(|k| self.eve_est(geometry, k, t)).collect(),
        }
    }

    pub fn slots(&self, geometry: &Geometry) -> Vec<SlotChannels> {
        (0..self.t_slots()).map(|t| self.slot(geometry, t)).collect()
    }

    /// `(gram_worst, gram_best)` of eavesdropper `k` in slot `t`.
    pub fn grams(&self, geometry: &Geometry, k: usize, t: usize) -> (CMat, CMat) {
        let e = self.eve_est(geometry, k, t);
        gram_bounds(&e.h_tilde, e.upsilon).expect("radius is nonnegative by construction")
    }

    /// Writes the physical channels as CSV `node_id,slot,antenna,re,im`;
    /// eavesdropper rows carry the estimate.
    pub fn write_csv<W: Write>(&self, geometry: &Geometry, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "slot", "antenna", "re", "im"]).map_err(csv_err)?;
        for t in 0..self.t_slots() {
            let rows = (0..self.users.len())
                .map(|l| (format!("user{l}"), self.user_h(geometry, l, t)))
                .chain((0..self.eves.len()).map(|k| (format!("eve{k}"), self.eve_est(geometry, k, t).h_tilde)));
            for (id, h) in rows {
                for (n, z) in h.iter().enumerate() {
                    w.write_record([id.clone(), t.to_string(), n.to_string(), z.re.to_string(), z.im.to_string()])
                        .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn cn01(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn ball_sample(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> CVec {
    if radius == 0.0 {
        return crate::linalg::zeros(n);
    }
    let dir: CVec = (0..n).map(|_| cn01(rng)).collect();
    let r = radius * rng.gen::<f64>().powf(1.0 / (2 * n) as f64) / norm(&dir);
    dir.iter().map(|z| z * r).collect()
}

/// Draws a full realization for the given geometry. The LoS direction of
/// each slot is taken from `geometry.trajectory`.
///
/// Draw order: shadowing for users then eavesdroppers, then per slot the user
/// scattering, eavesdropper scattering and eavesdropper estimation errors.
pub fn sample_channel(params: &ChannelParams, geometry: &Geometry, antennas: usize, seed: u64) -> Result<ChannelRealization> {
    let report = params_report(params);
    if !report.is_empty() {
        return Err(Error::Config(report));
    }
    if !(geometry.z_u > 0.0) {
        return Err(Error::Domain("altitude must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = geometry.users.len();
    let n_eves = geometry.eves.len();
    let t_slots = geometry.t_slots();

    let mut shadow = || -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        10f64.powf(params.shadow_std_db * z / 10.0)
    };
    let user_shadow: Vec<f64> = (0..n_users).map(|_| shadow()).collect();
    let eve_shadow: Vec<f64> = (0..n_eves).map(|_| shadow()).collect();

    let (w_los, w_nlos) = rician_weights(params.rician);
    let a_los = w_los * params.pl_los.sqrt();
    let a_nlos = w_nlos * params.pl_nlos.sqrt();
    let draw = |rng: &mut ChaCha8Rng, q: Point, p: Point, chi: f64| -> CVec {
        let d = dist3(q, p, geometry.z_u);
        let los = steering(antennas, (p[0] - q[0]) / d);
        let s = chi.sqrt();
        los.iter()
            .map(|a| s * (a_los * a + a_nlos * cn01(rng)))
            .collect()
    };

    let mut users = vec![Vec::with_capacity(t_slots); n_users];
    let mut eves = vec![Vec::with_capacity(t_slots); n_eves];
    let mut est = vec![Vec::with_capacity(t_slots); n_eves];
    let mut ups = vec![Vec::with_capacity(t_slots); n_eves];
    for t in 0..t_slots {
        let q = geometry.trajectory[t];
        for l in 0..n_users {
            users[l].push(draw(&mut rng, q, geometry.users[l], user_shadow[l]));
        }
        for k in 0..n_eves {
            eves[k].push(draw(&mut rng, q, geometry.eves[k], eve_shadow[k]));
        }
        for k in 0..n_eves {
            let e = ball_sample(&mut rng, antennas, params.csi_eps);
            let g_tilde: CVec = eves[k][t].iter().zip(&e).map(|(a, b)| a + b).collect();
            ups[k].push(uncertainty_radius(&g_tilde, params.csi_eps)?);
            est[k].push(g_tilde);
        }
    }
    Ok(ChannelRealization {
        antennas,
        alpha: params.alpha,
        csi_eps: params.csi_eps,
        users,
        eves,
        eves_est: est,
        upsilon: ups,
    })
}

fn params_report(p: &ChannelParams) -> Vec<String> {
    crate::model::validate_config(&Default::default(), &Default::default(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_geometry, Scenario};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn radius_examples() {
        let h2 = [c(2.0, 0.0), c(0.0, 0.0)];
        let h1 = [c(0.0, 1.0)];
        assert_eq!(uncertainty_radius(&h2, 0.0).unwrap(), 0.0);
        assert!((uncertainty_radius(&h2, 0.1).unwrap() - 0.41).abs() < 1e-15);
        assert!((uncertainty_radius(&h1, 0.1).unwrap() - 0.21).abs() < 1e-15);
        assert!(uncertainty_radius(&h1, -0.1).is_err());
    }

    #[test]
    fn gram_bounds_zero_radius_and_gap() {
        let h = [c(1.0, -0.5), c(0.3, 0.2), c(0.0, 1.0)];
        let (w, b) = gram_bounds(&h, 0.0).unwrap();
        assert_eq!(w, b);
        assert_eq!(w, CMat::outer(&h, &h));
        let (w, b) = gram_bounds(&h, 0.7).unwrap();
        let gap = w.sub(&b);
        assert!(gap.sub(&CMat::identity(3).scaled(1.4)).frobenius() < 1e-15);
        assert!(w.hermitian_defect() == 0.0 && b.hermitian_defect() == 0.0);
        assert!(gram_bounds(&h, -1.0).is_err());
    }

    #[test]
    fn rician_weight_examples() {
        assert_eq!(rician_weights(0.0), (0.0, 1.0));
        let (a, b) = rician_weights(2.0);
        assert!((a - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((b - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_factor_at_100m() {
        assert!((100f64.powf(-3.5) - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let s = Scenario::default_scenario();
        let g = initial_geometry(&s, 3);
        let a = sample_channel(&s.channel, &g, 4, 11).unwrap();
        let b = sample_channel(&s.channel, &g, 4, 11).unwrap();
        let c = sample_channel(&s.channel, &g, 4, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.t_slots(), 40);
    }

    #[test]
    fn pure_nlos_when_rician_is_zero() {
        let mut s = Scenario::default_scenario();
        s.channel.rician = 0.0;
        s.channel.shadow_std_db = 0.0;
        s.channel.pl_nlos = 1.0;
        let g = initial_geometry(&s, 0);
        let a = sample_channel(&s.channel, &g, 4, 5).unwrap();
        // same seed with a different LoS factor: the LoS weight is zero so nothing changes
        s.channel.pl_los = 7.0;
        let b = sample_channel(&s.channel, &g, 4, 5).unwrap();
        assert_eq!(a.users, b.users);
    }

    #[test]
    fn estimate_error_respects_bound() {
        let mut s = Scenario::default_scenario();
        s.channel.csi_eps = 0.05;
        let g = initial_geometry(&s, 1);
        let r = sample_channel(&s.channel, &g, 4, 9).unwrap();
        for k in 0..r.eves.len() {
            for t in 0..r.t_slots() {
                let e = crate::linalg::sub(&r.eves_est[k][t], &r.eves[k][t]);
                assert!(norm(&e) <= 0.05 + 1e-15);
                let u = 0.05 * 0.05 + 0.1 * norm(&r.eves_est[k][t]);
                assert_eq!(r.upsilon[k][t], u);
            }
        }
    }

    #[test]
    fn physical_radius_matches_scaled_error_bound() {
        let s = Scenario::default_scenario();
        let g = initial_geometry(&s, 2);
        let r = sample_channel(&s.channel, &g, 4, 2).unwrap();
        let e = r.eve_est(&g, 0, 7);
        let gain = r.path_gain(g.trajectory[7], g.eves[0], g.z_u);
        let eps_phys = s.channel.csi_eps * gain.sqrt();
        let direct = uncertainty_radius(&e.h_tilde, eps_phys).unwrap();
        assert!((direct - e.upsilon).abs() <= 1e-12 * e.upsilon);
    }

    #[test]
    fn csv_dump_has_one_row_per_coefficient() {
        let mut s = Scenario::default_scenario();
        s.net.t_slots = 3;
        let g = initial_geometry(&s, 0);
        let r = sample_channel(&s.channel, &g, 4, 0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 6 * 4);
        assert!(text.starts_with("node_id,slot,antenna,re,im\n"));
    }
}
