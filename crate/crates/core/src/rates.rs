//! Closed-form rates, secrecy and MOS.
//!
//! All rates are in bit/s/Hz. Eavesdropper rates used for reporting take the
//! worst-case Gram matrix `h̃h̃ᴴ + υI` in both the leaked signal and the
//! interference.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{EveChannel, SlotChannels};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, zeros, CMat, CVec};
use crate::model::QoEParams;

/// Precoders of one slot: the common beam and one private beam per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beamformers {
    pub w0: CVec,
    pub w: Vec<CVec>,
}

impl Beamformers {
    pub fn zeros(antennas: usize, users: usize) -> Self {
        Self { w0: zeros(antennas), w: vec![zeros(antennas); users] }
    }

    pub fn total_power(&self) -> f64 {
        norm_sq(&self.w0) + self.w.iter().map(|w| norm_sq(w)).sum::<f64>()
    }

    /// Common beam first, then the private beams.
    pub fn all(&self) -> impl Iterator<Item = &CVec> {
        std::iter::once(&self.w0).chain(self.w.iter())
    }

    pub fn antennas(&self) -> usize {
        self.w0.len()
    }
}

/// Per-user share of the common stream rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub a: Vec<f64>,
}

impl RateAllocation {
    pub fn zeros(users: usize) -> Self {
        Self { a: vec![0.0; users] }
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Common-stream rate seen by every user; the stream rate is the minimum.
pub fn common_rate_per_user(h_users: &[CVec], bf: &Beamformers, sigma2: f64) -> Vec<f64> {
    h_users
        .iter()
        .map(|h| {
            let sig = dot(h, &bf.w0).norm_sqr();
            let den: f64 = bf.w.iter().map(|w| dot(h, w).norm_sqr()).sum::<f64>() + sigma2;
            log2_1p(sig / den)
        })
        .collect()
}

pub fn common_rate(h_users: &[CVec], bf: &Beamformers, sigma2: f64) -> f64 {
    common_rate_per_user(h_users, bf, sigma2)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub fn private_rate(h_l: &[Complex64], bf: &Beamformers, l: usize, sigma2: f64) -> f64 {
    let sig = dot(h_l, &bf.w[l]).norm_sqr();
    let den: f64 = bf
        .w
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != l)
        .map(|(_, w)| dot(h_l, w).norm_sqr())
        .sum::<f64>()
        + sigma2;
    log2_1p(sig / den)
}

/// Rate at which an eavesdropper with channel `h_k` decodes user `l`'s
/// private stream; the common beam counts as interference.
pub fn eve_rate(h_k: &[Complex64], bf: &Beamformers, l: usize, sigma2: f64) -> f64 {
    let sig = dot(h_k, &bf.w[l]).norm_sqr();
    let den: f64 = bf
        .w
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != l)
        .map(|(_, w)| dot(h_k, w).norm_sqr())
        .sum::<f64>()
        + dot(h_k, &bf.w0).norm_sqr()
        + sigma2;
    log2_1p(sig / den)
}

/// [`eve_rate`] with every `|hᴴw|²` replaced by `wᴴ(h̃h̃ᴴ + υI)w`.
pub fn eve_rate_worst(eve: &EveChannel, bf: &Beamformers, l: usize, sigma2: f64) -> f64 {
    let sig = eve.worst_power(&bf.w[l]);
    let den: f64 = bf
        .all()
        .enumerate()
        .filter(|&(j, _)| j != l + 1)
        .map(|(_, w)| eve.worst_power(w))
        .sum::<f64>()
        + sigma2;
    log2_1p(sig / den)
}

/// Private rate from Gram matrices `H_l` and `W_j` (index 0 is the common beam).
pub fn private_rate_trace(h: &CMat, w: &[CMat], l: usize, sigma2: f64) -> f64 {
    let sig = h.trace_prod(&w[l + 1]).re;
    let den: f64 = (1..w.len()).filter(|&j| j != l + 1).map(|j| h.trace_prod(&w[j]).re).sum::<f64>() + sigma2;
    log2_1p(sig / den)
}

/// Eavesdropper rate from Gram matrices `H_k` and `W_j` (index 0 is the common beam).
pub fn eve_rate_trace(h: &CMat, w: &[CMat], l: usize, sigma2: f64) -> f64 {
    let sig = h.trace_prod(&w[l + 1]).re;
    let den: f64 = (0..w.len()).filter(|&j| j != l + 1).map(|j| h.trace_prod(&w[j]).re).sum::<f64>() + sigma2;
    log2_1p(sig / den)
}

/// `[(a + R_l) − max_k (a + R_k)]⁺`. The common share `a` cancels, so it is
/// dropped before subtracting.
pub fn secrecy_rate(_a_l: f64, r_priv: f64, r_eve: &[f64]) -> f64 {
    let worst = r_eve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if worst == f64::NEG_INFINITY {
        return r_priv.max(0.0);
    }
    (r_priv - worst).max(0.0)
}

/// `λ₁ ln R + λ₂ + λ₁ ln(W_l/Ω)`, or the floor (flagged) when `R ≤ 0`.
pub fn mos(r_sec: f64, qoe: &QoEParams) -> (f64, bool) {
    if r_sec > 0.0 {
        (qoe.lambda1 * r_sec.ln() + qoe.lambda2 + qoe.lambda1 * (qoe.w_l / qoe.omega).ln(), false)
    } else {
        (qoe.mos_floor, true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotMetrics {
    pub r0: f64,
    pub r0_per_user: Vec<f64>,
    pub r_priv: Vec<f64>,
    /// `[eve][user]`
    pub r_eve: Vec<Vec<f64>>,
    /// `R_l − max_k R_kl` before the positive part.
    pub margin: Vec<f64>,
    pub r_sec: Vec<f64>,
    pub mos: Vec<f64>,
    pub floored: Vec<bool>,
}

impl SlotMetrics {
    pub fn sum_mos(&self) -> f64 {
        self.mos.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub slots: Vec<SlotMetrics>,
    /// Sum over users of MOS, averaged over slots.
    pub sum_mos: f64,
}

impl MetricsReport {
    pub fn min_margin(&self) -> f64 {
        self.slots.iter().flat_map(|s| s.margin.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    pub fn any_floored(&self) -> bool {
        self.slots.iter().any(|s| s.floored.iter().any(|&f| f))
    }
}

pub fn slot_metrics(ch: &SlotChannels, bf: &Beamformers, ra: &RateAllocation, sigma2: f64, qoe: &QoEParams) -> SlotMetrics {
    let users = ch.users.len();
    let r0_per_user = common_rate_per_user(&ch.users, bf, sigma2);
    let r0 = r0_per_user.iter().copied().fold(f64::INFINITY, f64::min);
    let r_priv: Vec<f64> = (0..users).map(|l| private_rate(&ch.users[l], bf, l, sigma2)).collect();
    let r_eve: Vec<Vec<f64>> = ch
        .eves
        .iter()
        .map(|e| (0..users).map(|l| eve_rate_worst(e, bf, l, sigma2)).collect())
        .collect();
    let mut margin = Vec::with_capacity(users);
    let mut r_sec = Vec::with_capacity(users);
    let mut mos_v = Vec::with_capacity(users);
    let mut floored = Vec::with_capacity(users);
    for l in 0..users {
        let row: Vec<f64> = r_eve.iter().map(|r| r[l]).collect();
        let worst = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        margin.push(if worst.is_finite() { r_priv[l] - worst } else { r_priv[l] });
        let s = secrecy_rate(ra.a[l], r_priv[l], &row);
        let (m, f) = mos(s, qoe);
        r_sec.push(s);
        mos_v.push(m);
        floored.push(f);
    }
    SlotMetrics { r0, r0_per_user, r_priv, r_eve, margin, r_sec, mos: mos_v, floored }
}

pub fn evaluate_all(
    channels: &[SlotChannels],
    bf: &[Beamformers],
    ra: &[RateAllocation],
    sigma2: f64,
    qoe: &QoEParams,
) -> Result<MetricsReport> {
    if channels.is_empty() {
        return Err(Error::Shape("no slots".into()));
    }
    if bf.len() != channels.len() || ra.len() != channels.len() {
        return Err(Error::Shape(format!(
            "{} slots of channels, {} of beamformers, {} of rate splits",
            channels.len(),
            bf.len(),
            ra.len()
        )));
    }
    for (t, ((c, b), r)) in channels.iter().zip(bf).zip(ra).enumerate() {
        let n = b.antennas();
        let ok = b.w.len() == c.users.len()
            && r.a.len() == c.users.len()
            && b.all().all(|w| w.len() == n)
            && c.users.iter().all(|h| h.len() == n)
            && c.eves.iter().all(|e| e.h_tilde.len() == n);
        if !ok {
            return Err(Error::Shape(format!("slot {t}: inconsistent user, eavesdropper or antenna counts")));
        }
    }
    let slots: Vec<SlotMetrics> = channels
        .iter()
        .zip(bf)
        .zip(ra)
        .map(|((c, b), r)| slot_metrics(c, b, r, sigma2, qoe))
        .collect();
    let sum_mos = slots.iter().map(SlotMetrics::sum_mos).sum::<f64>() / slots.len() as f64;
    Ok(MetricsReport { slots, sum_mos })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_qoe() -> QoEParams {
        QoEParams { w_l: 1.0, omega: 1.0, ..Default::default() }
    }

    #[test]
    fn common_rate_examples() {
        let h = vec![vec![c(1.0, 0.0)]];
        let mut bf = Beamformers::zeros(1, 1);
        assert_eq!(common_rate(&h, &bf, 1.0), 0.0);
        bf.w0 = vec![c(3f64.sqrt(), 0.0)];
        assert!((common_rate(&h, &bf, 1.0) - 2.0).abs() < 1e-12);
        let h2 = vec![vec![c(0.4, 0.1)], vec![c(0.4, 0.1)]];
        let bf2 = Beamformers { w0: vec![c(1.0, 0.0)], w: vec![vec![c(0.2, 0.0)], vec![c(0.0, 0.5)]] };
        let per = common_rate_per_user(&h2, &bf2, 0.1);
        assert_eq!(per[0], per[1]);
        assert_eq!(common_rate(&h2, &bf2, 0.1), per[0]);
    }

    #[test]
    fn private_rate_examples() {
        let h = vec![c(1.0, 0.0)];
        let bf = Beamformers { w0: vec![c(5.0, 0.0)], w: vec![vec![c(0.0, 1.0)]] };
        assert!((private_rate(&h, &bf, 0, 1.0) - 1.0).abs() < 1e-15);
        let z = Beamformers::zeros(1, 1);
        assert_eq!(private_rate(&h, &z, 0, 1.0), 0.0);
    }

    #[test]
    fn eve_rate_examples() {
        let h = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let mut bf = Beamformers::zeros(2, 2);
        assert_eq!(eve_rate(&h, &bf, 0, 1.0), 0.0);
        bf.w[0] = vec![c(0.0, 0.0), c(1.0, 1.0)];
        bf.w0 = vec![c(0.0, 0.0), c(2.0, 0.0)];
        assert_eq!(eve_rate(&h, &bf, 0, 1.0), 0.0);
        // common beam enters the denominator
        bf.w[0] = vec![c(1.0, 0.0), c(0.0, 0.0)];
        bf.w0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        assert!((eve_rate(&h, &bf, 0, 1.0) - 0.5f64.ln_1p() / std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn worst_case_eve_rate_reduces_to_perfect_csi() {
        let h = vec![c(0.3, 1.0), c(-0.2, 0.5)];
        let bf = Beamformers {
            w0: vec![c(0.1, 0.0), c(0.3, 0.3)],
            w: vec![vec![c(1.0, 0.0), c(0.0, 0.2)], vec![c(0.5, 0.5), c(0.1, 0.0)]],
        };
        let e = EveChannel { h_tilde: h.clone(), upsilon: 0.0 };
        for l in 0..2 {
            assert!((eve_rate_worst(&e, &bf, l, 0.3) - eve_rate(&h, &bf, l, 0.3)).abs() < 1e-15);
        }
        let e = EveChannel { h_tilde: h, upsilon: 0.2 };
        assert!(eve_rate_worst(&e, &bf, 0, 0.3) > 0.0);
    }

    #[test]
    fn secrecy_examples() {
        assert_eq!(secrecy_rate(5.0, 3.0, &[1.0]), 2.0);
        assert_eq!(secrecy_rate(0.0, 1.0, &[3.0]), 0.0);
        assert!((secrecy_rate(0.0, 1.0, &[0.5, 0.9]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mos_examples() {
        let q = unit_qoe();
        assert_eq!(mos(1.0, &q), (4.675, false));
        assert!((mos(2.0, &q).0 - (1.12 * 2f64.ln() + 4.675)).abs() < 1e-15);
        assert!((mos(2.0, &q).0 - 5.4513).abs() < 1e-4);
        assert_eq!(mos(0.0, &q), (1.0, true));
    }

    #[test]
    fn zero_beams_floor_everything() {
        let ch = SlotChannels {
            users: vec![vec![c(1.0, 0.0), c(0.0, 1.0)]; 2],
            eves: vec![EveChannel { h_tilde: vec![c(0.5, 0.0), c(0.0, 0.0)], upsilon: 0.01 }],
        };
        let r = evaluate_all(&[ch], &[Beamformers::zeros(2, 2)], &[RateAllocation::zeros(2)], 1.0, &unit_qoe()).unwrap();
        let s = &r.slots[0];
        assert_eq!(s.r0, 0.0);
        assert!(s.r_priv.iter().chain(s.r_sec.iter()).all(|&v| v == 0.0));
        assert!(s.floored.iter().all(|&f| f));
        assert_eq!(r.sum_mos, 2.0);
    }

    #[test]
    fn nulled_eve_gives_private_rate() {
        let ch = SlotChannels {
            users: vec![vec![c(1.0, 0.0), c(0.0, 0.0)]],
            eves: vec![EveChannel { h_tilde: vec![c(0.0, 0.0), c(1.0, 0.0)], upsilon: 0.0 }],
        };
        let bf = Beamformers { w0: vec![c(0.3, 0.0), c(0.0, 0.0)], w: vec![vec![c(2.0, 0.0), c(0.0, 0.0)]] };
        let ra = RateAllocation { a: vec![0.7] };
        let r = evaluate_all(&[ch], &[bf], &[ra], 1.0, &unit_qoe()).unwrap();
        assert_eq!(r.slots[0].r_sec[0], r.slots[0].r_priv[0]);
    }

    #[test]
    fn shape_errors() {
        let ch = SlotChannels { users: vec![vec![c(1.0, 0.0)]], eves: vec![] };
        let bf = Beamformers::zeros(1, 1);
        assert!(matches!(evaluate_all(std::slice::from_ref(&ch), &[], &[], 1.0, &unit_qoe()), Err(Error::Shape(_))));
        let bad = Beamformers::zeros(2, 1);
        assert!(evaluate_all(std::slice::from_ref(&ch), &[bad], &[RateAllocation::zeros(1)], 1.0, &unit_qoe()).is_err());
        assert!(evaluate_all(&[ch], &[bf], &[RateAllocation::zeros(1)], 1.0, &unit_qoe()).is_ok());
    }
}
