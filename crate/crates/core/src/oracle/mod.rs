//! Independent validators for the reformulation steps.
//!
//! Rates here are recomputed from raw inner products with local helpers, never
//! through the trace forms or the metrics code they check.

pub mod grid;

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsma_conic::AffExpr;

use crate::bf::{exp_taylor_upper, soc_secrecy_rows};
use crate::channel::{gram_bounds, uncertainty_radius, EveChannel, SlotChannels};
use crate::linalg::CMat;
use crate::model::QoEParams;
use crate::rates::{self, Beamformers, RateAllocation};
use crate::traj::{log1p_tangent, quadratic_lower, user_tangent_bound};

pub use grid::{grid_trajectory_oracle, trajectory_sanity, GridOptions, GridResult, TrajectorySanity};

/// One line of the oracle report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    /// Count of samples that broke the property.
    pub failures: usize,
    /// Largest observed violation (0 when every sample holds strictly).
    pub worst: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} samples={} failures={} worst={:.3e} {}",
            self.name,
            self.samples,
            self.failures,
            self.worst,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

struct Tally {
    name: String,
    samples: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self { name: name.into(), samples: 0, failures: 0, worst: 0.0 }
    }

    /// Records a violation amount; positive beyond `tol` is a failure.
    fn see(&mut self, violation: f64, tol: f64) {
        self.samples += 1;
        if violation.is_nan() || violation > tol {
            self.failures += 1;
        }
        if violation.is_nan() {
            self.worst = f64::INFINITY;
        } else if violation > self.worst {
            self.worst = violation;
        }
    }

    fn finish(self) -> CheckReport {
        CheckReport { name: self.name, samples: self.samples, failures: self.failures, worst: self.worst }
    }
}

fn cvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))).collect()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..a.len() {
        s += a[i].conj() * b[i];
    }
    s
}

fn power(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.re * z.re + z.im * z.im).sum()
}

/// Membership in `{ΥΛ ≥ β/(β−1)·Tr², Λ, Υ ≥ 0}` against membership of the
/// rows produced by the beamforming module in the second-order cone. Samples
/// whose hyperbolic margin is within `1e−12` (relative) of zero are boundary
/// points and count as agreeing.
pub fn check_hyperbolic_soc(samples: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("hyperbolic_soc");
    let mut cases: Vec<(f64, f64, f64, f64)> = vec![(4.0, 2.0, 2.0, 2.0), (0.0, 0.0, 0.0, 1.5)];
    while cases.len() < samples {
        let lambda = rng.gen_range(0.0..10.0);
        let upsilon = rng.gen_range(0.0..10.0);
        let beta: f64 = 1.0 + rng.gen_range(1e-3..5.0);
        let k = beta / (beta - 1.0);
        // spread |Tr| around the boundary √(ΥΛ/k)
        let edge = (lambda * upsilon / k).sqrt();
        let tr = edge * rng.gen_range(0.0..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        cases.push((lambda, upsilon, tr, beta));
    }
    for (lambda, upsilon, tr, beta) in cases.into_iter().take(samples.max(2)) {
        let k = beta / (beta - 1.0);
        let margin = upsilon * lambda - k * tr * tr;
        let scale = (upsilon * lambda).abs().max(k * tr * tr).max(1e-300);
        let hyper = margin >= 0.0 && lambda >= 0.0 && upsilon >= 0.0;
        let rows = match soc_secrecy_rows(AffExpr::constant(tr), AffExpr::constant(lambda), AffExpr::constant(upsilon), beta) {
            Ok(r) => r,
            Err(_) => {
                t.see(f64::INFINITY, 0.0);
                continue;
            }
        };
        let v: Vec<f64> = rows.iter().map(|r| r.eval(&[])).collect();
        let soc = (v[1] * v[1] + v[2] * v[2]).sqrt() <= v[0];
        let boundary = margin.abs() <= 1e-12 * scale;
        t.see(if hyper == soc || boundary { 0.0 } else { 1.0 }, 0.0);
    }
    t.finish()
}

/// Tangent bounds used by both subproblems, each checked for validity on
/// random draws and for equality at the tangency point.
pub fn check_taylor_bounds(samples: usize, seed: u64) -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rel = |a: f64, b: f64| (a - b) / b.abs().max(1.0);
    let tangency = 1e-12;

    let mut e = Tally::new("taylor_exp");
    for _ in 0..samples {
        let c: f64 = rng.gen_range(-20.0..20.0);
        let cp: f64 = rng.gen_range(-20.0..20.0);
        let lb = exp_taylor_upper(AffExpr::constant(c), cp).eval(&[]);
        e.see(rel(lb, c.exp()), 1e-12);
        let at = exp_taylor_upper(AffExpr::constant(cp), cp).eval(&[]);
        e.see(rel(at, cp.exp()).abs(), tangency);
    }

    let mut q = Tally::new("taylor_quadratic");
    for _ in 0..samples {
        let x: f64 = rng.gen_range(-100.0..100.0);
        let xp: f64 = rng.gen_range(-100.0..100.0);
        q.see(rel(quadratic_lower(AffExpr::constant(x), xp).eval(&[]), x * x), 1e-12);
        q.see(rel(quadratic_lower(AffExpr::constant(xp), xp).eval(&[]), xp * xp).abs(), tangency);
    }

    let mut p = Tally::new("taylor_power");
    for _ in 0..samples {
        let alpha: f64 = rng.gen_range(2.05..6.0);
        let a: f64 = rng.gen_range(1e-2..10.0);
        let ap: f64 = rng.gen_range(1e-2..10.0);
        let exact = a.powf(-4.0 / alpha);
        p.see(rel(user_tangent_bound(a, ap, alpha), exact), 1e-12);
        p.see(rel(user_tangent_bound(ap, ap, alpha), ap.powf(-4.0 / alpha)).abs(), tangency);
    }

    let mut l = Tally::new("taylor_log1p");
    for _ in 0..samples {
        let x: f64 = rng.gen_range(0.0..100.0);
        let xp: f64 = rng.gen_range(0.0..100.0);
        // the tangent majorizes the concave log, so exact − tangent ≤ 0
        l.see(rel(x.ln_1p(), log1p_tangent(x, xp)), 1e-12);
        l.see(rel(log1p_tangent(xp, xp), xp.ln_1p()).abs(), tangency);
    }
    vec![e.finish(), q.finish(), p.finish(), l.finish()]
}

/// All rates of one slot recomputed from inner products.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteRates {
    pub r0: f64,
    pub r_priv: Vec<f64>,
    /// `[eve][user]`, worst case over the uncertainty ball
    pub r_eve: Vec<Vec<f64>>,
    pub r_sec: Vec<f64>,
    pub sum_mos: f64,
}

pub fn brute_force_rates(ch: &SlotChannels, bf: &Beamformers, sigma2: f64, qoe: &QoEParams) -> BruteRates {
    let lu = ch.users.len();
    let rx = |h: &[Complex64], w: &[Complex64]| inner(h, w).norm_sqr();
    let worst = |e: &EveChannel, w: &[Complex64]| rx(&e.h_tilde, w) + e.upsilon * power(w);
    let mut r0 = f64::INFINITY;
    let mut r_priv = Vec::with_capacity(lu);
    for (l, h) in ch.users.iter().enumerate() {
        let privates: Vec<f64> = bf.w.iter().map(|w| rx(h, w)).collect();
        let total: f64 = privates.iter().sum();
        r0 = r0.min((1.0 + rx(h, &bf.w0) / (total + sigma2)).log2());
        r_priv.push((1.0 + privates[l] / (total - privates[l] + sigma2)).log2());
    }
    let r_eve: Vec<Vec<f64>> = ch
        .eves
        .iter()
        .map(|e| {
            let all: f64 = worst(e, &bf.w0) + bf.w.iter().map(|w| worst(e, w)).sum::<f64>();
            (0..lu)
                .map(|l| {
                    let s = worst(e, &bf.w[l]);
                    (1.0 + s / (all - s + sigma2)).log2()
                })
                .collect()
        })
        .collect();
    let r_sec: Vec<f64> = (0..lu)
        .map(|l| {
            let leak = r_eve.iter().map(|r| r[l]).fold(0.0, f64::max);
            (r_priv[l] - leak).max(0.0)
        })
        .collect();
    let sum_mos = r_sec
        .iter()
        .map(|&r| {
            if r > 0.0 {
                qoe.lambda1 * r.ln() + qoe.lambda2 + qoe.lambda1 * (qoe.w_l / qoe.omega).ln()
            } else {
                qoe.mos_floor
            }
        })
        .sum();
    BruteRates { r0: if lu == 0 { 0.0 } else { r0 }, r_priv, r_eve, r_sec, sum_mos }
}

fn random_slot(rng: &mut ChaCha8Rng) -> (SlotChannels, Beamformers) {
    let n = rng.gen_range(1..=4);
    let lu = rng.gen_range(1..=4);
    let ke = rng.gen_range(0..=2);
    let ch = SlotChannels {
        users: (0..lu).map(|_| cvec(rng, n, 1.0)).collect(),
        eves: (0..ke)
            .map(|_| EveChannel { h_tilde: cvec(rng, n, 1.0), upsilon: rng.gen_range(0.0..0.5) })
            .collect(),
    };
    let bf = Beamformers { w0: cvec(rng, n, 1.0), w: (0..lu).map(|_| cvec(rng, n, 1.0)).collect() };
    (ch, bf)
}

/// Trace-form rates and the metrics pipeline against [`brute_force_rates`].
pub fn check_rate_agreement(instances: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qoe = QoEParams::default();
    let mut t = Tally::new("rates_trace_vs_inner");
    for _ in 0..instances {
        let (ch, bf) = random_slot(&mut rng);
        let sigma2 = rng.gen_range(0.1..2.0);
        let brute = brute_force_rates(&ch, &bf, sigma2, &qoe);
        let w: Vec<CMat> = bf.all().map(|w| CMat::outer(w, w)).collect();
        let mut worst: f64 = 0.0;
        for (l, h) in ch.users.iter().enumerate() {
            let r = rates::private_rate_trace(&CMat::outer(h, h), &w, l, sigma2);
            worst = worst.max((r - brute.r_priv[l]).abs());
        }
        for (k, e) in ch.eves.iter().enumerate() {
            let g = e.gram_worst();
            for l in 0..ch.users.len() {
                let r = rates::eve_rate_trace(&g, &w, l, sigma2);
                worst = worst.max((r - brute.r_eve[k][l]).abs());
            }
        }
        let m = rates::slot_metrics(&ch, &bf, &RateAllocation::zeros(ch.users.len()), sigma2, &qoe);
        worst = worst.max((m.r0 - brute.r0).abs());
        for l in 0..ch.users.len() {
            worst = worst.max((m.r_sec[l] - brute.r_sec[l]).abs());
        }
        worst = worst.max((m.sum_mos() - brute.sum_mos).abs());
        t.see(worst, 1e-9);
    }
    t.finish()
}

/// `|hᴴw|² = Tr(hhᴴ·wwᴴ)` on random draws.
pub fn check_gram_identity(samples: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("gram_identity");
    for _ in 0..samples {
        let n = rng.gen_range(1..=8);
        let h = cvec(&mut rng, n, 1.0);
        let w = cvec(&mut rng, n, 1.0);
        let tr = CMat::outer(&h, &h).trace_prod(&CMat::outer(&w, &w));
        t.see((tr.re - inner(&h, &w).norm_sqr()).abs().max(tr.im.abs()), 1e-12);
    }
    t.finish()
}

/// `Tr(G₋W) ≤ |hᴴw|² ≤ Tr(G₊W)` for every channel `h = h̃ + e` with `‖e‖ ≤ ε`.
pub fn check_gram_sandwich(samples: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("gram_sandwich");
    for _ in 0..samples {
        let n = rng.gen_range(1..=4);
        let ht = cvec(&mut rng, n, 1.0);
        let eps = rng.gen_range(0.0..0.5);
        let mut e = cvec(&mut rng, n, 1.0);
        let en = power(&e).sqrt();
        let r = eps * rng.gen_range(0.0f64..1.0).powf(1.0 / (2 * n) as f64);
        if en > 0.0 {
            e.iter_mut().for_each(|z| *z *= r / en);
        }
        let h: Vec<Complex64> = ht.iter().zip(&e).map(|(a, b)| a + b).collect();
        let w = cvec(&mut rng, n, 1.0);
        let ups = match uncertainty_radius(&ht, eps) {
            Ok(u) => u,
            Err(_) => {
                t.see(f64::INFINITY, 0.0);
                continue;
            }
        };
        let (hi, lo) = gram_bounds(&ht, ups).expect("nonnegative radius");
        let ww = CMat::outer(&w, &w);
        let truth = inner(&h, &w).norm_sqr();
        let scale = truth.abs().max(1.0);
        t.see((truth - hi.trace_prod(&ww).re) / scale, 1e-12);
        t.see((lo.trace_prod(&ww).re - truth) / scale, 1e-12);
    }
    t.finish()
}

/// Every sampled check at its default sample count.
pub fn run_property_suite(seed: u64) -> Vec<CheckReport> {
    let mut out = vec![check_hyperbolic_soc(10_000, seed)];
    out.extend(check_taylor_bounds(10_000, seed.wrapping_add(1)));
    out.push(check_rate_agreement(1_000, seed.wrapping_add(2)));
    out.push(check_gram_identity(1_000, seed.wrapping_add(3)));
    out.push(check_gram_sandwich(10_000, seed.wrapping_add(4)));
    out
}
