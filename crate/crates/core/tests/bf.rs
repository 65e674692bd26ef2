use num_complex::Complex64;
use rsma_conic::{solve, AffExpr, ConicProgram, SolveStatus, SolverSettings};
use rsma_qoe::bf::*;
use rsma_qoe::channel::{sample_channel, EveChannel, SlotChannels};
use rsma_qoe::model::*;
use rsma_qoe::rates::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn default_slots(seed: u64) -> (Scenario, Vec<SlotChannels>) {
    let sc = Scenario::default_scenario();
    let geo = initial_geometry(&sc, seed);
    let real = sample_channel(&sc.channel, &geo, sc.net.antennas, seed).unwrap();
    let slots = real.slots(&geo);
    (sc, slots)
}

fn orthogonal_pair() -> SlotChannels {
    SlotChannels {
        users: vec![vec![c(1.0, 0.0), c(0.0, 0.0)]],
        eves: vec![EveChannel { h_tilde: vec![c(0.0, 0.0), c(0.8, 0.0)], upsilon: 0.0 }],
    }
}

fn net_for(users: usize, eves: usize, antennas: usize, p_max: f64) -> NetworkConfig {
    NetworkConfig { users, eves, antennas, t_slots: 1, p_max, ..NetworkConfig::default() }
}

#[test]
fn zero_budget_gives_zero_beams_and_floor() {
    let (mut sc, slots) = default_slots(3);
    sc.net.p_max = 0.0;
    let slots = &slots[..2];
    let init = vec![Beamformers::zeros(4, 4); 2];
    let res = solve_bf(slots, &init, &sc.net, sc.channel.noise_power, &sc.qoe, &BfOptions::default()).unwrap();
    for r in &res {
        assert_eq!(r.bf.total_power(), 0.0);
        assert_eq!(r.aux.status, BfStatus::ZeroBudget);
    }
    let bf: Vec<_> = res.iter().map(|r| r.bf.clone()).collect();
    let ra: Vec<_> = res.iter().map(|r| r.ra.clone()).collect();
    let m = evaluate_all(slots, &bf, &ra, sc.channel.noise_power, &sc.qoe).unwrap();
    assert_eq!(m.sum_mos, 4.0 * sc.qoe.mos_floor);
}

#[test]
fn orthogonal_eavesdropper_leaks_nothing_and_power_helps() {
    let ch = orthogonal_pair();
    let qoe = QoEParams::default();
    let mut r_sec = Vec::new();
    for p in [1.0, 4.0] {
        let net = net_for(1, 1, 2, p);
        let init = initial_beamformers(&ch, 2, p);
        let res = solve_bf_slot(&ch, &init, &net, 1.0, &qoe, &BfOptions::default()).unwrap();
        let m = slot_metrics(&ch, &res.bf, &res.ra, 1.0, &qoe);
        assert!((m.r_sec[0] - m.r_priv[0]).abs() < 1e-3, "{m:?}");
        assert!(res.aux.pi[0].abs() < 1e-3);
        r_sec.push(m.r_sec[0]);
    }
    assert!(r_sec[1] > r_sec[0], "{r_sec:?}");
}

#[test]
fn objective_epigraph_at_unit_secrecy() {
    for enc in [BfEncoding::ExpCone, BfEncoding::Quadratic] {
        let mut prog = ConicProgram::new();
        let t = prog.add_var();
        prog.equal_zero(AffExpr::from(t) - 1.0);
        let obj = objective_epigraph_block(&mut prog, &[t], 1.0, enc, &[1.0]);
        prog.maximize(obj.clone());
        let sol = solve(&prog, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(obj.eval(&sol.x).abs() < 1e-7, "{enc:?}: {}", obj.eval(&sol.x));
    }
}

fn fixed_common_rate(h0: f64, h1: f64, p0: Complex64) -> f64 {
    let mut prog = ConicProgram::new();
    let beams: Vec<CVar> = (0..2).map(|_| CVar::new(&mut prog, 1)).collect();
    let p = vec![vec![p0], vec![c(h1, 0.0)]];
    for (b, v) in beams.iter().zip(&p) {
        b.fix(&mut prog, v);
    }
    let users = vec![GramFactor::rank_one(vec![c(h0, 0.0)])];
    let a = prog.add_vars(1);
    common_rate_block(&mut prog, &a, &beams, &users, &p);
    prog.maximize(a[0].into());
    let sol = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.x[a[0].0]
}

#[test]
fn common_rate_examples() {
    // |h₀|² = 3 relative to noise, no private power: log₂(1 + 3) = 2
    assert!((fixed_common_rate(3f64.sqrt(), 0.0, c(1.0, 0.0)) - 2.0).abs() < 1e-6);
    // no common beam: the split is forced to zero
    assert!(fixed_common_rate(3f64.sqrt(), 0.0, c(0.0, 0.0)).abs() < 1e-6);
    assert!(fixed_common_rate(1.0, 0.5, c(0.0, 0.0)).abs() < 1e-6);

    let mut prog = ConicProgram::new();
    let beams: Vec<CVar> = (0..2).map(|_| CVar::new(&mut prog, 1)).collect();
    let p = vec![vec![c(0.3, 0.1)], vec![c(0.2, -0.4)]];
    let users = vec![GramFactor::rank_one(vec![c(1.0, 0.5)])];
    let a = prog.add_vars(1);
    common_rate_block(&mut prog, &a, &beams, &users, &p);
    prog.equal_zero(a[0].into());
    let sol = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
}

fn finite_nondecreasing(v: &[f64], slack: f64) -> bool {
    let f: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    f.windows(2).all(|w| w[1] >= w[0] - slack)
}

#[test]
fn inner_ascent_and_restriction_on_seeded_instances() {
    for seed in 0..20u64 {
        let (sc, slots) = default_slots(seed);
        let picks = [(seed as usize * 7) % slots.len(), (seed as usize * 13 + 5) % slots.len()];
        for &t in &picks {
            let ch = &slots[t];
            let init = initial_beamformers(ch, sc.net.antennas, sc.net.p_max);
            let r = solve_bf_slot(ch, &init, &sc.net, sc.channel.noise_power, &sc.qoe, &BfOptions::default()).unwrap();
            assert!(finite_nondecreasing(&r.aux.inner_objective, 1e-7), "seed {seed} slot {t}: {:?}", r.aux.inner_objective);
            assert!(r.bf.total_power() <= sc.net.p_max * (1.0 + 1e-6));
            assert!(r.aux.taylor_ok, "seed {seed} slot {t}");
            assert_eq!(r.aux.beta, 2f64.powf(sc.net.eta));
            let m = slot_metrics(ch, &r.bf, &r.ra, sc.channel.noise_power, &sc.qoe);
            if r.aux.status != BfStatus::SecrecyInfeasible {
                for &mg in &m.margin {
                    assert!(mg >= sc.net.eta - 1e-4, "seed {seed} slot {t}: margin {mg}");
                }
            }
            for (d, w) in r.aux.rank_one_defect.iter().zip(&r.aux.rank_one_norm) {
                assert!(d.is_finite() && *w >= 0.0);
            }
            let r0 = common_rate(&ch.users, &r.bf, sc.channel.noise_power);
            assert!(r.ra.a.iter().sum::<f64>() <= r0.max(0.0) + 1e-9);
            assert!(r.ra.a.iter().all(|&a| a >= 0.0));
        }
    }
}

#[test]
fn extracted_logs_match_recomputed_rates() {
    let (sc, slots) = default_slots(11);
    let mut checked = 0;
    for ch in slots.iter().step_by(4) {
        let init = initial_beamformers(ch, sc.net.antennas, sc.net.p_max);
        let r = solve_bf_slot(ch, &init, &sc.net, sc.channel.noise_power, &sc.qoe, &BfOptions::default()).unwrap();
        if r.aux.status != BfStatus::Converged {
            continue;
        }
        let m = slot_metrics(ch, &r.bf, &r.ra, sc.channel.noise_power, &sc.qoe);
        for l in 0..sc.net.users {
            let lb = (r.aux.c1[l] - r.aux.c2[l]) / std::f64::consts::LN_2;
            assert!((lb - m.r_priv[l]).abs() < 1e-4, "user {l}: {lb} vs {}", m.r_priv[l]);
        }
        for (d, w) in r.aux.rank_one_defect.iter().zip(&r.aux.rank_one_norm) {
            assert!(*d <= 1e-3 * w.max(1.0), "{d} {w}");
        }
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn encodings_agree() {
    let (mut sc, slots) = default_slots(2);
    sc.net.max_inner_iters = 300;
    let picks: Vec<SlotChannels> = slots.iter().step_by(8).cloned().collect();
    let init: Vec<_> = picks.iter().map(|c| initial_beamformers(c, sc.net.antennas, sc.net.p_max)).collect();
    let mut mos = Vec::new();
    for enc in [BfEncoding::ExpCone, BfEncoding::Quadratic] {
        let opts = BfOptions { encoding: enc, ..BfOptions::default() };
        let res = solve_bf(&picks, &init, &sc.net, sc.channel.noise_power, &sc.qoe, &opts).unwrap();
        let bf: Vec<_> = res.iter().map(|r| r.bf.clone()).collect();
        let ra: Vec<_> = res.iter().map(|r| r.ra.clone()).collect();
        mos.push(evaluate_all(&picks, &bf, &ra, sc.channel.noise_power, &sc.qoe).unwrap().sum_mos);
    }
    assert!((mos[0] - mos[1]).abs() < 1e-3, "{mos:?}");
}

#[test]
fn zero_beams_are_reinitialized_and_eta_zero_is_bumped() {
    let (mut sc, slots) = default_slots(4);
    sc.net.eta = 0.0;
    let ch = &slots[0];
    let init = Beamformers::zeros(4, 4);
    let r = solve_bf_slot(ch, &init, &sc.net, sc.channel.noise_power, &sc.qoe, &BfOptions::default()).unwrap();
    assert_eq!(r.aux.beta, 2f64.powf(ETA_FLOOR));
    assert!(r.bf.w.iter().all(|w| w.iter().any(|z| z.norm() > 0.0)));
    assert!(solve_bf(&slots[..2], &[init], &sc.net, 1.0, &sc.qoe, &BfOptions::default()).is_err());
}
