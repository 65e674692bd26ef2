use num_complex::Complex64;
use rsma_conic::AffExpr;
use rsma_qoe::bf::soc_secrecy_rows;
use rsma_qoe::channel::{sample_channel, ChannelRealization, EveChannel, SlotChannels};
use rsma_qoe::model::*;
use rsma_qoe::oracle::*;
use rsma_qoe::rates::Beamformers;
use rsma_qoe::Error;

#[test]
fn property_suite_passes() {
    let reports = run_property_suite(7);
    assert_eq!(reports.len(), 8);
    for r in &reports {
        assert!(r.passed(), "{r}");
        assert!(r.to_string().ends_with("PASS"));
    }
}

#[test]
fn soc_boundary_example() {
    let rows = soc_secrecy_rows(AffExpr::constant(2.0), AffExpr::constant(4.0), AffExpr::constant(2.0), 2.0).unwrap();
    let v: Vec<f64> = rows.iter().map(|r| r.eval(&[])).collect();
    assert!((v[0] - 6.0).abs() < 1e-12);
    assert!(((v[1] * v[1] + v[2] * v[2]).sqrt() - 6.0).abs() < 1e-12);
    let origin = soc_secrecy_rows(AffExpr::constant(0.0), AffExpr::constant(0.0), AffExpr::constant(0.0), 3.0).unwrap();
    assert!(origin.iter().all(|r| r.eval(&[]) == 0.0));
}

#[test]
fn small_sweeps_report_sample_counts() {
    let r = check_hyperbolic_soc(50, 1);
    assert_eq!(r.samples, 50);
    assert!(r.passed());
    for r in check_taylor_bounds(100, 2) {
        assert_eq!(r.samples, 200, "{r}");
        assert!(r.passed(), "{r}");
    }
}

#[test]
fn zero_beams_give_zero_rates() {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let ch = SlotChannels {
        users: vec![vec![c(1.0, 0.5), c(-0.3, 0.2)], vec![c(0.1, 0.9), c(0.4, -1.0)]],
        eves: vec![EveChannel { h_tilde: vec![c(0.7, 0.0), c(0.0, 0.7)], upsilon: 0.01 }],
    };
    let r = brute_force_rates(&ch, &Beamformers::zeros(2, 2), 1e-3, &QoEParams::default());
    assert_eq!(r.r0, 0.0);
    assert!(r.r_priv.iter().chain(&r.r_sec).all(|&v| v == 0.0));
    assert!(r.r_eve.iter().flatten().all(|&v| v == 0.0));
    assert_eq!(r.sum_mos, 2.0 * QoEParams::default().mos_floor);
}

fn tiny(t_slots: usize, users: Vec<Point>, eves: Vec<Point>, q0: Point, qf: Point) -> (Scenario, Geometry, ChannelRealization, Vec<Beamformers>) {
    let net = NetworkConfig { users: users.len(), eves: eves.len(), antennas: 2, t_slots, q0, qf, ..NetworkConfig::default() };
    let sc = Scenario::new(net);
    let geo = Geometry { users, eves, trajectory: straight_line(q0, qf, t_slots), z_u: sc.net.z_u };
    let real = sample_channel(&sc.channel, &geo, 2, 11).unwrap();
    let slots = real.slots(&geo);
    let bf = slots.iter().map(|c| rsma_qoe::bf::initial_beamformers(c, 2, sc.net.p_max)).collect();
    (sc, geo, real, bf)
}

fn path_value(real: &ChannelRealization, geo: &Geometry, path: &[Point], bf: &[Beamformers], sc: &Scenario) -> f64 {
    let g = Geometry { trajectory: path.to_vec(), ..geo.clone() };
    let total: f64 = (0..path.len())
        .map(|t| brute_force_rates(&real.slot(&g, t), &bf[t], sc.channel.noise_power, &sc.qoe).sum_mos)
        .sum();
    total / path.len() as f64
}

#[test]
fn forced_path_equals_direct_evaluation() {
    let q0 = [200.0, 250.0];
    let qf = [240.0, 250.0];
    let (sc, geo, real, bf) = tiny(2, vec![[220.0, 100.0]], vec![[400.0, 400.0]], q0, qf);
    let opts = GridOptions { n: 21, relax: false };
    let g = grid_trajectory_oracle(&real, &geo, &bf, &sc.net, sc.channel.noise_power, &sc.qoe, &opts).unwrap();
    let forced = [q0, [220.0, 250.0]];
    assert!((g.path[0][0] - forced[0][0]).abs() < 1e-9 && (g.path[0][1] - forced[0][1]).abs() < 1e-9);
    assert!((g.path[1][0] - forced[1][0]).abs() < 1e-9 && (g.path[1][1] - forced[1][1]).abs() < 1e-9, "{:?}", g.path);
    let direct = path_value(&real, &geo, &forced, &bf, &sc);
    assert!((g.best_sum_mos - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{} vs {direct}", g.best_sum_mos);
}

#[test]
fn mirror_symmetric_instance_has_symmetric_optimum() {
    let q0 = [200.0, 250.0];
    let qf = [236.0, 250.0];
    let (sc, geo, real, bf) = tiny(4, vec![[320.0, 250.0]], vec![[100.0, 250.0]], q0, qf);
    let opts = GridOptions { n: 11, relax: false };
    let g = grid_trajectory_oracle(&real, &geo, &bf, &sc.net, sc.channel.noise_power, &sc.qoe, &opts).unwrap();
    let mirrored: Vec<Point> = g.path.iter().map(|p| [p[0], 500.0 - p[1]]).collect();
    let a = path_value(&real, &geo, &g.path, &bf, &sc);
    let b = path_value(&real, &geo, &mirrored, &bf, &sc);
    assert!((a - g.best_sum_mos).abs() <= 1e-9 * a.abs().max(1.0));
    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn oversized_grid_is_a_size_error() {
    let (sc, geo, real, bf) = tiny(5, vec![[220.0, 100.0]], vec![[400.0, 400.0]], [200.0, 250.0], [240.0, 250.0]);
    let opts = GridOptions { n: 1500, relax: true };
    let r = grid_trajectory_oracle(&real, &geo, &bf, &sc.net, sc.channel.noise_power, &sc.qoe, &opts);
    assert!(matches!(r, Err(Error::Size(_))));
}

#[test]
fn sca_trajectory_sits_between_straight_line_and_grid() {
    for seed in 0..3 {
        let s = trajectory_sanity(seed).unwrap();
        assert!(s.passed(), "{s:?}");
        assert_eq!(s.grid.path.len(), 5);
    }
}
