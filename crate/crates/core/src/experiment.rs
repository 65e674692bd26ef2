//! Seeded sweeps over one scenario parameter, persisted as CSV files plus a
//! MANIFEST.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::ao::{run_aom, AoOptions, SolutionState};
use crate::error::{Error, Result};
use crate::model::{db_to_linear, dbm_to_watts, noise_power_w, Point, Scenario};

/// Environment variable bounding the number of concurrent runs.
pub const WORKERS_ENV: &str = "RSMA_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Outer-iteration trace; values are slot counts.
    Trace,
    Users,
    Antennas,
    TSlots,
    PMaxW,
    OmegaMbit,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Trace => "trace",
            SweepAxis::Users => "users",
            SweepAxis::Antennas => "antennas",
            SweepAxis::TSlots => "t_slots",
            SweepAxis::PMaxW => "p_max_w",
            SweepAxis::OmegaMbit => "omega_mbit",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepAxis::Trace | SweepAxis::Users | SweepAxis::Antennas | SweepAxis::TSlots)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base: Scenario,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    output_dir: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    sweep: Option<SweepFile>,
    #[serde(default)]
    network: NetworkFile,
    #[serde(default)]
    qoe: QoeFile,
    #[serde(default)]
    channel: ChannelFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axis: SweepAxis,
    #[serde(default)]
    values: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    users: Option<usize>,
    eves: Option<usize>,
    antennas: Option<usize>,
    t_slots: Option<usize>,
    slot_s: Option<f64>,
    p_max_w: Option<f64>,
    p_max_dbm: Option<f64>,
    eta_bps_hz: Option<f64>,
    conv_eps: Option<f64>,
    max_outer_iters: Option<usize>,
    max_inner_iters: Option<usize>,
    inner_tol: Option<f64>,
    v_u_mps: Option<f64>,
    z_u_m: Option<f64>,
    q0_m: Option<Point>,
    qf_m: Option<Point>,
    area_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QoeFile {
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    w_l_hz: Option<f64>,
    omega_mbit: Option<f64>,
    mos_floor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    alpha: Option<f64>,
    pl_los_db: Option<f64>,
    pl_nlos_db: Option<f64>,
    rician: Option<f64>,
    noise_dbm_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    csi_eps: Option<f64>,
    wavelength_m: Option<f64>,
    shadow_std_db: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ExperimentSpec {
    /// Parses a spec; unset keys keep the default scenario values.
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: SpecFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut sc = Scenario::default_scenario();
        let n = f.network;
        let net = &mut sc.net;
        set(&mut net.users, n.users);
        set(&mut net.eves, n.eves);
        set(&mut net.antennas, n.antennas);
        set(&mut net.t_slots, n.t_slots);
        set(&mut net.slot_seconds, n.slot_s);
        if n.p_max_w.is_some() && n.p_max_dbm.is_some() {
            return Err(Error::Parse("give p_max_w or p_max_dbm, not both".into()));
        }
        set(&mut net.p_max, n.p_max_w.or(n.p_max_dbm.map(dbm_to_watts)));
        set(&mut net.eta, n.eta_bps_hz);
        set(&mut net.conv_eps, n.conv_eps);
        set(&mut net.max_outer_iters, n.max_outer_iters);
        set(&mut net.max_inner_iters, n.max_inner_iters);
        set(&mut net.inner_tol, n.inner_tol);
        set(&mut net.v_u, n.v_u_mps);
        set(&mut net.z_u, n.z_u_m);
        set(&mut net.q0, n.q0_m);
        set(&mut net.qf, n.qf_m);
        set(&mut sc.area_m, n.area_m);

        let q = f.qoe;
        set(&mut sc.qoe.lambda1, q.lambda1);
        set(&mut sc.qoe.lambda2, q.lambda2);
        set(&mut sc.qoe.w_l, q.w_l_hz);
        set(&mut sc.qoe.omega, q.omega_mbit.map(|m| m * 1e6));
        set(&mut sc.qoe.mos_floor, q.mos_floor);

        let c = f.channel;
        let ch = &mut sc.channel;
        set(&mut ch.alpha, c.alpha);
        set(&mut ch.pl_los, c.pl_los_db.map(db_to_linear));
        set(&mut ch.pl_nlos, c.pl_nlos_db.map(db_to_linear));
        set(&mut ch.rician, c.rician);
        if c.noise_dbm_hz.is_some() || c.bandwidth_hz.is_some() {
            ch.noise_power = noise_power_w(c.noise_dbm_hz.unwrap_or(-174.0), c.bandwidth_hz.unwrap_or(250e3));
        }
        set(&mut ch.csi_eps, c.csi_eps);
        set(&mut ch.wavelength, c.wavelength_m);
        set(&mut ch.shadow_std_db, c.shadow_std_db);

        let (axis, values) = match f.sweep {
            Some(s) => (s.axis, s.values),
            None => (SweepAxis::Trace, Vec::new()),
        };
        let values = if axis == SweepAxis::Trace && values.is_empty() { vec![sc.net.t_slots as f64] } else { values };
        Ok(Self {
            base: sc,
            axis,
            values,
            seeds: f.seeds.unwrap_or_else(default_seeds),
            output_dir: f.output_dir.unwrap_or_else(|| PathBuf::from("results")),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Scenario for one sweep value.
    pub fn scenario_at(&self, value: f64) -> Scenario {
        let mut sc = self.base.clone();
        let n = value.round().max(0.0) as usize;
        match self.axis {
            SweepAxis::Trace | SweepAxis::TSlots => sc.net.t_slots = n,
            SweepAxis::Users => sc.net.users = n,
            SweepAxis::Antennas => sc.net.antennas = n,
            SweepAxis::PMaxW => sc.net.p_max = value,
            SweepAxis::OmegaMbit => sc.qoe.omega = value * 1e6,
        }
        sc
    }

    pub fn validate(&self) -> Vec<String> {
        let mut r = Vec::new();
        if self.seeds.is_empty() {
            r.push("seed list is empty".to_string());
        }
        if self.values.is_empty() {
            r.push(format!("sweep over {} has no values", self.axis.as_str()));
        }
        for &v in &self.values {
            if !v.is_finite() || (self.axis.integral() && (v.fract() != 0.0 || v < 0.0)) {
                r.push(format!("{} = {v} is not a valid value", self.axis.as_str()));
                continue;
            }
            for m in self.scenario_at(v).validate() {
                r.push(format!("{} = {v}: {m}", self.axis.as_str()));
            }
        }
        r
    }

    /// SHA-256 of the resolved spec.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub sweep_value: f64,
    pub seed: u64,
    pub outcome: std::result::Result<SolutionState, String>,
    /// The failure was raised by the conic solver.
    pub solver_failure: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub dir: PathBuf,
}

impl ExperimentResult {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn is_solver_error(e: &Error) -> bool {
    match e {
        Error::Conic(_) => true,
        Error::Outer { source, .. } => is_solver_error(source),
        _ => false,
    }
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (sweep value, seed) pair and writes `history.csv`,
/// `timings.csv`, `summary.csv` and `MANIFEST` to the output directory.
/// Failed runs are recorded, not fatal.
pub fn run_experiment(spec: &ExperimentSpec, opts: &AoOptions) -> Result<ExperimentResult> {
    let report = spec.validate();
    if !report.is_empty() {
        return Err(Error::Config(report));
    }
    std::fs::create_dir_all(&spec.output_dir)?;
    let jobs: Vec<(f64, u64)> = spec.values.iter().flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Init(format!("worker pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(v, seed)| {
                let r = run_aom(&spec.scenario_at(v), seed, opts);
                let solver_failure = r.as_ref().err().is_some_and(is_solver_error);
                RunRecord { sweep_value: v, seed, outcome: r.map_err(|e| e.to_string()), solver_failure }
            })
            .collect()
    });
    let result = ExperimentResult { runs, dir: spec.output_dir.clone() };
    write_outputs(spec, &result)?;
    Ok(result)
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn write_outputs(spec: &ExperimentSpec, res: &ExperimentResult) -> Result<()> {
    let dir = &spec.output_dir;
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));

    let mut h = csv::Writer::from_path(dir.join("history.csv")).map_err(csv_err)?;
    h.write_record(["sweep_value", "seed", "outer_iter", "sum_mos"]).map_err(csv_err)?;
    let mut w = csv::Writer::from_path(dir.join("timings.csv")).map_err(csv_err)?;
    w.write_record(["sweep_value", "seed", "outer_iter", "wall_ms"]).map_err(csv_err)?;
    for r in &res.runs {
        let Ok(s) = &r.outcome else { continue };
        let (v, seed) = (num(r.sweep_value), r.seed.to_string());
        h.write_record([v.as_str(), &seed, "0", &num(s.initial_sum_mos)]).map_err(csv_err)?;
        for (e, ms) in s.history.iter().zip(&s.wall_ms) {
            let it = e.outer_iter.to_string();
            h.write_record([v.as_str(), &seed, &it, &num(e.sum_mos)]).map_err(csv_err)?;
            w.write_record([v.as_str(), &seed, &it, &ms.to_string()]).map_err(csv_err)?;
        }
    }
    h.flush()?;
    w.flush()?;

    let mut s = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
    s.write_record(["sweep_value", "mean_sum_mos", "std_sum_mos", "runs"]).map_err(csv_err)?;
    for &v in &spec.values {
        let finals: Vec<f64> = res
            .runs
            .iter()
            .filter(|r| r.sweep_value == v)
            .filter_map(|r| r.outcome.as_ref().ok().map(SolutionState::sum_mos))
            .collect();
        let (mean, std) = mean_std(&finals);
        s.write_record([num(v), num(mean), num(std), finals.len().to_string()]).map_err(csv_err)?;
    }
    s.flush()?;

    let mut m = String::new();
    writeln!(m, "config_sha256 = {}", spec.config_hash()).unwrap();
    writeln!(m, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(m, "axis = {}", spec.axis.as_str()).unwrap();
    writeln!(m, "values = {}", spec.values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")).unwrap();
    writeln!(m, "seeds = {}", spec.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")).unwrap();
    writeln!(m, "failures = {}", res.failures()).unwrap();
    writeln!(m, "scenario = {}", serde_json::to_string(&spec.base).expect("scenario serializes")).unwrap();
    for r in &res.runs {
        let status = match &r.outcome {
            Ok(s) => format!(
                "ok outer_iters={} converged={} sum_mos={}",
                s.outer_iters(),
                s.converged,
                num(s.sum_mos())
            ),
            Err(e) => format!("failed {e}"),
        };
        writeln!(m, "run sweep_value={} seed={} {status}", num(r.sweep_value), r.seed).unwrap();
    }
    std::fs::write(dir.join("MANIFEST"), m)?;
    Ok(())
}

/// Mean and population standard deviation; NaN for an empty slice.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
