use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsma_qoe::experiment::ExperimentSpec;
use rsma_qoe::model::Scenario;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsma-qoe")).args(args).env("RSMA_WORKERS", "1").output().unwrap()
}

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const SMALL: &str = r#"
seeds = [0, 1]

[sweep]
axis = "users"
values = [1, 2]

[network]
eves = 1
antennas = 2
t_slots = 8
qf_m = [240.0, 250.0]
max_outer_iters = 4
"#;

#[test]
fn shipped_specs_validate() {
    for entry in std::fs::read_dir(specs()).unwrap() {
        let p = entry.unwrap().path();
        let out = bin(&["validate", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", p.display(), text(&out.stderr));
    }
}

#[test]
fn full_spec_spells_out_the_defaults() {
    let s = ExperimentSpec::load(&specs().join("full.toml")).unwrap();
    assert_eq!(s.base, Scenario::default_scenario());
}

#[test]
fn empty_seed_list_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(&spec, "seeds = []\n").unwrap();
    for verb in ["validate", "run"] {
        let out = bin(&[verb, spec.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1));
        assert!(text(&out.stderr).contains("seed list is empty"), "{}", text(&out.stderr));
    }
    assert!(!dir.path().join("results").exists());
}

#[test]
fn unknown_key_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(&spec, "[network]\npower = 3\n").unwrap();
    let out = bin(&["validate", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("power"), "{}", text(&out.stderr));
}

#[test]
fn run_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(&spec, SMALL).unwrap();
    let res = dir.path().join("res");
    let out = bin(&["run", spec.to_str().unwrap(), "--out", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout).lines().filter(|l| l.contains("sum_mos=")).count(), 4);

    let history = std::fs::read_to_string(res.join("history.csv")).unwrap();
    assert!(history.starts_with("sweep_value,seed,outer_iter,sum_mos\n"));
    let summary = std::fs::read_to_string(res.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let timings = std::fs::read_to_string(res.join("timings.csv")).unwrap();
    assert!(timings.starts_with("sweep_value,seed,outer_iter,wall_ms\n"));
    let manifest = std::fs::read_to_string(res.join("MANIFEST")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
    assert!(manifest.contains("seeds = 0,1"));
    assert_eq!(manifest.lines().filter(|l| l.starts_with("run ") && l.contains(" ok ")).count(), 4);

    let again = dir.path().join("again");
    let out = bin(&["run", spec.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for f in ["history.csv", "summary.csv"] {
        assert_eq!(std::fs::read(res.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }

    let out = bin(&["plot", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for f in ["trace.svg", "sweep.svg"] {
        let svg = std::fs::read_to_string(res.join(f)).unwrap();
        assert!(svg.starts_with("<svg"), "{f}");
    }
}

#[test]
fn plot_reports_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("history.csv"), "sweep_value,seed,outer_iter\n1,0,0\n").unwrap();
    let out = bin(&["plot", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("missing column sum_mos"), "{}", text(&out.stderr));
}

#[test]
fn plot_without_results_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["plot", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_prints_one_line_per_check() {
    let out = bin(&["oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().count(), 9);
    assert!(stdout.lines().all(|l| l.ends_with("PASS")), "{stdout}");
}
