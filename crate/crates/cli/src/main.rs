use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rsma_qoe::ao::AoOptions;
use rsma_qoe::experiment::{run_experiment, worker_count, ExperimentSpec, WORKERS_ENV};
use rsma_qoe::{oracle, plot, Error};

const OK: u8 = 0;
const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;
const SOLVER: u8 = 3;

/// Secure UAV rate-splitting sum-MOS experiments.
#[derive(Parser)]
#[command(name = "rsma-qoe", version, after_help = "Exit codes: 0 ok, 1 invalid input, 2 runtime failure, 3 solver failure.")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check an experiment spec without running it.
    Validate { spec: PathBuf },
    /// Run every sweep point and seed of a spec.
    Run {
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG charts from a results directory.
    Plot { dir: PathBuf },
    /// Run the oracle suite and print one line per check.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => VALIDATION,
        Error::Conic(_) => SOLVER,
        Error::Outer { source, .. } => code_for(source),
        _ => RUNTIME,
    }
}

fn fail(e: Error) -> ExitCode {
    match &e {
        Error::Config(report) => {
            eprintln!("invalid configuration:");
            for m in report {
                eprintln!("  {m}");
            }
        }
        e => eprintln!("error: {e}"),
    }
    ExitCode::from(code_for(&e))
}

fn validate(path: PathBuf) -> ExitCode {
    let spec = match ExperimentSpec::load(&path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let report = spec.validate();
    if !report.is_empty() {
        return fail(Error::Config(report));
    }
    println!(
        "ok: {} sweep over {} value(s) x {} seed(s), output {}",
        spec.axis.as_str(),
        spec.values.len(),
        spec.seeds.len(),
        spec.output_dir.display()
    );
    ExitCode::from(OK)
}

fn run(path: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let mut spec = match ExperimentSpec::load(&path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if let Some(o) = out {
        spec.output_dir = o;
    }
    eprintln!("running with {} worker(s) (set {WORKERS_ENV} to change)", worker_count());
    let res = match run_experiment(&spec, &AoOptions::default()) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    for r in &res.runs {
        match &r.outcome {
            Ok(s) => println!(
                "{}={} seed={} sum_mos={:.6} outer_iters={} converged={}",
                spec.axis.as_str(),
                r.sweep_value,
                r.seed,
                s.sum_mos(),
                s.outer_iters(),
                s.converged
            ),
            Err(e) => println!("{}={} seed={} FAILED {e}", spec.axis.as_str(), r.sweep_value, r.seed),
        }
    }
    println!("results in {}", res.dir.display());
    if res.runs.iter().any(|r| r.solver_failure) {
        ExitCode::from(SOLVER)
    } else if res.failures() > 0 {
        ExitCode::from(RUNTIME)
    } else {
        ExitCode::from(OK)
    }
}

fn plot_dir(dir: PathBuf) -> ExitCode {
    match plot::emit_plots(&dir) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::from(OK)
        }
        Err(e) => fail(e),
    }
}

fn run_oracle(seed: u64) -> ExitCode {
    let mut ok = true;
    for r in oracle::run_property_suite(seed) {
        ok &= r.passed();
        println!("{r}");
    }
    match oracle::trajectory_sanity(seed) {
        Ok(s) => {
            ok &= s.passed();
            println!(
                "trajectory_grid initial={:.6} sca={:.6} grid={:.6} slack={:.3e} {}",
                s.initial,
                s.sca,
                s.grid.best_sum_mos,
                s.grid.resolution_slack,
                if s.passed() { "PASS" } else { "FAIL" }
            );
        }
        Err(e) => return fail(e),
    }
    ExitCode::from(if ok { OK } else { RUNTIME })
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Validate { spec } => validate(spec),
        Cmd::Run { spec, out } => run(spec, out),
        Cmd::Plot { dir } => plot_dir(dir),
        Cmd::Oracle { seed } => run_oracle(seed),
    }
}
