//! End-to-end runs of the pipeline and the `cgle` binary.

use std::fs;
use std::process::Command as Process;

use cgle_cli::pipeline::{read_snapshots, KERNEL_CSV, SNAPSHOTS_CSV, SUMMARY_JSON, TRACE_CSV};
use cgle_cli::{exit_code, run_command, run_scenario, Command, Options, RunConfig, Summary};

const REFERENCE: &str = "
[plant]
a2_re = 12
[target]
c = 5
[grid]
n_x = 51
dt = 1e-3
t_end = 0.8
[initial]
rho = sin(pi*x) + x
iota = x*(1-x)
[checks]
min_decay_rate = 12.64
max_kernel_residual = 5e-1
max_composition = 5e-2
";

fn opts(dir: &std::path::Path) -> Options {
    Options {
        out_dir: Some(dir.to_path_buf()),
        ..Options::default()
    }
}

#[test]
fn matched_open_loop_with_zero_data_is_trivial() {
    let cfg = RunConfig::parse(
        "[plant]\na2_re = -1\n[target]\nc = 1\n[grid]\nn_x = 21\nt_end = 0.2\ndt = 1e-2\n\
         [initial]\nrho = 0\n[control]\nclosed_loop = false\n\
         [checks]\nmax_kernel_residual = 0\nmax_target_residual = 0\nmax_composition = 0\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_scenario(&cfg, &opts(dir.path()));
    assert!(s.complete, "{:?}", s.error);
    let sim = s.simulation.as_ref().unwrap();
    assert_eq!(sim.final_l2, 0.0);
    assert!(s.residuals.values().all(|r| r.max_abs_residual == 0.0));
    assert_eq!(s.composition_deviation, Some(0.0));
    assert_eq!(exit_code(&s), 0);
}

#[test]
fn non_analytic_coefficients_are_refused_before_solving() {
    let cfg = RunConfig::parse("[plant]\na2_re = 12\nanalytic_in_t = false\n[grid]\nn_x = 21\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_scenario(&cfg, &opts(dir.path()));
    assert!(!s.complete);
    assert_eq!(exit_code(&s), 2);
    assert!(!dir.path().join(KERNEL_CSV).exists());
    let on_disk: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(exit_code(&on_disk), 2);
}

#[test]
fn reference_plant_passes_its_checks() {
    let cfg = RunConfig::parse(REFERENCE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_scenario(&cfg, &opts(dir.path()));
    assert!(s.complete, "{:?}", s.error);
    assert!(s.checks.iter().all(|c| c.passed), "{:#?}", s.checks);
    assert_eq!(exit_code(&s), 0);
    let trace = fs::read_to_string(dir.path().join(TRACE_CSV)).unwrap();
    assert!(trace.starts_with("time,l2,h1,p_R,p_I\n"));
    assert_eq!(trace.lines().count(), 802);

    // tightening a threshold flips the exit status
    let mut strict = cfg.clone();
    strict.checks.min_decay_rate = Some(100.0);
    let s = run_scenario(&strict, &opts(dir.path()));
    assert_eq!(exit_code(&s), 1);
}

#[test]
fn subcommands_compose() {
    let cfg = RunConfig::parse(REFERENCE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_command(&cfg, Command::Kernel, &opts(dir.path()));
    assert!(s.complete && s.simulation.is_none());
    assert!(s.kernel.as_ref().unwrap().dominance_worst_ratio.unwrap() <= 1.0);

    let mut o = opts(dir.path());
    o.kernel_file = Some(dir.path().join(KERNEL_CSV));
    let s = run_command(&cfg, Command::Simulate, &o);
    assert!(s.complete, "{:?}", s.error);
    assert!(s.kernel.is_none());
    let sim = s.simulation.unwrap();
    assert!(sim.max_transformed_boundary.unwrap() < 1e-10);

    let s = run_command(&cfg, Command::Verify, &opts(dir.path()));
    assert!(s.complete, "{:?}", s.error);
    assert!(s.residuals.contains_key("target"));
    assert!(s.composition_deviation.unwrap() < 5e-2);

    let back = read_snapshots(&dir.path().join(SNAPSHOTS_CSV)).unwrap();
    assert_eq!(back.snapshots.unwrap()[0].rho.len(), 51);
}

#[test]
fn binary_reports_through_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.ini");
    fs::write(&config, REFERENCE).unwrap();
    let out = dir.path().join("out");
    let status = Process::new(env!("CARGO_BIN_EXE_cgle"))
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .args(["--seed", "3"])
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out.join(SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(summary.seed, 3);
    assert!(summary.horizon_scaled_coefficients);

    fs::write(&config, "[plant]\nanalytic_in_t = false\n").unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_cgle"))
        .args(["kernel", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let status = Process::new(env!("CARGO_BIN_EXE_cgle")).arg("run").env("RUST_LOG", "off").status().unwrap();
    assert_ne!(status.code(), Some(0));
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("ini") {
            let cfg = RunConfig::load(&path).unwrap();
            cfg.validate().unwrap();
            cfg.normalized_plant().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
