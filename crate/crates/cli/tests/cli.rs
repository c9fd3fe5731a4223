use std::fs;
use std::path::Path;

use antisync_cli::commands::{run_simulate, run_sweep, run_variance};
use antisync_cli::{main_with_args, RunConfig, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_ORACLE};

/// A shortened baseline: 3×10⁴ time units with a 5×10³ trailing window.
const SHORT: &[&str] = &[
    "--set",
    "horizon=3e4",
    "--set",
    "window=5e3",
    "--set",
    "readout_time=3e4",
];

fn run(cmd: &str, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["antisync", cmd, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    main_with_args(args)
}

fn short_config(extra: &str) -> RunConfig {
    RunConfig::parse(&format!(
        "horizon = 3e4\nwindow = 5e3\nreadout_time = 3e4\n{extra}"
    ))
    .unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run("simulate", a.path(), SHORT), EXIT_OK);
    assert_eq!(run("simulate", b.path(), SHORT), EXIT_OK);
    for f in ["trajectory.csv", "phases.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let s = summary(a.path());
    assert_eq!(s["command"], "simulate");
    assert!(s["locked"].is_boolean());
    let header = fs::read_to_string(a.path().join("phases.csv")).unwrap();
    assert!(header.starts_with("t,phi_m,phi_d,sum,diff,"));
}

#[test]
fn decoupled_atoms_do_not_lock() {
    let o = run_simulate(&short_config("g_d = 0")).unwrap();
    assert!(!o.phases.locking.locked);
}

#[test]
fn undriven_system_does_not_oscillate() {
    let dir = tempfile::tempdir().unwrap();
    let mut extra = SHORT.to_vec();
    extra.extend(["--set", "eta=0"]);
    assert_eq!(run("simulate", dir.path(), &extra), EXIT_OK);
    let s = summary(dir.path());
    assert_eq!(s["locked"], false);
    assert_eq!(s["oscillating"], false);
    assert_eq!(s["limit_cycle_converged"], false);
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "# short run\nhorizon = 3e4\nwindow = 5e3\neta = 2000\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let code = main_with_args([
        "antisync",
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "eta=2500",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(summary(&out)["eta"], 2500.0);
}

#[test]
fn configuration_errors_have_their_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "bogus=1",
        "kappa=-1",
        "eta_grid=3000,2000",
        "horizon=abc",
        "transient=5e5",
        "no_equals_sign",
    ] {
        assert_eq!(
            run("simulate", dir.path(), &["--set", bad]),
            EXIT_CONFIG,
            "{bad}"
        );
    }
    assert_eq!(main_with_args(["antisync", "frobnicate"]), EXIT_CONFIG);
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn numerical_failures_have_their_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--set",
        "solver=rk4",
        "--set",
        "step=3",
        "--set",
        "stride=3",
        "--set",
        "dense_stride=3",
        "--set",
        "horizon=3e4",
        "--set",
        "window=5e3",
    ];
    let code = run("simulate", dir.path(), &args);
    assert_eq!(code, EXIT_NUMERICAL);
}

#[test]
fn diagnostic_variance_is_identically_zero() {
    let o = run_variance(
        &RunConfig::parse("horizon = 2000\ntransient = 500\ncov_stride = 50\ndiagnostic = true")
            .unwrap(),
    )
    .unwrap();
    assert_eq!(o.runs.len(), 2);
    for run in &o.runs {
        assert_eq!(run.samples.len(), 41);
        // The mean field starts at the origin, where the phases are undefined.
        assert!(run.samples[0].var_phase_sum.is_nan());
        for s in &run.samples[1..] {
            assert_eq!(s.var_phase_sum, 0.0, "t = {}", s.t);
        }
    }
}

#[test]
fn variance_outputs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "--set",
        "horizon=500",
        "--set",
        "transient=100",
        "--set",
        "cov_stride=50",
    ];
    assert_eq!(run("variance", a.path(), &args), EXIT_OK);
    assert_eq!(run("variance", b.path(), &args), EXIT_OK);
    for f in ["covariance.csv", "variance.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
        // Two temperatures, eleven samples each, plus the header.
        assert_eq!(String::from_utf8(x).unwrap().lines().count(), 23, "{f}");
    }
}

#[test]
fn single_point_sweep_matches_simulate() {
    let cfg = short_config("eta_grid = 3000");
    let sweep = run_sweep(&cfg);
    let sim = run_simulate(&cfg).unwrap();
    assert_eq!(sweep.rows.len(), 1);
    let row = &sweep.rows[0];
    assert_eq!(row.status, "ok");
    assert!(sim.phases.locking.locked);
    assert!((row.locked_phase_sum - sim.phases.locking.locked_value).abs() < 1e-4);
    assert!(row.discord.is_finite() && row.discord >= 0.0);
    assert!(sweep.spearman.is_none());
}

#[test]
fn sweep_rows_follow_the_grid_and_record_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SHORT.to_vec();
    // An infinite drive is rejected for that point only.
    args.extend([
        "--set",
        "eta_grid=2000,3000,inf",
        "--set",
        "sweep_tolerance=1e-9",
    ]);
    assert_eq!(run("sweep", dir.path(), &args), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "eta,locked_phase_sum,D_G,S_p,S_a,var_phase_sum,status"
    );
    let etas: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(etas, vec![2000.0, 3000.0, f64::INFINITY]);
    assert!(lines[2].ends_with(",ok"), "{}", lines[2]);
    assert!(
        lines[3].starts_with("inf,nan,nan,nan,nan,nan,error: "),
        "{}",
        lines[3]
    );
}

#[test]
fn oracle_with_few_trajectories_passes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            "oracle",
            dir.path(),
            &["--set", "n_traj=100", "--seed", "1"]
        ),
        EXIT_OK
    );
    let text = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    // Five record times, 21 entries each.
    assert_eq!(text.lines().count(), 1 + 5 * 21);
}

#[test]
fn oracle_detects_a_corrupted_drift() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--set",
        "n_traj=1000",
        "--set",
        "g_d=0.5",
        "--set",
        "mc_convention=strict_paper",
    ];
    assert_eq!(run("oracle", dir.path(), &args), EXIT_ORACLE);
}
