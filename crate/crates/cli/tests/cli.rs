//! End-to-end checks of the `seqtest` binary: exit codes, output formats,
//! byte-level determinism, and stream round-trips.

use std::path::Path;
use std::process::{Command, Output};

use seqtest::dgp::mix_seed;

fn seqtest_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqtest"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = seqtest_bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"))
}

#[test]
fn calibrate_rho_prints_the_tuned_value() {
    let out = run_ok(&["calibrate-rho", "--t-star", "1294", "--alpha", "0.1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rho: f64 = text.trim().parse().expect("a decimal number");
    assert!((rho - 0.060_000_286_740_788_854).abs() < 1e-12);
}

#[test]
fn calibrate_rho_rejects_alpha_at_one_half() {
    let out = seqtest_bin()
        .args(["calibrate-rho", "--t-star", "100", "--alpha", "0.5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_analyzes_a_small_stream_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("stream.csv");
    std::fs::write(&input, "x1,x2,y\n0.1,0.2,0.7\n0.5,0.5,0.4\n0.9,0.1,0.6\n").unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "run",
        "--input",
        input.to_str().unwrap(),
        "--t0",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let records = read(&out_dir.join("records.csv"));
    assert!(records.starts_with("t,phi,weight,psi_bar,v_hat,lower_bound,rejected\n"));
    assert_eq!(records.lines().count(), 4);
    let summary = read(&out_dir.join("summary.json"));
    assert!(summary.contains("\"t_consumed\": 3"));
    assert!(summary.contains("\"alpha\": 0.1"), "summary echoes the config");
}

#[test]
fn malformed_propensity_exits_with_code_two_and_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "x1,a,y,pi1\n0.1,1,1,0.5\n0.9,0,1,1.2\n").unwrap();
    let out = seqtest_bin()
        .args(["run", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr should name the line: {stderr}");
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    std::fs::write(&input, "x1,y\n0.1,0.5\n").unwrap();
    let out = seqtest_bin()
        .args(["run", "--input", input.to_str().unwrap(), "--alpha", "2.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_byte_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--method".into(),
            "binned".into(),
            "--dgp".into(),
            "null".into(),
            "--horizon".into(),
            "400".into(),
            "--replicates".into(),
            "8".into(),
            "--t0".into(),
            "50".into(),
            "--seed".into(),
            "77".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_ok(&args(&out_a).iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&args(&out_b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(read(&out_a.join("times.csv")), read(&out_b.join("times.csv")));
    assert_eq!(read(&out_a.join("cdf.csv")), read(&out_b.join("cdf.csv")));
    let cdf = read(&out_a.join("cdf.csv"));
    assert!(cdf.starts_with("t,fraction_rejected,wilson_lo,wilson_hi\n"));
}

#[test]
fn parallel_and_serial_simulation_agree_per_replicate() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |threads: &str, out: &Path| {
        run_ok(&[
            "simulate",
            "--dgp",
            "null",
            "--regressor",
            "knn",
            "--horizon",
            "300",
            "--replicates",
            "6",
            "--t0",
            "50",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
    };
    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    run_with("1", &serial);
    run_with("3", &parallel);
    assert_eq!(read(&serial.join("times.csv")), read(&parallel.join("times.csv")));
}

#[test]
fn dumped_streams_replay_to_the_same_rejection_time() {
    let dir = tempfile::tempdir().unwrap();
    let sim_out = dir.path().join("sim");
    let base_seed = 31u64;
    run_ok(&[
        "simulate",
        "--dgp",
        "step",
        "--regressor",
        "knn",
        "--horizon",
        "2500",
        "--replicates",
        "1",
        "--t0",
        "250",
        "--seed",
        &base_seed.to_string(),
        "--dump-streams",
        "--out",
        sim_out.to_str().unwrap(),
    ]);
    let times = read(&sim_out.join("times.csv"));
    let n_f_sim: Option<u64> = times
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').nth(1))
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().unwrap());

    // replay the dumped stream through `run` with the replicate's seed
    let rep_seed = mix_seed(base_seed, 0);
    let run_out = dir.path().join("replay");
    run_ok(&[
        "run",
        "--input",
        sim_out.join("stream_0000.csv").to_str().unwrap(),
        "--seed",
        &rep_seed.to_string(),
        "--t0",
        "250",
        "--out",
        run_out.to_str().unwrap(),
    ]);
    let summary = read(&run_out.join("summary.json"));
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let n_f_run = parsed["n_f"].as_u64();
    assert_eq!(n_f_run, n_f_sim, "file replay must reproduce the simulation");
}

#[test]
fn cs_emits_checkpoints_with_shrinking_survivors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cs");
    run_ok(&[
        "cs",
        "--dgp",
        "null",
        "--cs-min",
        "0.3",
        "--cs-max",
        "0.7",
        "--cs-points",
        "9",
        "--horizon",
        "800",
        "--stride",
        "200",
        "--t0",
        "100",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = read(&out.join("cs.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,hull_lo,hull_hi,n_survivors"));
    let counts: Vec<u64> =
        lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 4);
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "survivors must shrink: {counts:?}");
}

#[test]
fn binned_run_emits_per_bin_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let sim_out = dir.path().join("sim");
    run_ok(&[
        "simulate",
        "--dgp",
        "null",
        "--horizon",
        "400",
        "--replicates",
        "1",
        "--t0",
        "50",
        "--seed",
        "11",
        "--dump-streams",
        "--out",
        sim_out.to_str().unwrap(),
    ]);
    let out = dir.path().join("binned");
    run_ok(&[
        "run",
        "--input",
        sim_out.join("stream_0000.csv").to_str().unwrap(),
        "--method",
        "binned",
        "--bins",
        "4",
        "--t0",
        "50",
        "--stride",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    let bins = read(&out.join("bins.csv"));
    let mut lines = bins.lines();
    assert_eq!(lines.next(), Some("t,bin,n,mean,half_width,rejected"));
    // four checkpoints (t = 100, 200, 300, 400), four bins each
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert!(rows[0].starts_with("100,0,"));
    assert!(rows.last().unwrap().starts_with("400,3,"));
    let summary = read(&out.join("summary.json"));
    assert!(summary.contains("\"t_consumed\": 400"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"alpha": 0.05, "t0": 40, "regressor": "knn", "knn.k": 5}"#)
        .unwrap();
    let input = dir.path().join("s.csv");
    let mut body = String::from("x1,y\n");
    for i in 0..50 {
        body.push_str(&format!("0.{:02},0.5\n", i % 100));
    }
    std::fs::write(&input, body).unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "run",
        "--input",
        input.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--alpha",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let summary = read(&out.join("summary.json"));
    assert!(summary.contains("\"alpha\": 0.2"), "flag wins: {summary}");
    assert!(summary.contains("\"t0\": 40"), "file fills the rest: {summary}");
    assert!(summary.contains("\"k\": 5"), "regressor params echo: {summary}");
}
