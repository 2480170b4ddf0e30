use std::path::Path;
use std::process::{Command, Output};

use ihrrp::harness::parse_trace_csv;
use ihrrp::instances::read_instance;
use ihrrp::PeriodicSchedule;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ihrrp"))
        .args(args)
        .env_remove("IHRRP_JOBS")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_writes_both_families() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = dir.path().join("fig1.json");
    let grid = dir.path().join("grid.json");
    assert!(run(&["gen", "--family", "fig1", "--out", path(&fig1)]).status.success());
    assert!(run(&["gen", "--family", "grid", "--k", "2", "--seed", "4", "--out", path(&grid)]).status.success());
    assert_eq!(read_instance(&fig1).unwrap().node_count(), 2);
    let spec = read_instance(&grid).unwrap();
    assert_eq!(spec.node_count(), 9);
    assert_eq!(spec.compulsory.iter().filter(|&&c| c).count(), 3);
}

#[test]
fn oracle_reports_optimum_and_refuses_large_instances() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = dir.path().join("fig1.json");
    run(&["gen", "--family", "fig1", "--out", path(&fig1)]);
    let out = run(&["oracle", "--instance", path(&fig1), "--method", "ratio", "--max-wait", "10"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["value"].as_f64().unwrap() - 1.9).abs() < 1e-9);

    let grid = dir.path().join("grid.json");
    run(&["gen", "--family", "grid", "--k", "2", "--out", path(&grid)]);
    let out = run(&["oracle", "--instance", path(&grid)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"nodes": 3}"#).unwrap();
    let out = run(&["optimize", "--instance", path(&bad), "--steps", "1", "--restarts", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let fig1 = dir.path().join("fig1.json");
    run(&["gen", "--family", "fig1", "--out", path(&fig1)]);
    let out = run(&["optimize", "--instance", path(&fig1), "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["gen", "--family", "grid", "--out", path(&fig1)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_determinize_stats_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = dir.path().join("fig1.json");
    let csv = dir.path().join("trace.csv");
    let strategy = dir.path().join("strategy.json");
    let schedules = dir.path().join("schedules");
    std::fs::create_dir(&schedules).unwrap();
    run(&["gen", "--family", "fig1", "--out", path(&fig1)]);
    let out = run(&[
        "optimize",
        "--instance",
        path(&fig1),
        "--steps",
        "4",
        "--restarts",
        "2",
        "--seed",
        "3",
        "--out-csv",
        path(&csv),
        "--out-strategy",
        path(&strategy),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("master seed: 3"));
    let rows = parse_trace_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.periodic_value.is_none()));

    for seed in ["1", "2"] {
        let sched = schedules.join(format!("s{seed}.json"));
        let out = run(&[
            "determinize",
            "--instance",
            path(&fig1),
            "--strategy",
            path(&strategy),
            "--samples",
            "2000",
            "--max-cycle",
            "30",
            "--seed",
            seed,
            "--out",
            path(&sched),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let s = PeriodicSchedule::from_json(&std::fs::read_to_string(&sched).unwrap()).unwrap();
        let spec = read_instance(&fig1).unwrap();
        assert!((s.evaluate(&spec).unwrap() - s.value).abs() < 1e-12);
    }
    let out = run(&["stats", "--schedules", path(&schedules)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("group,count,length_mean,length_std,time_mean,time_std"));
    assert!(lines.next().unwrap().contains(",2,"));
}

#[test]
fn sweep_memory_accepts_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = dir.path().join("fig1.json");
    run(&["gen", "--family", "fig1", "--out", path(&fig1)]);
    let out = run(&[
        "sweep-memory",
        "--instance",
        path(&fig1),
        "--memories",
        "1..2",
        "--steps",
        "2",
        "--restarts",
        "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = ihrrp::harness::parse_sweep_csv(&text).unwrap();
    assert_eq!(rows.iter().map(|r| r.memory).collect::<Vec<_>>(), vec![1, 1, 2, 2]);
    let out = run(&["sweep-memory", "--instance", path(&fig1), "--memories", "0..2"]);
    assert_eq!(out.status.code(), Some(2));
}
