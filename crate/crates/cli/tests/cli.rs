use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mtd_core::{io, Measurement};

fn mtd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtd"))
        .args(args)
        .env_remove("MTD_WORKERS")
        .output()
        .expect("run mtd")
}

fn ok(args: &[&str]) -> String {
    let out = mtd(args);
    assert!(out.status.success(), "mtd {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_paper_instances() {
    let d = tempfile::tempdir().unwrap();
    let y = d.path().join("ws.bin");
    let out = ok(&["generate", "--mode", "ws", "--length", "10", "--num-samples", "1000000", "--density", "0.3", "--out", s(&y)]);
    assert!(out.contains("M = 30000") && out.contains("min gap 19"), "{out}");
    let starts: Vec<usize> = fs::read_to_string(d.path().join("ws.bin.support.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(starts.len(), 30_000);
    assert!(starts.windows(2).all(|w| w[1] - w[0] >= 19));

    let y = d.path().join("asd.bin");
    let out = ok(&["generate", "--mode", "asd", "--density", "0.5", "--out", s(&y)]);
    assert!(out.contains("M = 50000") && out.contains("min gap 10"), "{out}");
}

#[test]
fn stats_of_zero_measurement_are_zero() {
    let d = tempfile::tempdir().unwrap();
    let y = d.path().join("zero.bin");
    io::write_measurement(&y, &Measurement::new(vec![0.0; 200], 5, 0.0).unwrap()).unwrap();
    let st = d.path().join("stats.json");
    ok(&["stats", "--input", s(&y), "--out", s(&st)]);
    let stats = io::read_stats(&st).unwrap();
    assert_eq!(stats.a1, 0.0);
    assert!(stats.a2.iter().chain(&stats.a3).all(|&v| v == 0.0));
}

#[test]
fn estimate_and_baselines_on_noiseless_data() {
    let d = tempfile::tempdir().unwrap();
    let y = d.path().join("y.bin");
    ok(&["generate", "--mode", "ws", "--density", "0.3", "--num-samples", "100000", "--seed", "4", "--out", s(&y)]);
    let truth = d.path().join("y.bin.signal.txt");
    let support = d.path().join("y.bin.support.txt");

    let st = d.path().join("stats.json");
    ok(&["stats", "--input", s(&y), "--out", s(&st)]);
    let rep = d.path().join("aa.json");
    ok(&[
        "estimate", "--input", s(&y), "--stats", s(&st), "--method", "aa", "--mode", "ws", "--out", s(&rep),
        "--truth", s(&truth),
    ]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(v["rmse"].as_f64().unwrap() <= 0.01, "{v}");
    assert_eq!(v["method"], "aa");
    assert_eq!(v["restart_objectives"].as_array().unwrap().len(), 10);
    assert!(v.get("wall_time_secs").is_none());

    let est = d.path().join("ks.txt");
    let out = ok(&[
        "baseline", "--input", s(&y), "--method", "known-s", "--signal", s(&truth), "--support", s(&support),
        "--out", s(&est),
    ]);
    assert_eq!(out.trim(), "rmse 0.000000");
    let out = ok(&[
        "baseline", "--input", s(&y), "--method", "deconv", "--signal", s(&truth), "--support", s(&support),
        "--out", s(&est),
    ]);
    assert_eq!(out.trim(), "rmse 0.000000");
}

#[test]
fn em_trace_is_written() {
    let d = tempfile::tempdir().unwrap();
    let y = d.path().join("y.bin");
    ok(&["generate", "--mode", "ws", "--density", "0.3", "--sigma", "0.5", "--num-samples", "20000", "--out", s(&y)]);
    let tr = d.path().join("trace.csv");
    ok(&[
        "estimate", "--input", s(&y), "--method", "em", "--mode", "ws", "--restarts", "2", "--out",
        s(&d.path().join("em.json")), "--trace", s(&tr),
    ]);
    let text = fs::read_to_string(&tr).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("stage,iteration,loglik"));
    assert!(lines.count() > 5);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(mtd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mtd(&["--help"]).status.code(), Some(0));
    assert_eq!(mtd(&["generate", "--mode", "ws"]).status.code(), Some(1));

    let missing = d.path().join("missing.bin");
    let out = mtd(&["stats", "--input", s(&missing), "--out", s(&d.path().join("o.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.bin"));

    let bad = d.path().join("bad.bin");
    fs::write(&bad, b"MTDM\x01\0\0\0garbage").unwrap();
    let out = mtd(&["stats", "--input", s(&bad), "--out", s(&d.path().join("o.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.bin") && err.contains("byte"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_mtd"))
        .args(["stats", "--input", s(&missing), "--out", "x"])
        .env("MTD_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = mtd(&["generate", "--mode", "ws", "--density", "0.9", "--num-samples", "1000", "--out", s(&bad)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

fn parse_opt(v: &str) -> Option<f64> {
    (!v.is_empty()).then(|| v.parse().unwrap())
}

#[test]
fn bench_counts_aggregates_and_runtimes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("b.cfg");
    fs::write(
        &cfg,
        "sigma = 0.5, 2.0\ntrials = 2\nnum_samples = 20000\nmethods = aa, em\nrestarts = 2\nseed = 9\n",
    )
    .unwrap();
    let out = d.path().join("sweep");
    ok(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    let raw = fs::read_to_string(out.join("raw.csv")).unwrap();
    let rows: Vec<Vec<&str>> = raw.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[4] == "ok"));

    // Aggregates recomputed from the raw rows.
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(
        lines.next(),
        Some("method,sigma_index,sigma,trials_ok,mean_rmse,mean_rho0_error,mean_rho1_rmse")
    );
    let mut seen = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let sel: Vec<&Vec<&str>> = rows.iter().filter(|r| r[0] == f[0] && r[1] == f[1]).collect();
        assert_eq!(f[3].parse::<usize>().unwrap(), sel.len());
        let mean = sel.iter().map(|r| r[5].parse::<f64>().unwrap()).sum::<f64>() / sel.len() as f64;
        assert!((parse_opt(f[4]).unwrap() - mean).abs() <= 1e-12 * mean.abs());
        seen += 1;
    }
    assert_eq!(seen, 4);

    let timings = fs::read_to_string(out.join("timings.csv")).unwrap();
    let mean_runtime = |m: &str| {
        let v: Vec<f64> = timings
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[0] == m && f[1] == "1")
            .map(|f| f[3].parse().unwrap())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_runtime("em") > mean_runtime("aa"));

    let report = ok(&["report", "--dir", s(&out)]);
    assert!(report.contains("aa") && report.contains("em"));

    // A different configuration cannot resume into the same directory.
    let r = mtd(&["bench", "--config", s(&cfg), "--out", s(&out), "--set", "trials=3"]);
    assert_eq!(r.status.code(), Some(1));
}
