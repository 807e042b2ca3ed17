use std::path::Path;
use std::process::{Command, Output};

fn combo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combo")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn predict_cancellation_rate() {
    let o = combo(&["predict", "--pa", "0.031", "--dead-time", "24ns"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mcps: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("f0_Mcps = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((mcps - 1.29).abs() < 0.005, "{out}");
}

#[test]
fn predict_markov_propagation() {
    let o = combo(&["predict", "--b", "0.001", "--a", "0", "--b2", "-0.002", "--a2", "0.01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("pairxor.b = "), "{out}");
    assert!(out.contains("xor.b = 4.000000e-6"), "{out}");
    assert!(out.contains("required_bits = 9.604000e5"), "{out}");
}

#[test]
fn zero_bits_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = combo(&["--out", dir.path().to_str().unwrap(), "simulate", "--bits", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n_bits"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_prints_usage() {
    let o = combo(&["simulate", "--no-such-flag"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = combo(&["frobnicate"]);
    assert!(!o.status.success());
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "n_bits = 1000\nblank_window = 17.6 parsecs\n").unwrap();
    let o = combo(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("blank_window"), "{}", stderr(&o));
}

#[test]
fn runs_are_byte_identical_and_regenerable_from_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "--out".to_string(),
            d.to_str().unwrap().to_string(),
            "--bits".into(),
            "20000".into(),
            "--seed".into(),
            "9".into(),
            "--set".into(),
            "failure_rates=0,5Mcps".into(),
            "scenario-failure".into(),
        ]
    };
    for d in [a.path(), b.path()] {
        let argv = args(d);
        let o = combo(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["scenario-failure.csv", "scenario-failure-metrics.csv", "scenario-failure-cross.csv", "manifest.txt"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let manifest = a.path().join("manifest.txt");
    assert!(read(a.path(), "manifest.txt").contains("# command = scenario-failure"));
    let o = combo(&[
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        c.path().to_str().unwrap(),
        "scenario-failure",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(a.path(), "scenario-failure.csv"), read(c.path(), "scenario-failure.csv"));
}

#[test]
fn export_then_stats_and_test() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = combo(&["--out", out, "--bits", "200000", "export", "--stream", "c", "--bit-format", "packed"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = dir.path().join("C.bin");
    assert!(file.exists());

    let stats_dir = dir.path().join("stats");
    let o = combo(&[
        "--out",
        stats_dir.to_str().unwrap(),
        "stats",
        "--input",
        file.to_str().unwrap(),
        "--bit-format",
        "packed",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.starts_with("stream_label,N,bias,sigma_b,k,a_k,sigma_k"), "{csv}");
    assert!(csv.contains(",200000,"), "{csv}");

    let test_dir = dir.path().join("sts");
    let o = combo(&[
        "--out",
        test_dir.to_str().unwrap(),
        "--format",
        "report",
        "test",
        "--input",
        file.to_str().unwrap(),
        "--bit-format",
        "packed",
        "--seq-len",
        "20000",
        "--serial-m",
        "8",
        "--apen-m",
        "6",
    ]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7, "{text}");
    assert!(read(&test_dir, "sts.csv").starts_with("test,sequences,pass_count"));
    assert!(read(&test_dir, "manifest.txt").contains("# input = "));
}

#[test]
fn monitor_writes_one_csv_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = combo(&[
        "--out",
        dir.path().to_str().unwrap(),
        "--bits",
        "50000",
        "--set",
        "monitor_rates=0,5Mcps",
        "--set",
        "inject_rates=0,7MHz",
        "monitor",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["monitor-both.csv", "monitor-d0.csv", "monitor-inject.csv"] {
        let csv = read(dir.path(), f);
        assert!(csv.lines().next().unwrap().ends_with("alarm"), "{f}");
        assert_eq!(csv.lines().count(), 3, "{f}");
    }
    let inject = read(dir.path(), "monitor-inject.csv");
    assert!(inject.lines().last().unwrap().ends_with(",high"), "{inject}");
    let both = read(dir.path(), "monitor-both.csv");
    assert!(both.lines().nth(1).unwrap().ends_with(",low"), "{both}");
}

#[test]
fn trace_dump_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = combo(&["--out", dir.path().to_str().unwrap(), "--bits", "1000", "--trace", "5us", "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<String> = std::fs::read_dir(dir.path().join("trace"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");
    assert!(names.iter().any(|n| n.starts_with("trace_detections")));
}
