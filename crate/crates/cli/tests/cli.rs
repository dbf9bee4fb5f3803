use std::path::Path;
use std::process::{Command, Output};

fn iqcobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iqcobs")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn nominal_mck_writes_result_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = iqcobs(&["synthesize", "--plant", "mck", "--formulation", "nominal", "--out", &out_arg(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(v["status"], "optimal");
    assert!((v["gamma_syn"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert!(v["wall_time"].as_f64().is_some());
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let gain = std::fs::read_to_string(tmp.path().join("gain.csv")).unwrap();
    assert_eq!(gain.lines().count(), 2);
    let cert = std::fs::read_to_string(tmp.path().join("certificate.txt")).unwrap();
    assert!(cert.contains("matrix P 2 2"));
}

#[test]
fn infeasible_design_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let o = iqcobs(&[
        "synthesize", "--plant", "quaternion", "--formulation", "blkdiag", "--multiplier", "d-scalar", "--alpha", "0.15",
        "--out", &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 4);
    assert!(!tmp.path().join("gain.csv").exists());
}

#[test]
fn bad_config_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "plnat = \"mck\"\n").unwrap();
    let out = tmp.path().join("out");
    let o = iqcobs(&["synthesize", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());

    let o = iqcobs(&["synthesize", "--alpha", "-1", "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());

    // undamped design on a plant with imaginary-axis poles needs the explicit opt-in
    let o = iqcobs(&["synthesize", "--plant", "quaternion", "--formulation", "blkdiag", "--alpha", "0", "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());

    let o = iqcobs(&["table", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn synthesize_then_validate_quaternion() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_arg(tmp.path());
    let o = iqcobs(&[
        "synthesize", "--plant", "quaternion", "--formulation", "blkdiag", "--multiplier", "dg-scalar", "--out", &dir,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let result = tmp.path().join("result.json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    let gamma = v["gamma_syn"].as_f64().unwrap();

    let vdir = tmp.path().join("val");
    let ok = iqcobs(&[
        "validate", "--plant", "quaternion", "--gain-from", result.to_str().unwrap(), "--gamma", &gamma.to_string(),
        "--samples", "40", "--out", &out_arg(&vdir),
    ]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let csv = std::fs::read_to_string(vdir.join("validation.csv")).unwrap();
    assert!(csv.starts_with("# iqcobs "));
    assert_eq!(csv.lines().count(), 2 + 40);

    // an absurdly small reference bound is refuted
    let bad = iqcobs(&[
        "validate", "--plant", "quaternion", "--gain-from", tmp.path().join("gain.csv").to_str().unwrap(), "--gamma",
        "1e-6", "--samples", "8", "--out", &out_arg(&vdir),
    ]);
    assert_eq!(code(&bad), 4);
}

#[test]
fn table_csv_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = iqcobs(&["table", "2", "--out", &out_arg(d.path())]);
        assert_eq!(code(&o), 0);
    }
    let ta = std::fs::read(a.path().join("table2.csv")).unwrap();
    let tb = std::fs::read(b.path().join("table2.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn montecarlo_seeded_runs_repeat() {
    let run = |dir: &Path| {
        let o = iqcobs(&[
            "montecarlo", "--plant", "quaternion", "--formulation", "blkdiag", "--multiplier", "dg-scalar", "--runs", "3",
            "--t-final", "2", "--seed", "7", "--out", &out_arg(dir),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.join("montecarlo.csv")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, cb) = (run(a.path()), run(b.path()));
    let body = |s: &str| s.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(body(&ca), body(&cb));
    assert_eq!(body(&ca)[0], "t,p5,p50,p95");
}
