use std::path::Path;
use std::process::{Command, Output};

fn tclab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tclab"))
        .args(args)
        .env("TCLAB_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn classify_reports_regular_continuous() {
    let dir = tempfile::tempdir().unwrap();
    let o = tclab(dir.path(), &["classify", "--model", "brownian:a=1,s2=4", "--rate", "exp(x)"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"]["kind"], "RegularContinuous");
    assert_eq!(report["verdict"]["theta"], 0.5);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn malformed_rate_exits_two_with_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = tclab(dir.path(), &["classify", "--model", "brownian:a=1,s2=4", "--rate", "exp(x +)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("column 8"));
}

#[test]
fn config_errors_exit_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[experiment]\ncommand = speed\nmodel = brownian:a=-1,s2=1\nrate = x^2\n[params]\nwobble = 3\n")
        .unwrap();
    let o = tclab(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6") && err.contains("wobble"), "{err}");
}

fn hashes(dir: &Path) -> serde_json::Value {
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    m["artifacts"].clone()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "simulate", "--model", "brownian:a=-1,s2=1", "--rate", "exp(x)", "--seed", "11", "--paths", "4", "--t-max",
        "0.5", "--steps", "2000",
    ];
    assert!(tclab(a.path(), &args).status.success());
    assert!(tclab(b.path(), &args).status.success());
    assert_eq!(hashes(a.path()), hashes(b.path()));
    let csv = std::fs::read_to_string(a.path().join("paths.csv")).unwrap();
    assert!(csv.starts_with("t,value,status,excursion_id\n"));
    let studies = std::fs::read_to_string(a.path().join("studies.csv")).unwrap();
    assert!(studies.starts_with("key,x_or_t,statistic,value,stderr\n"));
}

#[test]
fn config_file_matches_flags() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = a.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# cramer limit\n[experiment]\ncommand = cramer-limit\nmodel = brownian:a=1,s2=2\nseed = 5\nout_dir = {}\n\n[params]\nx = 1, 2\nn = 400\n",
            a.path().display()
        ),
    )
    .unwrap();
    let o = tclab(a.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = tclab(
        b.path(),
        &["cramer-limit", "--model", "brownian:a=1,s2=2", "--seed", "5", "--x", "1, 2", "--n", "400"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(a.path().join("studies.csv")).unwrap(),
        std::fs::read(b.path().join("studies.csv")).unwrap()
    );
}

#[test]
fn selftest_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = tclab(dir.path(), &["selftest", "--criteria", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("criterion  3 PASS"));
}
