use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_henkin-lab"))
}

fn out(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("henkin-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn passing_suite_exits_zero_and_writes_files() {
    let d = out("pass");
    let s = bin()
        .args([
            "transform-report",
            "--samples",
            "2000",
            "--workers",
            "1",
            "--out",
        ])
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(
        s.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&s.stderr)
    );
    let stdout = String::from_utf8(s.stdout).unwrap();
    assert!(stdout.contains("PASS [C6]") && stdout.contains("PASS [C7]"));
    let csv = std::fs::read_to_string(d.join("results.csv")).unwrap();
    assert!(csv.starts_with("experiment,case,metric,value,stderr,seed,wall_ms\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["all_pass"], true);
}

#[test]
fn failing_gate_exits_one() {
    // the supplementary n = 2 worked-example gate fails
    let d = out("gate");
    let s = bin()
        .args(["check-bounds", "--suite", "outl", "--n", "2", "--out"])
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&s.stdout).contains("FAIL [supp]"));
}

#[test]
fn bad_configuration_exits_two() {
    for args in [
        vec!["no-such-command"],
        vec!["kam-solve", "--amp", "-1"],
        vec!["check-bounds", "--suite", "other"],
        vec!["verify-homotopy", "--samples", "lots"],
        vec!["measure-holder", "--n", "2"],
    ] {
        let s = bin()
            .args(&args)
            .arg("--out")
            .arg(out("bad"))
            .output()
            .unwrap();
        assert_eq!(s.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flags_override_config_file() {
    let d = out("file");
    std::fs::create_dir_all(&d).unwrap();
    let file = d.join("exp.conf");
    std::fs::write(
        &file,
        "# small run\nsamples = 1000\nseed = 4\nworkers = 1\n",
    )
    .unwrap();
    let s = bin()
        .args([
            "check-bounds",
            "--suite",
            "distb",
            "--seed",
            "6",
            "--config",
        ])
        .arg(&file)
        .arg("--out")
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(
        s.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&s.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"]["base"], 6);
    assert_eq!(summary["config"]["samples"], 1000);
    let csv = std::fs::read_to_string(d.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",6,")));
}

#[test]
fn timing_fills_the_wall_clock_column() {
    let d = out("timing");
    let s = bin()
        .args([
            "check-inequalities",
            "--fields",
            "2",
            "--per-axis",
            "4",
            "--timing",
            "true",
            "--out",
        ])
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| !l.ends_with(',')));
}
