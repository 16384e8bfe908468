//! Acceptance suite: runs every experiment at its stated budget and prints
//! one PASS/FAIL line per criterion, then checks that reruns are
//! byte-identical across worker counts.
//!
//! Honest failures are printed, not raised; the process fails only when a
//! suite cannot run or a criterion has no gate.

use henkin_lab::config::{Command, ExperimentConfig};
use henkin_lab::report::Gate;
use henkin_lab::run;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

fn scratch(tag: &str) -> PathBuf {
    std::env::temp_dir()
        .join(format!("henkin-acceptance-{}", std::process::id()))
        .join(tag)
}

fn config(cmd: Command, pairs: &[(&str, &str)], out: PathBuf) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(cmd);
    let pairs: Vec<(String, String)> = pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    c.apply(&pairs).expect("acceptance config");
    c.out_dir = out;
    c
}

/// Stated budgets. Each entry is one suite run.
fn full_runs() -> Vec<(&'static str, Command, Vec<(&'static str, &'static str)>)> {
    vec![
        (
            "homotopy",
            Command::VerifyHomotopy,
            vec![("samples", "2e6"), ("refine", "true")],
        ),
        ("outl", Command::CheckBounds, vec![("suite", "outl")]),
        (
            "interpolation",
            Command::CheckInequalities,
            vec![("fields", "50")],
        ),
        (
            "distb",
            Command::CheckBounds,
            vec![("suite", "distb"), ("samples", "1e5")],
        ),
        (
            "transform",
            Command::TransformReport,
            vec![("samples", "1e5")],
        ),
        (
            "kam",
            Command::KamSolve,
            vec![("samples", "5e5"), ("sweep", "true")],
        ),
        (
            "holder",
            Command::MeasureHolder,
            vec![("samples", "2e6"), ("levels", "6")],
        ),
    ]
}

/// Small budgets for the determinism check, one per suite.
fn small_runs() -> Vec<(&'static str, Command, Vec<(&'static str, &'static str)>)> {
    vec![
        (
            "homotopy",
            Command::VerifyHomotopy,
            vec![("samples", "2e4"), ("refine", "false")],
        ),
        (
            "calibration",
            Command::CalibrateConstants,
            vec![("samples", "2e4")],
        ),
        (
            "outl",
            Command::CheckBounds,
            vec![("suite", "outl"), ("n", "2")],
        ),
        (
            "interpolation",
            Command::CheckInequalities,
            vec![("fields", "4"), ("per-axis", "5")],
        ),
        (
            "distb",
            Command::CheckBounds,
            vec![("suite", "distb"), ("samples", "5000")],
        ),
        (
            "transform",
            Command::TransformReport,
            vec![("samples", "5000")],
        ),
        (
            "kam",
            Command::KamSolve,
            vec![("samples", "2e4"), ("max-steps", "1"), ("sweep", "true")],
        ),
        (
            "holder",
            Command::MeasureHolder,
            vec![("samples", "2e4"), ("levels", "3")],
        ),
    ]
}

fn main() -> ExitCode {
    let mut broken = Vec::new();
    let mut by_criterion: BTreeMap<u32, Vec<Gate>> = BTreeMap::new();
    let mut supplementary = Vec::new();
    for (tag, cmd, pairs) in full_runs() {
        let cfg = config(cmd, &pairs, scratch(tag));
        let t = Instant::now();
        match run(&cfg) {
            Ok(rep) => {
                println!(
                    "ran {tag} ({}) in {:.1} s",
                    cmd.name(),
                    t.elapsed().as_secs_f64()
                );
                for g in rep.gates {
                    match g.criterion {
                        Some(c) => by_criterion.entry(c).or_default().push(g),
                        None => supplementary.push(g),
                    }
                }
            }
            Err((code, e)) => broken.push(format!("{tag}: exit {code}: {e}")),
        }
    }

    let t = Instant::now();
    let mut mismatches = Vec::new();
    for (tag, cmd, pairs) in small_runs() {
        let mut reference: Option<Vec<u8>> = None;
        for workers in ["1", "4", "8"] {
            let mut p = pairs.clone();
            p.push(("workers", workers));
            let dir = scratch(&format!("det-{tag}-{workers}"));
            if let Err((code, e)) = run(&config(cmd, &p, dir.clone())) {
                broken.push(format!(
                    "determinism {tag} with {workers} workers: exit {code}: {e}"
                ));
                continue;
            }
            let bytes = std::fs::read(dir.join("results.csv")).unwrap_or_default();
            match &reference {
                None => reference = Some(bytes),
                Some(r) if *r != bytes => mismatches.push(format!("{tag} ({workers} workers)")),
                Some(_) => {}
            }
        }
    }
    let detail = if mismatches.is_empty() {
        format!(
            "{} suites x 1/4/8 workers identical ({:.1} s)",
            small_runs().len(),
            t.elapsed().as_secs_f64()
        )
    } else {
        format!("differs: {}", mismatches.join(", "))
    };
    by_criterion.entry(10).or_default().push(Gate {
        criterion: Some(10),
        name: "results.csv byte-identical across workers".into(),
        pass: mismatches.is_empty(),
        detail,
    });

    println!();
    for c in 1..=10u32 {
        match by_criterion.get(&c) {
            Some(gates) => {
                let pass = gates.iter().all(|g| g.pass);
                println!("criterion {c:>2}: {}", if pass { "PASS" } else { "FAIL" });
                for g in gates {
                    println!(
                        "    {} {}: {}",
                        if g.pass { "ok  " } else { "fail" },
                        g.name,
                        g.detail
                    );
                }
            }
            None => {
                println!("criterion {c:>2}: FAIL (not evaluated)");
                broken.push(format!("criterion {c} produced no gate"));
            }
        }
    }
    for g in &supplementary {
        println!(
            "supplementary: {} {}: {}",
            if g.pass { "PASS" } else { "FAIL" },
            g.name,
            g.detail
        );
    }
    let _ = std::fs::remove_dir_all(scratch(""));
    if broken.is_empty() {
        ExitCode::SUCCESS
    } else {
        for b in &broken {
            eprintln!("error: {b}");
        }
        ExitCode::FAILURE
    }
}
