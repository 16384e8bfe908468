//! Experiment runner for `henkin-core`: configuration, a thread-pool
//! executor, the suites behind each subcommand and their output files.

pub mod config;
pub mod exec;
pub mod report;
pub mod suites;

use config::ExperimentConfig;
use report::Report;
use std::time::Instant;
use suites::SuiteError;

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_GATE_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Validates `cfg`, runs its suite and writes `results.csv` and
/// `summary.json` into `cfg.out_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, (i32, String)> {
    cfg.validate().map_err(|e| (EXIT_CONFIG, e))?;
    let pool = exec::PoolExecutor::new(cfg.workers).map_err(|e| (EXIT_CONFIG, e))?;
    let start = Instant::now();
    let mut rep = suites::run_suite(cfg, &pool).map_err(|e| match e {
        SuiteError::Config(s) => (EXIT_CONFIG, s),
        SuiteError::Numerical(s) => (EXIT_NUMERICAL, s),
    })?;
    rep.wall_ms = start.elapsed().as_millis();
    if cfg.timing {
        let ms = rep.wall_ms;
        rep.rows.iter_mut().for_each(|r| r.wall_ms = Some(ms));
    }
    report::write(&rep, cfg, &cfg.out_dir).map_err(|e| (EXIT_NUMERICAL, e))?;
    Ok(rep)
}

/// Exit code for a finished report.
pub fn exit_code(rep: &Report) -> i32 {
    if rep.all_pass() {
        EXIT_PASS
    } else {
        EXIT_GATE_FAILED
    }
}

/// One line per gate, `PASS` or `FAIL` first.
pub fn gate_table(rep: &Report) -> String {
    let mut s = String::new();
    for g in &rep.gates {
        let tag = g.criterion.map_or("supp".to_string(), |c| format!("C{c}"));
        s += &format!(
            "{} [{tag}] {}: {}\n",
            if g.pass { "PASS" } else { "FAIL" },
            g.name,
            g.detail
        );
    }
    s
}
