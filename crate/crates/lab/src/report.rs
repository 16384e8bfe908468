//! `results.csv` and `summary.json`.

use crate::config::ExperimentConfig;
use serde_json::{json, Map, Value};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 7] = [
    "experiment",
    "case",
    "metric",
    "value",
    "stderr",
    "seed",
    "wall_ms",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub case: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: u64,
    pub wall_ms: Option<u128>,
}

/// One pass/fail check. `criterion` is the acceptance number when the check
/// is one; supplementary checks carry `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub criterion: Option<u32>,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub gates: Vec<Gate>,
    pub constants: Map<String, Value>,
    pub wall_ms: u128,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Report {
            experiment: experiment.to_string(),
            ..Default::default()
        }
    }

    pub fn row(&mut self, case: &str, metric: &str, value: f64, stderr: Option<f64>, seed: u64) {
        self.rows.push(Row {
            experiment: self.experiment.clone(),
            case: case.into(),
            metric: metric.into(),
            value,
            stderr,
            seed,
            wall_ms: None,
        });
    }

    pub fn gate(&mut self, criterion: Option<u32>, name: &str, pass: bool, detail: String) {
        self.gates.push(Gate {
            criterion,
            name: name.into(),
            pass,
            detail,
        });
    }

    pub fn constant(&mut self, key: &str, v: Value) {
        self.constants.insert(key.into(), v);
    }

    pub fn all_pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    /// Appends another report's rows, gates and constants.
    pub fn absorb(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.gates.extend(other.gates);
        self.constants.extend(other.constants);
    }
}

/// Renders the CSV text. Floats use the shortest round-trip form.
pub fn csv_text(rows: &[Row]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| e.to_string())?;
    for r in rows {
        let se = r.stderr.map(|v| v.to_string()).unwrap_or_default();
        let ms = r.wall_ms.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            &r.experiment,
            &r.case,
            &r.metric,
            &r.value.to_string(),
            &se,
            &r.seed.to_string(),
            &ms,
        ])
        .map_err(|e| e.to_string())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(v.to_string()))
}

pub fn summary(rep: &Report, cfg: &ExperimentConfig) -> Value {
    let gates: Vec<Value> = rep
        .gates
        .iter()
        .map(|g| json!({ "criterion": g.criterion, "name": g.name, "pass": g.pass, "detail": g.detail }))
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": rep.experiment,
        "all_pass": rep.all_pass(),
        "gates": gates,
        "constants": rep.constants,
        "seeds": { "base": cfg.seed },
        "config": {
            "n": cfg.n, "q": cfg.q, "preset": cfg.preset, "eps": number(cfg.eps), "rho": cfg.rho.map(number),
            "samples": cfg.samples, "strata": cfg.strata, "boundary_res": cfg.boundary_res,
            "suite": cfg.suite, "levels": cfg.levels, "per_axis": cfg.per_axis, "max_steps": cfg.max_steps,
            "amp": number(cfg.amp), "workers": cfg.workers,
        },
        "runtimes": { "wall_ms": rep.wall_ms as u64 },
    })
}

/// Writes both files into `dir` (created if missing).
pub fn write(rep: &Report, cfg: &ExperimentConfig, dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    std::fs::write(dir.join("results.csv"), csv_text(&rep.rows)?).map_err(|e| e.to_string())?;
    let s = serde_json::to_string_pretty(&summary(rep, cfg)).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("summary.json"), s + "\n").map_err(|e| e.to_string())
}
