//! Experiment configuration from `key = value` files and command-line flags.
//!
//! Every flag has a file key of the same name (`--boundary-res 6` is
//! `boundary-res = 6`). Flags override the file.

use std::path::PathBuf;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HENKIN_LAB_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    VerifyHomotopy,
    CalibrateConstants,
    MeasureHolder,
    CheckBounds,
    CheckInequalities,
    TransformReport,
    KamSolve,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::VerifyHomotopy,
        Command::CalibrateConstants,
        Command::MeasureHolder,
        Command::CheckBounds,
        Command::CheckInequalities,
        Command::TransformReport,
        Command::KamSolve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyHomotopy => "verify-homotopy",
            Command::CalibrateConstants => "calibrate-constants",
            Command::MeasureHolder => "measure-holder",
            Command::CheckBounds => "check-bounds",
            Command::CheckInequalities => "check-inequalities",
            Command::TransformReport => "transform-report",
            Command::KamSolve => "kam-solve",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand '{s}'"))
    }
}

/// File and flag keys understood by [`ExperimentConfig`].
pub const KEYS: [&str; 22] = [
    "n",
    "q",
    "preset",
    "eps",
    "rho",
    "sigma",
    "samples",
    "strata",
    "seed",
    "boundary-res",
    "suite",
    "levels",
    "per-axis",
    "max-steps",
    "amp",
    "tol",
    "sweep",
    "refine",
    "fields",
    "workers",
    "out",
    "timing",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: Option<usize>,
    pub q: usize,
    pub preset: String,
    pub eps: f64,
    pub rho: Option<f64>,
    /// Boundary-gap margins for the distance suite.
    pub sigma: Vec<f64>,
    pub samples: Option<usize>,
    pub strata: usize,
    pub seed: u64,
    pub boundary_res: usize,
    /// `outl` or `distb` for `check-bounds`.
    pub suite: String,
    pub levels: usize,
    /// Grid nodes per axis (KAM grid: 5, inequality sample grid: 9).
    pub per_axis: Option<usize>,
    pub max_steps: usize,
    pub amp: f64,
    pub tol: Option<f64>,
    pub sweep: bool,
    pub refine: bool,
    pub fields: usize,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Write wall-clock times into `results.csv` (off keeps reruns identical).
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let out_dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("lab-out"));
        ExperimentConfig {
            command,
            n: None,
            q: 1,
            preset: "quadric".into(),
            eps: 0.01,
            rho: None,
            sigma: vec![0.1, 0.3, 0.5],
            samples: None,
            strata: 12,
            seed: 1,
            boundary_res: 6,
            suite: "outl".into(),
            levels: 6,
            per_axis: None,
            max_steps: 3,
            amp: 0.05,
            tol: None,
            sweep: false,
            refine: true,
            fields: 50,
            workers: std::thread::available_parallelism()
                .map(|v| v.get())
                .unwrap_or(1),
            out_dir,
            timing: false,
        }
    }

    /// Applies `key = value` pairs in order.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<(), String> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let v = v.trim();
        match key {
            "n" => self.n = Some(int(key, v)?),
            "q" => self.q = int(key, v)?,
            "preset" => self.preset = v.to_string(),
            "eps" => self.eps = real(key, v)?,
            "rho" => self.rho = Some(real(key, v)?),
            "sigma" => {
                self.sigma = v
                    .split(',')
                    .map(|s| real(key, s))
                    .collect::<Result<_, _>>()?
            }
            "samples" => self.samples = Some(int(key, v)?),
            "strata" => self.strata = int(key, v)?,
            "seed" => self.seed = int(key, v)? as u64,
            "boundary-res" => self.boundary_res = int(key, v)?,
            "suite" => self.suite = v.to_string(),
            "levels" => self.levels = int(key, v)?,
            "per-axis" => self.per_axis = Some(int(key, v)?),
            "max-steps" => self.max_steps = int(key, v)?,
            "amp" => self.amp = real(key, v)?,
            "tol" => self.tol = Some(real(key, v)?),
            "sweep" => self.sweep = boolean(key, v)?,
            "refine" => self.refine = boolean(key, v)?,
            "fields" => self.fields = int(key, v)?,
            "workers" => self.workers = int(key, v)?,
            "out" => self.out_dir = PathBuf::from(v),
            "timing" => self.timing = boolean(key, v)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Checks the preconditions of the selected suite.
    pub fn validate(&self) -> Result<(), String> {
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        need(self.strata >= 2, "strata must be at least 2")?;
        need(
            self.samples.map_or(true, |s| s >= self.strata),
            "samples must be at least the number of strata",
        )?;
        need(self.workers >= 1, "workers must be positive")?;
        need(
            self.eps >= 0.0 && self.eps.is_finite(),
            "eps must be a finite non-negative number",
        )?;
        need(
            self.rho.map_or(true, |r| r > 0.0 && r <= 3.0),
            "rho must lie in (0, 3]",
        )?;
        henkin_core::geometry::Rhat::from_name(&self.preset, self.eps, 1.0)
            .map_err(|e| e.to_string())?;
        match self.command {
            Command::VerifyHomotopy => {
                need(self.n.unwrap_or(4) == 4, "verify-homotopy runs with n = 4")?;
                need((1..=2).contains(&self.q), "q must be 1 or 2 for n = 4")?;
            }
            Command::CalibrateConstants => {
                need(
                    self.n.unwrap_or(4) == 4 && self.preset == "quadric",
                    "calibration runs on the quadric with n = 4",
                )?;
            }
            Command::MeasureHolder => {
                need(
                    (3..=henkin_core::MAX_N).contains(&self.n.unwrap_or(3)),
                    "measure-holder needs 3 <= n <= 6",
                )?;
                need(self.levels >= 2, "levels must be at least 2")?;
            }
            Command::CheckBounds => match self.suite.as_str() {
                "outl" => need(
                    self.n.map_or(true, |n| n == 2 || n == 3),
                    "the outl suite covers n = 2 and n = 3",
                )?,
                "distb" => need(
                    (2..=henkin_core::MAX_N).contains(&self.n.unwrap_or(4)),
                    "n outside 2..=6",
                )?,
                _ => {
                    return Err(format!(
                        "unknown bounds suite '{}' (outl or distb)",
                        self.suite
                    ))
                }
            },
            Command::CheckInequalities => need(
                self.fields >= 1 && self.per_axis.map_or(true, |p| p >= 3),
                "need fields >= 1 and per-axis >= 3",
            )?,
            Command::TransformReport => need(
                (2..=henkin_core::MAX_N).contains(&self.n.unwrap_or(4)),
                "n outside 2..=6",
            )?,
            Command::KamSolve => {
                need(self.n.unwrap_or(4) >= 4, "kam-solve needs n >= 4")?;
                need(
                    self.amp > 0.0 && self.amp.is_finite(),
                    "amp must be positive",
                )?;
                need(self.max_steps >= 1, "max-steps must be positive")?;
                need(
                    self.per_axis.map_or(true, |p| p >= 2),
                    "per-axis must be at least 2",
                )?;
            }
        }
        for s in &self.sigma {
            need(*s > 0.0 && *s < 1.0, "sigma values must lie in (0, 1)")?;
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(format!("line {}: unknown key '{k}'", i + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Integers also accept scientific notation (`2e6`).
fn int(key: &str, v: &str) -> Result<usize, String> {
    if let Ok(i) = v.parse::<usize>() {
        return Ok(i);
    }
    match v.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e15 => Ok(f as usize),
        _ => Err(format!("{key}: expected a non-negative integer, got '{v}'")),
    }
}

fn real(key: &str, v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .map_err(|_| format!("{key}: expected a number, got '{v}'"))
}

fn boolean(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got '{v}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let pairs = parse_pairs("# comment\nsamples = 2e6\nseed=7 # trailing\n").unwrap();
        let mut c = ExperimentConfig::defaults(Command::VerifyHomotopy);
        c.apply(&pairs).unwrap();
        c.apply(&[("seed".into(), "9".into())]).unwrap();
        assert_eq!(c.samples, Some(2_000_000));
        assert_eq!(c.seed, 9);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_pairs("nonsense").is_err());
        assert!(parse_pairs("colour = red").is_err());
        let mut c = ExperimentConfig::defaults(Command::KamSolve);
        assert!(c.apply(&[("samples".into(), "1.5".into())]).is_err());
        c.apply(&[("amp".into(), "-1".into())]).unwrap();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(Command::CheckBounds);
        c.suite = "other".into();
        assert!(c.validate().is_err());
    }
}
