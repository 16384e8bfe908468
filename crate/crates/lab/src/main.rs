use clap::Parser;
use henkin_lab::config::{parse_pairs, Command, ExperimentConfig};
use henkin_lab::{exit_code, gate_table, run, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments for the Henkin-type homotopy on CR hypersurfaces.
///
/// Subcommands: verify-homotopy, calibrate-constants, measure-holder,
/// check-bounds, check-inequalities, transform-report, kam-solve.
/// Exit status: 0 all gates pass, 1 a gate failed, 2 bad configuration,
/// 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "henkin-lab", version)]
struct Cli {
    /// Experiment to run.
    subcommand: String,
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    /// Form degree for verify-homotopy.
    #[arg(long)]
    q: Option<String>,
    /// Surface preset: quadric, quartic or any name known to the core.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// Comma-separated boundary margins.
    #[arg(long)]
    sigma: Option<String>,
    /// Monte Carlo budget (accepts 2e6).
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    strata: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    boundary_res: Option<String>,
    /// outl or distb for check-bounds.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    per_axis: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    #[arg(long)]
    amp: Option<String>,
    /// Stopping tolerance relative to the initial connection norm.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    refine: Option<String>,
    #[arg(long)]
    fields: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// Output directory (default $HENKIN_LAB_OUT or ./lab-out).
    #[arg(long)]
    out: Option<String>,
    /// Record wall-clock times in results.csv.
    #[arg(long)]
    timing: Option<String>,
}

impl Cli {
    fn flags(&self) -> Vec<(String, String)> {
        let all = [
            ("n", &self.n),
            ("q", &self.q),
            ("preset", &self.preset),
            ("eps", &self.eps),
            ("rho", &self.rho),
            ("sigma", &self.sigma),
            ("samples", &self.samples),
            ("strata", &self.strata),
            ("seed", &self.seed),
            ("boundary-res", &self.boundary_res),
            ("suite", &self.suite),
            ("levels", &self.levels),
            ("per-axis", &self.per_axis),
            ("max-steps", &self.max_steps),
            ("amp", &self.amp),
            ("tol", &self.tol),
            ("sweep", &self.sweep),
            ("refine", &self.refine),
            ("fields", &self.fields),
            ("workers", &self.workers),
            ("out", &self.out),
            ("timing", &self.timing),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::defaults(Command::parse(&cli.subcommand)?);
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.apply(&parse_pairs(&text)?)?;
    }
    cfg.apply(&cli.flags())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match configure(&cli) {
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Ok(cfg) => match run(&cfg) {
            Err((code, e)) => {
                eprintln!("error: {e}");
                code
            }
            Ok(rep) => {
                print!("{}", gate_table(&rep));
                println!("wrote {}", cfg.out_dir.display());
                exit_code(&rep)
            }
        },
    };
    ExitCode::from(code as u8)
}
