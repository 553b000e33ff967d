use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use phnls::evolution::TraceDir;
use phnls::field::snapshot;
use phnls::functionals::criterion_exponents;
use phnls::ground_state::{classify, solve_petviashvili, GroundStateResult, Margins};
use phnls::harness::{self, criterion_norm, morawetz_diagnostics, ExperimentConfig, MorawetzConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "phnls", version, about = "Partially harmonic NLS: ground states, evolution and dichotomy diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground state on the configured domain.
    GroundState {
        #[arg(long)]
        config: PathBuf,
        /// Snapshot path; the certificate goes to the same path with `.json` appended.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve, run the detectors and write the report.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        /// `GS` or `GS:scale=c` for a saved ground state; the configured datum otherwise.
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Place a field relative to the ground-state threshold.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        init: PathBuf,
        /// Saved ground state; solved from the config when absent.
        #[arg(long)]
        ground_state: Option<PathBuf>,
    },
    /// Morawetz diagnostics over the snapshots of a trace directory.
    Morawetz {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run the self-check suites.
    Verify {
        #[arg(long)]
        suite: Option<String>,
    },
    /// Windowed criterion norm over the snapshots of a trace directory.
    Criterion {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, num_args = 2, value_names = ["T0", "T1"], allow_negative_numbers = true)]
        window: Vec<f64>,
    },
}

/// Splits `PATH[:scale=c]`.
fn parse_init(spec: &str) -> Result<(PathBuf, f64)> {
    match spec.rsplit_once(':') {
        Some((path, opt)) if opt.starts_with("scale=") => {
            let c: f64 = opt["scale=".len()..].parse().with_context(|| format!("bad scale in {spec:?}"))?;
            if !(c > 0.0) {
                bail!("scale must be positive, got {c}");
            }
            Ok((PathBuf::from(path), c))
        }
        _ => Ok((PathBuf::from(spec), 1.0)),
    }
}

fn print(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ground_state(config: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let gs = solve_petviashvili(&cfg.domain, cfg.domain.omega, &cfg.ground_state, None)?;
    gs.save(out)?;
    print(&json!({ "version": harness::VERSION, "config_hash": cfg.hash(), "certificate": gs.certificate }))
}

fn evolve(config: &Path, init: Option<&str>, out: &Path) -> Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let result = match init {
        Some(spec) => {
            let (path, scale) = parse_init(spec)?;
            let gs = GroundStateResult::load(&path).with_context(|| format!("loading ground state {}", path.display()))?;
            if gs.certificate.domain != cfg.domain {
                bail!("ground state {} was solved on a different domain", path.display());
            }
            let u0 = gs.field.scaled(scale);
            harness::run_from(&cfg, gs, &u0, Some(out))?
        }
        None => harness::run(&cfg, Some(out))?,
    };
    print(&serde_json::to_value(&result.report)?)?;
    Ok(!result.report.mismatch)
}

fn classify_cmd(config: &Path, init: &Path, gs_path: Option<&Path>) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let gs = match gs_path {
        Some(p) => GroundStateResult::load(p)?,
        None => solve_petviashvili(&cfg.domain, cfg.domain.omega, &cfg.ground_state, None)?,
    };
    let u = snapshot::read(init, Some(gs.field.grid()))?;
    let c = classify(&u, cfg.domain.omega, gs.m_omega(), Margins::default())?;
    print(&json!({ "version": harness::VERSION, "config_hash": cfg.hash(), "classification": c }))
}

fn morawetz(config: &Path, trace: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let m = cfg.morawetz.clone().unwrap_or_else(MorawetzConfig::default);
    let dir = TraceDir::open(trace)?;
    let grid = dir.grid()?;
    let snaps = dir.load_snapshots(&grid, f64::NEG_INFINITY, f64::INFINITY)?;
    let report = morawetz_diagnostics(&snaps, &m, grid.domain().alpha)?;
    report.write(trace)?;
    print(&json!({ "version": harness::VERSION, "config_hash": cfg.hash(), "summary": report.summary }))
}

fn verify(suite: Option<&str>) -> Result<bool> {
    let results = harness::verify(suite)?;
    for r in &results {
        println!("{}", serde_json::to_string(r)?);
    }
    if let Some(first) = results.iter().find(|r| !r.pass) {
        eprintln!("FAILED {}/{}: value {} against threshold {}", first.suite, first.name, first.value, first.threshold);
        return Ok(false);
    }
    Ok(true)
}

fn criterion(trace: &Path, window: &[f64]) -> Result<()> {
    let (t0, t1) = (window[0], window[1]);
    let dir = TraceDir::open(trace)?;
    let grid = dir.grid()?;
    let exps = criterion_exponents(grid.d(), grid.domain().alpha)?;
    let snaps = dir.load_snapshots(&grid, t0 - 1e-9 * t1.abs().max(1.0), t1 + 1e-9 * t1.abs().max(1.0))?;
    let value = criterion_norm(&snaps, t0, t1, &exps)?;
    print(&json!({ "version": harness::VERSION, "window": [t0, t1], "exponents": exps, "value": value }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::GroundState { config, out } => ground_state(config, out).map(|_| true),
        Command::Evolve { config, init, out } => evolve(config, init.as_deref(), out),
        Command::Classify { config, init, ground_state } => classify_cmd(config, init, ground_state.as_deref()).map(|_| true),
        Command::Morawetz { config, trace } => morawetz(config, trace).map(|_| true),
        Command::Verify { suite } => verify(suite.as_deref()),
        Command::Criterion { trace, window } => criterion(trace, window).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
