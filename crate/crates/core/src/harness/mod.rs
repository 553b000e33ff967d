//! Experiment orchestration: configuration, detectors, the dichotomy run and
//! the verification suites behind the command line.

mod config;
mod detect;
mod verify;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionTrace, Snapshot, TraceRow, Verdict as RunVerdict};
use crate::field::{snapshot, Field, Grid};
use crate::ground_state::{classify, solve_petviashvili, Classification, GroundStateResult, Margins, Verdict};
use crate::io::atomic_write;
use crate::morawetz::{build_weights, interaction_m, AuxGrid, CutoffConfig, WindowedField};

pub use config::{DetectorConfig, ExperimentConfig, InitialSpec, MorawetzConfig};
pub use detect::{
    cauchy_deltas, criterion_norm, detect_blowup, detect_scatter_proxy, power_law_blowup_time, BlowupDetection, CauchyDelta,
    ScatterEvidence,
};
pub use verify::{verify, CheckResult, SUITES};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ScatterProxy,
    Blowup,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub gradient_growth_ratio: f64,
    pub blowup_fired_at: Option<f64>,
    pub blowup_time_estimate: Option<f64>,
    pub potential_decay_ratio: f64,
    pub q_ratio_final: f64,
    pub cauchy_deltas: Vec<CauchyDelta>,
    pub scatter_fired_at: Option<f64>,
    pub boundary_clean: bool,
    pub sup_sigma_sq: f64,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub version: String,
    pub config_hash: String,
    pub classification_in: Classification,
    pub outcome: Outcome,
    /// Blow-up from data classified `K_plus` or on the boundary.
    pub mismatch: bool,
    pub evidence: Evidence,
    pub trace_path: Option<PathBuf>,
}

/// Loads or builds the initial datum on `grid`; the ground state is solved
/// only when the datum needs it.
pub fn initial_field(cfg: &ExperimentConfig, grid: &Arc<Grid>, gs: Option<&GroundStateResult>) -> Result<Field> {
    match &cfg.initial {
        InitialSpec::GroundStateScaled { scale } => {
            let gs = gs.ok_or_else(|| Error::Config("ground-state initial datum needs a ground state".into()))?;
            Ok(gs.field.scaled(*scale))
        }
        InitialSpec::ProductState { profile, n, amplitude } => Field::product_state(grid, profile, *n, Complex64::new(amplitude[0], amplitude[1])),
        InitialSpec::File { path } => snapshot::read(path, Some(grid)),
    }
}

/// Outcome logic shared by [`run`] and [`evidence_from_trace`].
fn judge(cfg: &ExperimentConfig, rows: &[TraceRow], snapshots: &[Snapshot], verdict: RunVerdict, final_time: f64) -> Result<(Outcome, Evidence)> {
    let det = &cfg.detectors;
    let last_gz = rows.last().map(|r| r.grad_z_sq()).unwrap_or(0.0);
    let g0 = rows.first().map(|r| r.grad_z_sq()).unwrap_or(0.0);
    // the stepper stopped on its own, not through the gradient halt
    let underflow = verdict == RunVerdict::BlowupDetected && last_gz < det.blowup_factor * g0;
    let blowup = detect_blowup(rows, underflow, det.blowup_factor, det.trend_samples);
    let scatter = detect_scatter_proxy(rows, snapshots, cfg.step.boundary_threshold, det)?;
    let outcome = if blowup.fired {
        Outcome::Blowup
    } else if scatter.fired && verdict != RunVerdict::BoundaryContaminated {
        Outcome::ScatterProxy
    } else {
        Outcome::Inconclusive
    };
    let evidence = Evidence {
        gradient_growth_ratio: blowup.growth_ratio,
        blowup_fired_at: blowup.fired_at,
        blowup_time_estimate: blowup.t_est,
        potential_decay_ratio: scatter.potential_decay_ratio,
        q_ratio_final: scatter.q_ratio_final,
        cauchy_deltas: scatter.cauchy_deltas,
        scatter_fired_at: scatter.fired_at,
        boundary_clean: scatter.boundary_clean && verdict != RunVerdict::BoundaryContaminated,
        sup_sigma_sq: rows.iter().map(|r| r.sigma_sq()).fold(0.0, f64::max),
        final_time,
    };
    Ok((outcome, evidence))
}

/// Blow-up is only expected from `K_minus` or above-threshold data.
pub fn is_mismatch(outcome: Outcome, classification: Verdict) -> bool {
    outcome == Outcome::Blowup && !matches!(classification, Verdict::KMinus | Verdict::AboveThreshold)
}

fn assemble(cfg: &ExperimentConfig, classification_in: Classification, outcome: Outcome, evidence: Evidence, trace_path: Option<PathBuf>) -> DichotomyReport {
    let mismatch = is_mismatch(outcome, classification_in.verdict);
    if mismatch {
        log::error!(
            "blow-up detected from data classified {:?}; this contradicts the dichotomy and points at a numerical artifact",
            classification_in.verdict
        );
    }
    DichotomyReport { version: VERSION.to_string(), config_hash: cfg.hash(), classification_in, outcome, mismatch, evidence, trace_path }
}

/// Everything a run produces in memory.
pub struct RunOutput {
    pub report: DichotomyReport,
    pub ground_state: GroundStateResult,
    pub trace: EvolutionTrace,
    pub morawetz: Option<MorawetzReport>,
}

/// Ground state, classification, evolution, detectors and the optional
/// Morawetz diagnostics. With `out`, everything is persisted there.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let gs = solve_petviashvili(&cfg.domain, cfg.domain.omega, &cfg.ground_state, None)?;
    let grid = gs.field.grid().clone();
    let u0 = initial_field(cfg, &grid, Some(&gs))?;
    run_from(cfg, gs, &u0, out)
}

/// [`run`] with a given ground state and initial datum in place of the
/// ones the configuration describes.
pub fn run_from(cfg: &ExperimentConfig, gs: GroundStateResult, u0: &Field, out: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let classification_in = classify(&u0, cfg.domain.omega, gs.m_omega(), Margins::default())?;
    log::info!("initial datum classified {:?} (S = {}, m = {})", classification_in.verdict, classification_in.action, gs.m_omega());

    let mut step = cfg.step.clone();
    if step.halt_gradient_factor.is_none() {
        step.halt_gradient_factor = Some(cfg.detectors.blowup_factor);
    }
    let trace = evolve(u0, cfg.t_max, &step)?;
    let (outcome, evidence) = judge(cfg, &trace.rows, &trace.snapshots, trace.verdict, trace.final_time)?;
    let morawetz = cfg.morawetz.as_ref().map(|m| morawetz_diagnostics(&trace.snapshots, m, cfg.domain.alpha)).transpose()?;

    let trace_path = out.map(|d| d.join("trace"));
    let report = assemble(cfg, classification_in, outcome, evidence, trace_path.clone());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        atomic_write(&dir.join("config.toml"), cfg.canonical().as_bytes())?;
        atomic_write(&dir.join("ground_state.json"), serde_json::to_string_pretty(&gs.certificate)?.as_bytes())?;
        trace.write_dir(trace_path.as_deref().expect("set with out"))?;
        atomic_write(&dir.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
        if let Some(m) = &morawetz {
            m.write(dir)?;
        }
    }
    Ok(RunOutput { report, ground_state: gs, trace, morawetz })
}

/// Recomputes the outcome and evidence of a persisted run from its trace directory.
pub fn evidence_from_trace(cfg: &ExperimentConfig, trace_dir: &Path) -> Result<(Outcome, Evidence)> {
    let dir = crate::evolution::TraceDir::open(trace_dir)?;
    let grid = dir.grid()?;
    let snaps = dir.load_snapshots(&grid, f64::NEG_INFINITY, f64::INFINITY)?;
    judge(cfg, &dir.rows, &snaps, dir.summary.verdict, dir.summary.final_time)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorawetzRow {
    pub t: f64,
    pub s: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Q_loc")]
    pub q_loc: f64,
    pub grad_loc: f64,
    pub pass: bool,
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MBound {
    #[serde(rename = "R")]
    pub r: f64,
    pub sup_abs_m: f64,
    /// `sup_t |M(t)| / R`
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorawetzSummary {
    pub bounds: Vec<MBound>,
    /// Largest `sup|M| / R` over the radii.
    pub fitted_c: f64,
    /// `max C_R / min C_R`
    pub c_spread: f64,
    pub coercivity_pass_rate: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorawetzReport {
    pub rows: Vec<MorawetzRow>,
    pub summary: MorawetzSummary,
}

impl MorawetzReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        atomic_write(&dir.join("morawetz.csv"), &bytes)?;
        atomic_write(&dir.join("morawetz.json"), serde_json::to_string_pretty(&self.summary)?.as_bytes())
    }
}

/// `M(t)` for every radius and the coercivity check on the `(t, s, R)` grid.
/// Only the first coordinate of `s` is recorded in the rows; in `d = 2` the
/// centers are the tensor grid `s_grid × s_grid`.
pub fn morawetz_diagnostics(snapshots: &[Snapshot], m: &MorawetzConfig, alpha: f64) -> Result<MorawetzReport> {
    let Some(first) = snapshots.first() else {
        return Err(Error::param("Morawetz diagnostics need snapshots"));
    };
    let d = first.field.grid().d();
    let cutoff = CutoffConfig::new(m.eta)?;
    let weights: Vec<_> = m.radii.iter().map(|&r| build_weights(&cutoff, r, alpha, d, &AuxGrid::for_radius(&cutoff, r, d))).collect::<Result<_>>()?;
    let centers: Vec<Vec<f64>> = match d {
        1 => m.s_grid.iter().map(|&s| vec![s]).collect(),
        2 => m.s_grid.iter().flat_map(|&a| m.s_grid.iter().map(move |&b| vec![a, b])).collect(),
        _ => return Err(Error::param("Morawetz diagnostics support d <= 2")),
    };
    let mut rows = Vec::new();
    let mut sup = vec![0.0f64; m.radii.len()];
    for snap in snapshots.iter().step_by(m.stride) {
        let wf = WindowedField::prepare_coercivity(&snap.field);
        for (k, (w, &r)) in weights.iter().zip(&m.radii).enumerate() {
            let mv = interaction_m(&snap.field, w)?;
            sup[k] = sup[k].max(mv.abs());
            for s in &centers {
                let c = wf.coercivity(&cutoff, s, r, m.delta);
                rows.push(MorawetzRow { t: snap.t, s: s[0], r, q_loc: c.q_loc, grad_loc: c.grad_loc, pass: c.pass, m: mv });
            }
        }
    }
    let bounds: Vec<MBound> = m.radii.iter().zip(&sup).map(|(&r, &s)| MBound { r, sup_abs_m: s, c: s / r }).collect();
    let cs: Vec<f64> = bounds.iter().map(|b| b.c).collect();
    let fitted_c = cs.iter().cloned().fold(0.0, f64::max);
    let min_c = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let passed = rows.iter().filter(|r| r.pass).count();
    let summary = MorawetzSummary {
        bounds,
        fitted_c,
        c_spread: if min_c > 0.0 { fitted_c / min_c } else { f64::INFINITY },
        coercivity_pass_rate: if rows.is_empty() { 1.0 } else { passed as f64 / rows.len() as f64 },
        samples: rows.len(),
    };
    Ok(MorawetzReport { rows, summary })
}
