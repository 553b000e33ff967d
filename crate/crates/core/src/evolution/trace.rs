//! Evolution traces in memory and on disk.
//!
//! A trace directory holds `trace.csv` (one row per report), `summary.json`,
//! `final.phnl`, and, when snapshots were kept, `snapshots.csv` indexing the
//! files under `snapshots/`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{snapshot, DomainConfig, Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Completed,
    BlowupDetected,
    BoundaryContaminated,
}

/// One observer row; serializes to the trace CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub action_omega: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub grad_x_sq: f64,
    pub dy_sq: f64,
    pub y_weight_sq: f64,
    /// `‖u‖_{α+2}^{α+2}`
    pub lp_alpha_plus_2: f64,
    /// `∫ |x|² |u|² dz`
    pub v_semi: f64,
    /// Mass fraction in the boundary layer.
    pub boundary_mass: f64,
    /// Step that produced this state (0 for the initial row).
    pub dt: f64,
}

impl TraceRow {
    pub fn grad_z_sq(&self) -> f64 {
        self.grad_x_sq + self.dy_sq
    }

    pub fn sigma_sq(&self) -> f64 {
        self.grad_x_sq + self.dy_sq + self.mass + self.y_weight_sq
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
    pub verdict: Verdict,
    pub blowup_time_estimate: Option<f64>,
    pub final_time: f64,
    pub final_field: Field,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub domain: DomainConfig,
    pub verdict: Verdict,
    pub blowup_time_estimate: Option<f64>,
    pub final_time: f64,
    pub steps: usize,
}

impl EvolutionTrace {
    pub(super) fn new(u0: &Field) -> Self {
        Self {
            rows: Vec::new(),
            snapshots: Vec::new(),
            verdict: Verdict::Completed,
            blowup_time_estimate: None,
            final_time: 0.0,
            final_field: u0.clone(),
            steps: 0,
        }
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            domain: self.final_field.domain().clone(),
            verdict: self.verdict,
            blowup_time_estimate: self.blowup_time_estimate,
            final_time: self.final_time,
            steps: self.steps,
        }
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("trace.csv"), &self.rows)?;
        crate::io::atomic_write(&dir.join("summary.json"), serde_json::to_string_pretty(&self.summary())?.as_bytes())?;
        snapshot::write(&self.final_field, &dir.join("final.phnl"))?;
        if !self.snapshots.is_empty() {
            let mut index = csv::Writer::from_writer(Vec::new());
            index.write_record(["t", "file"]).map_err(csv_err)?;
            for (i, s) in self.snapshots.iter().enumerate() {
                let name = format!("snapshots/snap_{i:05}.phnl");
                snapshot::write(&s.field, &dir.join(&name))?;
                index.write_record([format!("{:e}", s.t), name]).map_err(csv_err)?;
            }
            let bytes = index.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            crate::io::atomic_write(&dir.join("snapshots.csv"), &bytes)?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn write_rows(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "t", "mass", "energy", "action_omega", "Q", "grad_x_sq", "dy_sq", "y_weight_sq", "lp_alpha_plus_2", "v_semi",
            "boundary_mass", "dt",
        ])
        .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    crate::io::atomic_write(path, &bytes)
}

pub fn read_rows(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// A trace directory opened for reading.
#[derive(Debug, Clone)]
pub struct TraceDir {
    pub dir: PathBuf,
    pub rows: Vec<TraceRow>,
    pub summary: TraceSummary,
    /// `(t, path)` for every stored snapshot.
    pub snapshot_index: Vec<(f64, PathBuf)>,
}

#[derive(Deserialize)]
struct IndexRow {
    t: f64,
    file: String,
}

impl TraceDir {
    pub fn open(dir: &Path) -> Result<Self> {
        let rows = read_rows(&dir.join("trace.csv"))?;
        let summary: TraceSummary = serde_json::from_slice(&std::fs::read(dir.join("summary.json"))?)?;
        let index_path = dir.join("snapshots.csv");
        let mut snapshot_index = Vec::new();
        if index_path.exists() {
            let mut r = csv::Reader::from_path(&index_path).map_err(csv_err)?;
            for row in r.deserialize::<IndexRow>() {
                let row = row.map_err(csv_err)?;
                snapshot_index.push((row.t, dir.join(row.file)));
            }
        }
        Ok(Self { dir: dir.to_path_buf(), rows, summary, snapshot_index })
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.summary.domain.clone())
    }

    /// Loads every snapshot with `t0 ≤ t ≤ t1` onto `grid`.
    pub fn load_snapshots(&self, grid: &Arc<Grid>, t0: f64, t1: f64) -> Result<Vec<Snapshot>> {
        self.snapshot_index
            .iter()
            .filter(|(t, _)| *t >= t0 && *t <= t1)
            .map(|(t, p)| Ok(Snapshot { t: *t, field: snapshot::read(p, Some(grid))? }))
            .collect()
    }

    pub fn final_field(&self, grid: &Arc<Grid>) -> Result<Field> {
        snapshot::read(&self.dir.join("final.phnl"), Some(grid))
    }
}
