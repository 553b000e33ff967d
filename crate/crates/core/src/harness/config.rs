//! Experiment configuration in TOML.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::StepConfig;
use crate::field::{DomainConfig, XProfile};
use crate::ground_state::PetviashviliOptions;

/// Initial datum of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `c · φ_GS` with the ground state solved on the run domain.
    GroundStateScaled { scale: f64 },
    ProductState {
        profile: XProfile,
        #[serde(default)]
        n: usize,
        /// `[re, im]`
        amplitude: [f64; 2],
    },
    /// A PHNL snapshot on the run domain.
    File { path: PathBuf },
}

impl InitialSpec {
    pub fn amplitude(&self) -> Option<Complex64> {
        match self {
            InitialSpec::ProductState { amplitude, .. } => Some(Complex64::new(amplitude[0], amplitude[1])),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Blow-up fires once `‖∇_z u‖²` reaches this multiple of its initial value.
    pub blowup_factor: f64,
    /// Samples in the trend check ending at the firing row.
    pub trend_samples: usize,
    /// Required decay of `‖u‖_{α+2}^{α+2}` from its running maximum.
    pub potential_decay_factor: f64,
    /// Tolerance on `|Q/‖∇_x u‖² − 1|`.
    pub q_ratio_tol: f64,
    /// Consecutive dyadic windows over which the Cauchy deltas must decrease.
    pub cauchy_windows: usize,
    /// First dyadic time `t₀`; windows are `[2^k t₀, 2^{k+1} t₀]`.
    pub cauchy_start: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            blowup_factor: 100.0,
            trend_samples: 5,
            potential_decay_factor: 100.0,
            q_ratio_tol: 0.05,
            cauchy_windows: 3,
            cauchy_start: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorawetzConfig {
    pub eta: f64,
    pub radii: Vec<f64>,
    /// Window centers per axis; the d-dimensional grid is their tensor power.
    pub s_grid: Vec<f64>,
    pub delta: f64,
    /// Use every `stride`-th snapshot.
    pub stride: usize,
}

impl Default for MorawetzConfig {
    fn default() -> Self {
        Self { eta: 0.1, radii: vec![2.0, 4.0], s_grid: vec![0.0], delta: 0.01, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub t_max: f64,
    pub domain: DomainConfig,
    pub initial: InitialSpec,
    #[serde(default)]
    pub step: StepConfig,
    #[serde(default)]
    pub ground_state: PetviashviliOptions,
    #[serde(default)]
    pub detectors: DetectorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morawetz: Option<MorawetzConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.step.validate()?;
        if !(self.t_max >= 0.0) {
            return Err(Error::Config(format!("t_max must be nonnegative, got {}", self.t_max)));
        }
        let det = &self.detectors;
        if !(det.blowup_factor > 1.0 && det.potential_decay_factor > 1.0) {
            return Err(Error::Config("detector factors must exceed 1".into()));
        }
        if det.trend_samples < 2 || det.cauchy_windows == 0 || !(det.cauchy_start > 0.0) || !(det.q_ratio_tol > 0.0) {
            return Err(Error::Config(format!("bad detector settings {det:?}")));
        }
        if let Some(m) = &self.morawetz {
            if !(m.eta > 0.0 && m.eta < 0.5) || m.radii.is_empty() || m.radii.iter().any(|r| !(*r > 0.0)) || m.s_grid.is_empty() || m.stride == 0 {
                return Err(Error::Config(format!("bad morawetz settings {m:?}")));
            }
        }
        if let InitialSpec::GroundStateScaled { scale } = self.initial {
            if !(scale > 0.0) {
                return Err(Error::Config(format!("ground-state scale must be positive, got {scale}")));
            }
        }
        Ok(())
    }

    /// Canonical TOML rendering; parsing it back reproduces it byte for byte.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
