use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every discretization parameter of a run.
///
/// The x-box is `[-l, l)` per axis with `n_x` points per axis; the confined
/// direction uses `n_max` Hermite modes on a `q`-point Gauss-Hermite rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub d: usize,
    #[serde(alias = "L")]
    pub l: f64,
    pub n_x: usize,
    pub n_max: usize,
    pub q: usize,
    pub alpha: f64,
    pub omega: f64,
}

impl DomainConfig {
    /// `q` defaults to `2 n_max`.
    pub fn new(d: usize, l: f64, n_x: usize, n_max: usize, alpha: f64, omega: f64) -> Self {
        Self { d, l, n_x, n_max, q: 2 * n_max, alpha, omega }
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::param("d must be at least 1"));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::param(format!("box half-width must be positive, got {}", self.l)));
        }
        if !self.n_x.is_power_of_two() || self.n_x < 2 {
            return Err(Error::param(format!("n_x must be a power of two >= 2, got {}", self.n_x)));
        }
        if self.n_max == 0 || self.q < 2 * self.n_max {
            return Err(Error::param(format!("need n_max >= 1 and q >= 2 n_max (n_max = {}, q = {})", self.n_max, self.q)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::param(format!("omega must be positive, got {}", self.omega)));
        }
        if !self.alpha_in_window() {
            log::warn!(
                "alpha = {} lies outside the intercritical window for d = {}",
                self.alpha,
                self.d
            );
        }
        Ok(())
    }

    /// `4/d < α < 4/(d-1)` (no upper bound for `d = 1`).
    pub fn alpha_in_window(&self) -> bool {
        intercritical(self.d, self.alpha)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n_x as f64
    }

    /// Number of x grid points, `n_x^d`.
    pub fn points(&self) -> usize {
        self.n_x.pow(self.d as u32)
    }
}

pub fn intercritical(d: usize, alpha: f64) -> bool {
    let lower = 4.0 / d as f64;
    if d == 1 {
        alpha > lower
    } else {
        alpha > lower && alpha < 4.0 / (d as f64 - 1.0)
    }
}
