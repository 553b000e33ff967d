//! Minimization of `W(φ) = S_ω(φ^{λ⋆(φ)})` over the constraint set `Q = 0`.
//!
//! At a projected iterate (`λ⋆ = 1`) the derivative of `λ ↦ S_ω(φ^λ)`
//! vanishes, so the gradient of `W` is the action gradient
//! `g = (H+ω)φ − |φ|^α φ`. Steps follow `−(H+ω)^{-1} g` with Armijo
//! backtracking on the closed-form `W`, then re-project by dilation.

use serde::{Deserialize, Serialize};

use super::{certify, initial_guess, nonlinearity, operator_symbol, GroundStateResult, Method};
use crate::error::{Error, Result};
use crate::field::{DomainConfig, Field, Grid, XSpace, YSpace};
use crate::functionals::BaseNorms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentOptions {
    /// Preconditioned gradient norm relative to `‖φ‖_{H+ω}`. The dilation
    /// regrid puts a floor near `1e-6` on what is reachable; `W` converges
    /// quadratically in this quantity.
    pub tol: f64,
    pub min_step: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { tol: 1e-5, min_step: 1e-10, max_iter: 5000, initial_step: 0.5, armijo: 1e-4 }
    }
}

/// One accepted descent step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentRecord {
    /// `W` after re-projection.
    pub w: f64,
    /// `|Q| / ‖∇_x φ‖²` after re-projection.
    pub q_ratio: f64,
    pub step: f64,
    pub gradient: f64,
}

/// Dilations closer to the identity than this are skipped; the regrid would
/// only add interpolation noise.
const SKIP_DILATION: f64 = 1e-10;

fn w_of(base: &BaseNorms, omega: f64) -> Result<(f64, f64)> {
    let ls = base.lambda_star()?;
    Ok((base.dilated(ls).action(omega), ls))
}

/// Amplitude rescaling onto `Q = 0`; exact on the grid, unlike a dilation.
fn normalize(phi: &Field) -> Result<Field> {
    let d = phi.domain();
    let ls = BaseNorms::compute(phi).lambda_star()?;
    let c = ls.powf((d.alpha * d.d as f64 - 4.0) / (2.0 * d.alpha));
    Ok(phi.scaled(c).into_spectral())
}

/// Dilates `trial` onto `Q = 0`. Returns `None` when the dilation is too large
/// to regrid accurately or leaves the box.
fn reproject(trial: Field, omega: f64) -> Result<Option<(Field, BaseNorms, f64)>> {
    let Ok(ls) = BaseNorms::compute(&trial).lambda_star() else {
        return Ok(None);
    };
    if !(0.5..=2.0).contains(&ls) {
        return Ok(None);
    }
    let next = if (ls - 1.0).abs() < SKIP_DILATION {
        trial
    } else {
        match trial.scale_x(ls) {
            Ok(f) => f.into_spectral(),
            Err(Error::Resolution(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    };
    let base = BaseNorms::compute(&next);
    let w = w_of(&base, omega)?.0;
    Ok(Some((next, base, w)))
}

/// Scaling-descent solve; returns the certified profile and the per-step history.
pub fn solve_scaling_descent(
    domain: &DomainConfig,
    omega: f64,
    opts: &DescentOptions,
    initial: Option<&Field>,
) -> Result<(GroundStateResult, Vec<DescentRecord>)> {
    if !(omega > 0.0) {
        return Err(Error::param(format!("omega must be positive, got {omega}")));
    }
    let grid = Grid::new(domain.clone())?;
    let alpha = domain.alpha;
    let start = match initial {
        Some(f) if f.grid().same_domain(&grid) => f.clone(),
        Some(_) => return Err(Error::param("initial iterate lives on a different domain")),
        None => initial_guess(&grid)?,
    };
    let mut phi = normalize(&start)?;
    let sym = operator_symbol(&grid, omega);
    let mut w = w_of(&BaseNorms::compute(&phi), omega)?.0;
    let mut step = opts.initial_step;
    let mut history = Vec::new();

    for it in 1..=opts.max_iter {
        let nl = nonlinearity(&phi, alpha, true);
        let mut dir = phi.clone();
        let mut gnorm2 = 0.0;
        let mut energy_norm = 0.0;
        for ((d, c), (n, l)) in dir.data_mut().iter_mut().zip(phi.data()).zip(nl.data().iter().zip(&sym)) {
            let g = c * l - n;
            *d = g / l;
            gnorm2 += g.norm_sqr() / l;
            energy_norm += l * c.norm_sqr();
        }
        let gradient = (gnorm2 / energy_norm).sqrt();
        if gradient < opts.tol {
            let mut result = certify(phi, omega, Method::ScalingDescent, it);
            result.certificate.m_omega = w;
            return Ok((result, history));
        }
        let mut tau = step;
        let (next, base, w_new) = loop {
            let data = phi.data().iter().zip(dir.data()).map(|(c, d)| c - d * tau).collect();
            let trial = Field::from_data(&grid, data, XSpace::Fourier, YSpace::Hermite)?;
            if let Some(accepted) = reproject(trial, omega)? {
                if accepted.2 <= w - opts.armijo * tau * gnorm2 {
                    break accepted;
                }
            }
            tau *= 0.5;
            if tau < opts.min_step {
                return Err(Error::Stall { iterations: it, step: tau });
            }
        };
        phi = next;
        log::debug!("descent it={it} W={w_new:.14} tau={tau:.3e} grad={gradient:.3e}");
        w = w_new;
        history.push(DescentRecord { w, q_ratio: base.q().abs() / base.grad_x_sq, step: tau, gradient });
        step = (tau * 1.5).min(1.0);
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual: f64::NAN })
}
