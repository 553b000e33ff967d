use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Field, XSpace, YSpace};
use crate::error::{Error, Result};
use crate::hermite::{ladder_planes, Ladder};
use crate::sum::{sum, Compensated};

/// The norms that make up `‖u‖_Σ` plus any requested Lebesgue norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub l2: f64,
    /// `‖∇_x u‖²`
    pub grad_x_sq: f64,
    /// `‖∂_y u‖²`
    pub dy_sq: f64,
    /// `‖y u‖²`
    pub y_weight_sq: f64,
    /// `‖u‖_p` keyed by the decimal rendering of `p` (`"inf"` for the sup norm).
    pub lp: BTreeMap<String, f64>,
    pub sigma_sq: f64,
}

pub(crate) fn lp_key(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

impl NormBundle {
    pub fn compute(field: &Field, p_list: &[f64]) -> Result<Self> {
        for &p in p_list {
            if !(p >= 1.0) {
                return Err(Error::param(format!("L^p norms need p >= 1, got {p}")));
            }
        }
        let spec = field.to_spectral();
        let grid = field.grid();
        let plane = grid.points();
        let modes = spec.modes();
        let data = spec.data();

        let l2_sq = sum(data.iter().map(|c| c.norm_sqr()));
        let xi_sq = grid.xi_sq();
        let mut grad = Compensated::new();
        for k in 0..modes {
            for (c, w) in data[k * plane..(k + 1) * plane].iter().zip(xi_sq) {
                grad.add(w * c.norm_sqr());
            }
        }
        let y_weight_sq = sum(ladder_planes(data, plane, modes, Ladder::Position, true).iter().map(|c| c.norm_sqr()));
        let dy_sq = sum(ladder_planes(data, plane, modes, Ladder::Derivative, true).iter().map(|c| c.norm_sqr()));

        let mut lp = BTreeMap::new();
        if !p_list.is_empty() {
            let phys = field.to_physical();
            for &p in p_list {
                let v = if p.is_infinite() { phys.max_abs() } else { phys.lp_integral(p).powf(1.0 / p) };
                lp.insert(lp_key(p), v);
            }
        }
        let grad_x_sq = grad.value();
        Ok(Self {
            l2: l2_sq.sqrt(),
            grad_x_sq,
            dy_sq,
            y_weight_sq,
            lp,
            sigma_sq: grad_x_sq + dy_sq + l2_sq + y_weight_sq,
        })
    }

    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp.get(&lp_key(p)).copied()
    }

    /// `‖∇_z u‖² = ‖∇_x u‖² + ‖∂_y u‖²`.
    pub fn grad_z_sq(&self) -> f64 {
        self.grad_x_sq + self.dy_sq
    }
}

impl Field {
    /// `∫ |u|^p dz` by the trapezoid rule in x and Gauss-Hermite in y.
    pub fn lp_integral(&self, p: f64) -> f64 {
        let phys = self.to_physical();
        let plane = self.grid().points();
        let mut acc = Compensated::new();
        for k in 0..phys.modes() {
            let w = phys.plane_weight(k);
            let s = sum(phys.data()[k * plane..(k + 1) * plane].iter().map(|c| c.norm().powf(p)));
            acc.add(w * s);
        }
        acc.value()
    }
}

/// `( ∫ ‖u(x,·)‖^p_{H^s_y} dx )^{1/p}` with the Hermite-Sobolev weight
/// `(2n+1)^{s/2}`; the supremum over the grid for `p = ∞`.
pub fn aniso_norm(field: &Field, p: f64, s: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param(format!("aniso_norm needs p in [1, inf], got {p}")));
    }
    if !(s >= 0.0) {
        return Err(Error::param(format!("Hermite-Sobolev order must be nonnegative, got {s}")));
    }
    let f = field.to_repr(XSpace::Physical, YSpace::Hermite);
    let plane = field.grid().points();
    let mut inner = vec![0.0; plane];
    for n in 0..f.modes() {
        let w = ((2 * n + 1) as f64).powf(s);
        for (acc, c) in inner.iter_mut().zip(f.plane(n)) {
            *acc += w * c.norm_sqr();
        }
    }
    if p.is_infinite() {
        return Ok(inner.iter().fold(0.0f64, |m, v| m.max(v.sqrt())));
    }
    let total = sum(inner.iter().map(|v| v.powf(p / 2.0)));
    Ok((field.grid().cell() * total).powf(1.0 / p))
}
