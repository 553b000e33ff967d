//! Correlation weights `φ_R`, `ϕ_R`, `ψ_R` tabulated on a radial grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::CutoffConfig;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Minimum number of auxiliary cells across the transition layer `ηR`.
pub const MIN_RAMP_CELLS: f64 = 8.0;

/// Periodic cube `[-n h/2, n h/2)^d` on which the self-correlations are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxGrid {
    pub spacing: f64,
    pub points: usize,
}

impl AuxGrid {
    /// Side length of the periodic cube.
    pub fn extent(&self) -> f64 {
        self.spacing * self.points as f64
    }

    /// Largest radius whose correlation (support `2R`) does not wrap.
    pub fn max_radius(&self) -> f64 {
        self.extent() / 4.0
    }

    /// A grid resolving the transition layer of `χ_R` with room for `2R`.
    /// The cell count per layer is lowered with `d` to keep `points^d` bounded.
    pub fn for_radius(cutoff: &CutoffConfig, r: f64, d: usize) -> Self {
        let per_layer = match d {
            1 => 256.0,
            2 => 24.0,
            _ => MIN_RAMP_CELLS,
        };
        let spacing = cutoff.eta * r / per_layer;
        let points = ((4.5 * r / spacing).ceil() as usize).next_power_of_two();
        Self { spacing, points }
    }
}

/// A radial profile sampled at `r_k = k h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl RadialTable {
    /// Linear interpolation; `0` past the last sample.
    pub fn at(&self, r: f64) -> f64 {
        let s = r.abs() / self.spacing;
        let k = s.floor() as usize;
        if k + 1 >= self.values.len() {
            return if k + 1 == self.values.len() && s == k as f64 { self.values[k] } else { 0.0 };
        }
        let f = s - k as f64;
        self.values[k] * (1.0 - f) + self.values[k + 1] * f
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.spacing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorawetzWeights {
    pub r: f64,
    pub d: usize,
    pub phi: RadialTable,
    pub varphi: RadialTable,
    /// `ψ_R` on the support of `φ_R`; beyond it `ψ_R(r) = psi_tail / r`.
    pub psi: RadialTable,
    pub psi_tail: f64,
}

impl MorawetzWeights {
    pub fn psi_at(&self, r: f64) -> f64 {
        let r = r.abs();
        let last = (self.psi.values.len() - 1) as f64 * self.psi.spacing;
        if r <= last {
            self.psi.at(r)
        } else {
            self.psi_tail / r
        }
    }

    /// Kernel `K(w) = ψ_R(|w|) w`.
    pub fn kernel(&self, w: &[f64]) -> Vec<f64> {
        let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let p = self.psi_at(r);
        w.iter().map(|v| p * v).collect()
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / gamma_half_integer(h + 1.0)
}

fn gamma_half_integer(x: f64) -> f64 {
    // x is a positive multiple of 1/2
    let mut g = if x.fract() == 0.0 { 1.0 } else { PI.sqrt() };
    let mut k = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while k < x - 1e-12 {
        g *= k;
        k += 1.0;
    }
    g
}

/// Unnormalized FFT over every axis of a row-major `n^d` cube (axis 0 contiguous).
pub(crate) fn fft_cube(data: &mut [Complex64], n: usize, d: usize, plan: &Arc<dyn Fft<f64>>) {
    let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
    plan.process_with_scratch(data, &mut scratch);
    let mut lines = Vec::new();
    for axis in 1..d {
        let stride = n.pow(axis as u32);
        let block = stride * n;
        lines.resize(block, ZERO);
        for chunk in data.chunks_exact_mut(block) {
            for i in 0..stride {
                for j in 0..n {
                    lines[i * n + j] = chunk[i + j * stride];
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            for i in 0..stride {
                for j in 0..n {
                    chunk[i + j * stride] = lines[i * n + j];
                }
            }
        }
    }
}

/// Signed offset of index `j` on a periodic axis of length `n`.
pub(crate) fn wrapped(j: usize, n: usize) -> isize {
    if j < n / 2 {
        j as isize
    } else {
        j as isize - n as isize
    }
}

fn radial_profile(n: usize, d: usize, h: f64, f: impl Fn(f64) -> f64) -> Vec<Complex64> {
    let total = n.pow(d as u32);
    (0..total)
        .map(|p| {
            let r2: f64 = (0..d)
                .map(|a| {
                    let j = (p / n.pow(a as u32)) % n;
                    (wrapped(j, n) as f64 * h).powi(2)
                })
                .sum();
            Complex64::new(f(r2.sqrt()), 0.0)
        })
        .collect()
}

pub fn build_weights(cutoff: &CutoffConfig, r: f64, alpha: f64, d: usize, aux: &AuxGrid) -> Result<MorawetzWeights> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::param(format!("Morawetz radius must be positive, got {r}")));
    }
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    if !(aux.spacing > 0.0) || aux.points < 4 {
        return Err(Error::param(format!("bad auxiliary grid {aux:?}")));
    }
    if r > aux.max_radius() {
        return Err(Error::Resolution(format!(
            "R = {r} exceeds the auxiliary grid: correlations need 4R <= {}",
            aux.extent()
        )));
    }
    if cutoff.eta * r < MIN_RAMP_CELLS * aux.spacing {
        return Err(Error::Resolution(format!(
            "transition layer eta R = {} spans fewer than {MIN_RAMP_CELLS} auxiliary cells of {}",
            cutoff.eta * r,
            aux.spacing
        )));
    }
    let (n, h) = (aux.points, aux.spacing);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut sq = radial_profile(n, d, h, |s| cutoff.value(s / r).powi(2));
    let mut hi = radial_profile(n, d, h, |s| cutoff.value(s / r).powf(alpha + 2.0));
    fft_cube(&mut sq, n, d, &fwd);
    fft_cube(&mut hi, n, d, &fwd);
    for (b, a) in hi.iter_mut().zip(&sq) {
        *b *= a;
    }
    for a in sq.iter_mut() {
        *a = *a * *a;
    }
    fft_cube(&mut sq, n, d, &inv);
    fft_cube(&mut hi, n, d, &inv);

    // inverse FFT is unnormalized; the correlation integral carries h^d
    let norm = h.powi(d as i32) / (n.pow(d as u32) as f64 * unit_ball_volume(d) * r.powi(d as i32));
    let len = ((2.0 * r / h).ceil() as usize + 2).min(n / 2);
    let phi: Vec<f64> = (0..len).map(|k| sq[k].re * norm).collect();
    let varphi: Vec<f64> = (0..len).map(|k| hi[k].re * norm).collect();

    // ψ(r_k) = r_k⁻¹ ∫₀^{r_k} φ by the trapezoid rule
    let mut psi = Vec::with_capacity(len);
    let mut integral = 0.0;
    psi.push(phi[0]);
    for k in 1..len {
        integral += 0.5 * h * (phi[k - 1] + phi[k]);
        psi.push(integral / (k as f64 * h));
    }
    Ok(MorawetzWeights {
        r,
        d,
        phi: RadialTable { spacing: h, values: phi },
        varphi: RadialTable { spacing: h, values: varphi },
        psi: RadialTable { spacing: h, values: psi },
        psi_tail: integral,
    })
}
