//! Interaction Morawetz diagnostics: the cutoff `χ_R`, the correlation
//! weights, the momentum centering `ξ(t, s, R)`, the interaction quantity
//! `M(t)`, the localized coercivity check and the averaged left-hand side.
//!
//! Windowed integrals use `χ_R(x − s)` on the physical x grid without
//! periodic wrapping, so windows are meant to sit inside the box.

mod weights;

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Snapshot;
use crate::field::{Field, Grid, XSpace, YSpace};
use crate::sum::Compensated;

pub use weights::{build_weights, unit_ball_volume, AuxGrid, MorawetzWeights, RadialTable, MIN_RAMP_CELLS};

/// Relative floor on `∫ χ_R² |u|²` below which `ξ` is set to zero.
pub const MASS_FLOOR: f64 = 1e-12;

const PROFILE_SAMPLES: usize = 1025;

/// Radial cutoff `χ`: `1` on `[0, 1−η]`, `0` past `1`, and the quintic
/// smoothstep in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffConfig {
    pub eta: f64,
    /// `χ` at `PROFILE_SAMPLES` equispaced radii on `[0, 1]`.
    pub profile: Vec<f64>,
}

fn smoothstep(t: f64) -> (f64, f64) {
    let t2 = t * t;
    (t2 * t * (10.0 - 15.0 * t + 6.0 * t2), 30.0 * t2 * (1.0 - t).powi(2))
}

impl CutoffConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::param(format!("cutoff width eta must lie in (0, 1/2), got {eta}")));
        }
        let mut c = Self { eta, profile: Vec::new() };
        c.profile = (0..PROFILE_SAMPLES).map(|k| c.value(k as f64 / (PROFILE_SAMPLES - 1) as f64)).collect();
        Ok(c)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.value_and_slope(r).0
    }

    /// `(χ(r), χ'(r))`.
    pub fn value_and_slope(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        if r <= 1.0 - self.eta {
            (1.0, 0.0)
        } else if r >= 1.0 {
            (0.0, 0.0)
        } else {
            let (s, ds) = smoothstep((1.0 - r) / self.eta);
            (s, -ds / self.eta)
        }
    }

    /// `sup |χ'| = 15 / (8η)`.
    pub fn slope_bound(&self) -> f64 {
        15.0 / (8.0 * self.eta)
    }
}

/// Per-field data reused across windows: Hermite-y planes in physical x and
/// their x gradients.
pub struct WindowedField {
    grid: Arc<Grid>,
    planes: Field,
    grads: Vec<Field>,
    nodes: Option<Field>,
    mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Window {
    /// `∫ χ_R²(x−s) |u|²`
    mass: f64,
    /// `Im ∫ χ_R²(x−s) ū ∇_x u`
    momentum: Vec<f64>,
}

impl WindowedField {
    pub fn new(u: &Field) -> Self {
        let herm = u.to_repr(XSpace::Fourier, YSpace::Hermite);
        let d = u.grid().d();
        let grads = (0..d).map(|a| herm.x_derivative(a)).collect();
        Self {
            grid: u.grid().clone(),
            planes: herm.into_x(XSpace::Physical),
            grads,
            nodes: None,
            mass: u.norm_sqr(),
        }
    }

    fn with_nodes(mut self) -> Self {
        self.nodes = Some(self.planes.to_y(YSpace::Nodes));
        self
    }

    /// Points where `χ_R(x − s) > 0`, with the offset `x − s`.
    fn support<'a>(&'a self, s: &'a [f64], r: f64) -> impl Iterator<Item = (usize, Vec<f64>)> + 'a {
        let g = &self.grid;
        (0..g.points()).filter_map(move |p| {
            let w: Vec<f64> = (0..g.d()).map(|a| g.coord(p, a) - s[a]).collect();
            let rad = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            (rad < r).then_some((p, w))
        })
    }

    fn window(&self, cutoff: &CutoffConfig, s: &[f64], r: f64) -> Window {
        let d = self.grid.d();
        let mut mass = Compensated::new();
        let mut mom = vec![Compensated::new(); d];
        for (p, w) in self.support(s, r) {
            let chi = cutoff.value(norm(&w) / r);
            if chi == 0.0 {
                continue;
            }
            let c2 = chi * chi;
            let mut rho = 0.0;
            let mut j = vec![0.0; d];
            for n in 0..self.planes.modes() {
                let c = self.planes.plane(n)[p];
                rho += c.norm_sqr();
                for (a, ja) in j.iter_mut().enumerate() {
                    *ja += (c.conj() * self.grads[a].plane(n)[p]).im;
                }
            }
            mass.add(c2 * rho);
            for (m, ja) in mom.iter_mut().zip(&j) {
                m.add(c2 * ja);
            }
        }
        let cell = self.grid.cell();
        Window { mass: mass.value() * cell, momentum: mom.iter().map(|m| m.value() * cell).collect() }
    }

    fn xi_from(&self, win: &Window) -> Vec<f64> {
        if win.mass > MASS_FLOOR * self.mass {
            win.momentum.iter().map(|p| -p / win.mass).collect()
        } else {
            vec![0.0; win.momentum.len()]
        }
    }

    /// `ξ(s, R)`.
    pub fn xi(&self, cutoff: &CutoffConfig, s: &[f64], r: f64) -> Vec<f64> {
        self.xi_from(&self.window(cutoff, s, r))
    }

    /// `‖∇_x(χ_R(·−s) u^ξ)‖²` and, when nodes are present, `∫ |χ_R(·−s) u|^{α+2}`.
    fn localized(&self, cutoff: &CutoffConfig, s: &[f64], r: f64, xi: &[f64]) -> (f64, f64) {
        let d = self.grid.d();
        let alpha = self.grid.domain().alpha;
        let weights = self.grid.basis().weights();
        let mut grad = Compensated::new();
        let mut pot = Compensated::new();
        for (p, w) in self.support(s, r) {
            let rad = norm(&w);
            let (chi, slope) = cutoff.value_and_slope(rad / r);
            if chi == 0.0 {
                continue;
            }
            // ∇χ_R(x − s) = χ'(|w|/R) w / (R |w|)
            let dchi: Vec<f64> = if rad > 0.0 { w.iter().map(|v| slope * v / (r * rad)).collect() } else { vec![0.0; d] };
            let mut g2 = 0.0;
            for n in 0..self.planes.modes() {
                let c = self.planes.plane(n)[p];
                for a in 0..d {
                    let du = self.grads[a].plane(n)[p] + Complex64::new(0.0, xi[a]) * c;
                    g2 += (c * dchi[a] + du * chi).norm_sqr();
                }
            }
            grad.add(g2);
            if let Some(nodes) = &self.nodes {
                let mut acc = 0.0;
                for (k, wk) in weights.iter().enumerate() {
                    acc += wk * nodes.plane(k)[p].norm().powf(alpha + 2.0);
                }
                pot.add(chi.powf(alpha + 2.0) * acc);
            }
        }
        let cell = self.grid.cell();
        (grad.value() * cell, pot.value() * cell)
    }
}

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_center(u: &Field, s: &[f64], r: f64) -> Result<()> {
    if s.len() != u.grid().d() {
        return Err(Error::ShapeMismatch { expected: u.grid().d(), got: s.len() });
    }
    if !(r > 0.0) {
        return Err(Error::param(format!("window radius must be positive, got {r}")));
    }
    Ok(())
}

/// Momentum centering `ξ = −Im ∫ χ_R²(x−s) ū ∇_x u / ∫ χ_R²(x−s) |u|²`, or `0`
/// when the windowed mass is below `MASS_FLOOR` times the total mass.
pub fn xi(u: &Field, cutoff: &CutoffConfig, s: &[f64], r: f64) -> Result<Vec<f64>> {
    check_center(u, s, r)?;
    Ok(WindowedField::new(u).xi(cutoff, s, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coercivity {
    /// `Q(χ_R(·−s) u^ξ)`
    pub q_loc: f64,
    /// `‖∇_x(χ_R(·−s) u^ξ)‖²`
    pub grad_loc: f64,
    pub pass: bool,
}

impl Coercivity {
    pub fn passes_at(&self, delta: f64) -> bool {
        self.q_loc >= delta * self.grad_loc
    }
}

/// Localized coercivity `Q(χ_R(·−s) u^ξ) ≥ δ ‖∇_x(χ_R(·−s) u^ξ)‖²`.
pub fn coercivity_check(u: &Field, cutoff: &CutoffConfig, s: &[f64], r: f64, delta: f64) -> Result<Coercivity> {
    check_center(u, s, r)?;
    let wf = WindowedField::new(u).with_nodes();
    Ok(wf.coercivity(cutoff, s, r, delta))
}

impl WindowedField {
    pub fn prepare_coercivity(u: &Field) -> Self {
        Self::new(u).with_nodes()
    }

    pub fn coercivity(&self, cutoff: &CutoffConfig, s: &[f64], r: f64, delta: f64) -> Coercivity {
        let xi = self.xi(cutoff, s, r);
        let (grad_loc, pot) = self.localized(cutoff, s, r, &xi);
        let dom = self.grid.domain();
        let coeff = dom.alpha * dom.d as f64 / (2.0 * (dom.alpha + 2.0));
        let q_loc = grad_loc - coeff * pot;
        Coercivity { q_loc, grad_loc, pass: q_loc >= delta * grad_loc }
    }
}

/// `ρ(x) = ∫ |u|² dy` and `J(x) = ∫ Im(ū ∇_x u) dy` on the physical x grid
/// (densities, without the cell factor). `J` is stored axis-major.
pub fn reduced_densities(u: &Field) -> (Vec<f64>, Vec<Vec<f64>>) {
    let wf = WindowedField::new(u);
    let plane = wf.grid.points();
    let d = wf.grid.d();
    let mut rho = vec![0.0; plane];
    let mut j = vec![vec![0.0; plane]; d];
    for n in 0..wf.planes.modes() {
        let c = wf.planes.plane(n);
        for p in 0..plane {
            rho[p] += c[p].norm_sqr();
            for a in 0..d {
                j[a][p] += (c[p].conj() * wf.grads[a].plane(n)[p]).im;
            }
        }
    }
    (rho, j)
}

/// `M = 2 ∬ J(x₂) · K(x₁ − x₂) ρ(x₁) dx₁ dx₂` with `K(w) = ψ_R(|w|) w`, by a
/// zero-padded FFT convolution on twice the box.
pub fn interaction_m(u: &Field, weights: &MorawetzWeights) -> Result<f64> {
    let grid = u.grid();
    let d = grid.d();
    if weights.d != d {
        return Err(Error::ShapeMismatch { expected: d, got: weights.d });
    }
    let (rho, j) = reduced_densities(u);
    let n = grid.n_x();
    let m = 2 * n;
    let dx = grid.dx();
    let total = m.pow(d as u32);
    let pad_index = |p: usize| -> usize { (0..d).map(|a| ((p / n.pow(a as u32)) % n) * m.pow(a as u32)).sum() };

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);

    let mut rho_hat = vec![Complex64::new(0.0, 0.0); total];
    for (p, r) in rho.iter().enumerate() {
        rho_hat[pad_index(p)] = Complex64::new(*r, 0.0);
    }
    weights::fft_cube(&mut rho_hat, m, d, &fwd);

    let offsets: Vec<Vec<f64>> = (0..total)
        .map(|q| (0..d).map(|a| weights::wrapped((q / m.pow(a as u32)) % m, m) as f64 * dx).collect())
        .collect();
    let cell = grid.cell();
    let mut acc = Compensated::new();
    for a in 0..d {
        let mut k: Vec<Complex64> = offsets.iter().map(|w| Complex64::new(weights.kernel(w)[a], 0.0)).collect();
        weights::fft_cube(&mut k, m, d, &fwd);
        for (kv, rv) in k.iter_mut().zip(&rho_hat) {
            *kv *= rv;
        }
        weights::fft_cube(&mut k, m, d, &inv);
        // (K_a * ρ)(x₂) = Σ K_a(x₂ − x₁) ρ(x₁) = −Σ K_a(x₁ − x₂) ρ(x₁)
        let scale = 1.0 / total as f64;
        for (p, jv) in j[a].iter().enumerate() {
            acc.add(-jv * k[pad_index(p)].re * scale);
        }
    }
    Ok(2.0 * acc.value() * cell * cell)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LhsOptions {
    /// Total `(s, R)` samples, split over the snapshots by time weight.
    pub samples: usize,
    pub seed: u64,
}

impl Default for LhsOptions {
    fn default() -> Self {
        Self { samples: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LhsEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub snapshots: usize,
}

/// Estimate of
/// `(J₀T₀)⁻¹ ∫_a^{a+T₀} ∫_{R₀}^{R₀e^{J₀}} R^{−d} ∫ ‖χ_R(·−s)u‖² ‖∇_x(χ_R(·−s)u^ξ)‖² ds dR/R dt`.
///
/// Time is integrated by the trapezoid rule over the snapshots inside the
/// window; `s` (uniform over the box) and `log R` (uniform) are sampled.
pub fn averaged_lhs(
    snapshots: &[Snapshot],
    cutoff: &CutoffConfig,
    a: f64,
    t0: f64,
    j0: f64,
    r0: f64,
    opts: &LhsOptions,
) -> Result<LhsEstimate> {
    if !(t0 > 0.0 && j0 > 0.0 && r0 > 0.0) {
        return Err(Error::param(format!("T0, J0, R0 must be positive, got {t0}, {j0}, {r0}")));
    }
    let inside: Vec<&Snapshot> = snapshots.iter().filter(|s| s.t >= a - 1e-12 && s.t <= a + t0 + 1e-12).collect();
    if inside.is_empty() {
        return Err(Error::param(format!("no snapshots in [{a}, {}]", a + t0)));
    }
    let grid = inside[0].field.grid().clone();
    let d = grid.d();
    if d > 2 {
        return Err(Error::param(format!("averaged_lhs supports d <= 2, got d = {d}")));
    }
    let l = grid.domain().l;
    let volume = (2.0 * l).powi(d as i32);

    let times: Vec<f64> = inside.iter().map(|s| s.t).collect();
    let time_w: Vec<f64> = if times.len() == 1 {
        vec![1.0]
    } else {
        let span = times[times.len() - 1] - times[0];
        (0..times.len())
            .map(|i| {
                let left = if i > 0 { times[i] - times[i - 1] } else { 0.0 };
                let right = if i + 1 < times.len() { times[i + 1] - times[i] } else { 0.0 };
                0.5 * (left + right) / span
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut value = 0.0;
    let mut var = 0.0;
    let mut used = 0;
    for (snap, wt) in inside.iter().zip(&time_w) {
        let count = ((opts.samples as f64 * wt).round() as usize).max(2);
        let wf = WindowedField::new(&snap.field);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..count {
            let r = r0 * (j0 * rng.random::<f64>()).exp();
            let s: Vec<f64> = (0..d).map(|_| -l + 2.0 * l * rng.random::<f64>()).collect();
            let win = wf.window(cutoff, &s, r);
            let f = if win.mass > 0.0 {
                let xi = wf.xi_from(&win);
                let (grad, _) = wf.localized(cutoff, &s, r, &xi);
                volume * win.mass * grad / r.powi(d as i32)
            } else {
                0.0
            };
            sum += f;
            sum_sq += f * f;
        }
        let c = count as f64;
        let mean = sum / c;
        let sample_var = ((sum_sq / c - mean * mean) * c / (c - 1.0)).max(0.0);
        value += wt * mean;
        var += wt * wt * sample_var / c;
        used += count;
    }
    Ok(LhsEstimate { value, std_error: var.sqrt(), samples: used, snapshots: inside.len() })
}
