//! Tensor-grid states on `ℝᵈ × ℝ`: a periodic Fourier grid in `x` and a
//! truncated Hermite basis in `y`.
//!
//! Storage is plane-major: entry `(k, p)` lives at `data[k * P + p]`, where
//! `k` indexes the y-representation (quadrature node or Hermite mode) and `p`
//! is the flattened x index with axis 0 varying fastest. This is also the
//! order used by the snapshot file format.
//!
//! Both Fourier and Hermite coefficients are orthonormal: in the fully
//! spectral representation `‖u‖₂² = Σ |c|²`.

mod domain;
mod norms;
mod scaling;
pub mod snapshot;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use domain::{intercritical, DomainConfig};
pub use norms::{aniso_norm, NormBundle};

use crate::error::{Error, Result};
use crate::hermite::{ladder_planes, HermiteBasis, Ladder};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XSpace {
    Physical,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YSpace {
    Nodes,
    Hermite,
}

/// Precomputed discretization shared by all fields on one domain.
pub struct Grid {
    domain: DomainConfig,
    basis: HermiteBasis,
    x: Vec<f64>,
    xi: Vec<f64>,
    xi_sq: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl Grid {
    pub fn new(domain: DomainConfig) -> Result<Arc<Self>> {
        domain.validate()?;
        let n = domain.n_x;
        let dx = domain.dx();
        let basis = HermiteBasis::new(domain.n_max, domain.q)?;
        let x = (0..n).map(|j| -domain.l + j as f64 * dx).collect();
        let xi: Vec<f64> = (0..n)
            .map(|k| {
                let signed = if k < n / 2 { k as isize } else { k as isize - n as isize };
                PI * signed as f64 / domain.l
            })
            .collect();
        let points = domain.points();
        let xi_sq = (0..points)
            .map(|p| (0..domain.d).map(|a| xi[axis_index(p, a, n)].powi(2)).sum())
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Self { domain, basis, x, xi, xi_sq, fwd, inv }))
    }

    pub fn domain(&self) -> &DomainConfig {
        &self.domain
    }

    pub fn basis(&self) -> &HermiteBasis {
        &self.basis
    }

    pub fn d(&self) -> usize {
        self.domain.d
    }

    pub fn n_x(&self) -> usize {
        self.domain.n_x
    }

    pub fn dx(&self) -> f64 {
        self.domain.dx()
    }

    /// Volume element of the x trapezoid rule, `dx^d`.
    pub fn cell(&self) -> f64 {
        self.dx().powi(self.d() as i32)
    }

    pub fn points(&self) -> usize {
        self.xi_sq.len()
    }

    /// One-dimensional grid coordinates `-L + j dx`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// One-dimensional signed angular frequencies in FFT order.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `|ξ|²` at every flattened Fourier index.
    pub fn xi_sq(&self) -> &[f64] {
        &self.xi_sq
    }

    /// Coordinate of flat point `p` along `axis`.
    pub fn coord(&self, p: usize, axis: usize) -> f64 {
        self.x[axis_index(p, axis, self.n_x())]
    }

    /// `|x|` at flat point `p`.
    pub fn radius(&self, p: usize) -> f64 {
        (0..self.d()).map(|a| self.coord(p, a).powi(2)).sum::<f64>().sqrt()
    }

    /// Frequency used for first derivatives; the Nyquist mode is dropped.
    pub fn derivative_xi(&self, p: usize, axis: usize) -> f64 {
        let k = axis_index(p, axis, self.n_x());
        if k == self.n_x() / 2 {
            0.0
        } else {
            self.xi[k]
        }
    }

    pub fn same_domain(&self, other: &Grid) -> bool {
        self.domain == other.domain
    }

    /// Unitary FFT over every x axis of `planes` consecutive planes.
    pub(crate) fn fft_planes(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n_x();
        let d = self.d();
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        // axis 0 lines are contiguous
        plan.process_with_scratch(data, &mut scratch);
        let plane = self.points();
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
        let scale = if inverse {
            (2.0 * self.domain.l).powf(-(d as f64) / 2.0)
        } else {
            (self.dx() / n as f64).powf(d as f64 / 2.0)
        };
        debug_assert_eq!(data.len() % plane, 0);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

#[inline]
pub(crate) fn axis_index(p: usize, axis: usize, n: usize) -> usize {
    (p / n.pow(axis as u32)) % n
}

/// A complex state on the tensor grid with explicit representation tags.
#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
    x_space: XSpace,
    y_space: YSpace,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("domain", self.grid.domain())
            .field("x_space", &self.x_space)
            .field("y_space", &self.y_space)
            .finish_non_exhaustive()
    }
}

/// Profiles in the free variables for [`Field::product_state`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XProfile {
    /// L²-normalized `Π_a (πσ²)^{-1/4} exp(-x_a²/(2σ²))`.
    Gaussian { sigma: f64 },
    /// Gaussian centred at `x0` and modulated by `exp(i ξ0·x)`.
    GaussianShifted { sigma: f64, x0: Vec<f64>, xi0: Vec<f64> },
}

impl XProfile {
    fn sigma(&self) -> f64 {
        match self {
            XProfile::Gaussian { sigma } | XProfile::GaussianShifted { sigma, .. } => *sigma,
        }
    }

    fn eval(&self, x: &[f64]) -> Complex64 {
        let sigma = self.sigma();
        let norm = (PI * sigma * sigma).powf(-0.25);
        match self {
            XProfile::Gaussian { .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Complex64::new(norm.powi(x.len() as i32) * (-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
            }
            XProfile::GaussianShifted { x0, xi0, .. } => {
                let r2: f64 = x.iter().zip(x0).map(|(v, c)| (v - c).powi(2)).sum();
                let phase: f64 = x.iter().zip(xi0).map(|(v, k)| v * k).sum();
                Complex64::from_polar(norm.powi(x.len() as i32) * (-r2 / (2.0 * sigma * sigma)).exp(), phase)
            }
        }
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>, x_space: XSpace, y_space: YSpace) -> Self {
        let modes = modes_of(grid, y_space);
        Self { grid: grid.clone(), data: vec![ZERO; modes * grid.points()], x_space, y_space }
    }

    pub fn from_data(grid: &Arc<Grid>, data: Vec<Complex64>, x_space: XSpace, y_space: YSpace) -> Result<Self> {
        let expected = modes_of(grid, y_space) * grid.points();
        if data.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: data.len() });
        }
        Ok(Self { grid: grid.clone(), data, x_space, y_space })
    }

    /// `amplitude · g(x) · e_n(y)` sampled on the physical grid.
    pub fn product_state(grid: &Arc<Grid>, profile: &XProfile, n: usize, amplitude: Complex64) -> Result<Self> {
        let dom = grid.domain();
        if n >= dom.n_max {
            return Err(Error::param(format!("Hermite index {n} exceeds n_max = {}", dom.n_max)));
        }
        let sigma = profile.sigma();
        if !(sigma > 0.0) || sigma > dom.l / 4.0 {
            return Err(Error::Resolution(format!("profile width {sigma} does not fit the box half-width {}", dom.l)));
        }
        if let XProfile::GaussianShifted { x0, xi0, .. } = profile {
            if x0.len() != dom.d || xi0.len() != dom.d {
                return Err(Error::param("shift and momentum must have d components"));
            }
        }
        let points = grid.points();
        let mut xs = vec![0.0; dom.d];
        let gx: Vec<Complex64> = (0..points)
            .map(|p| {
                for (a, v) in xs.iter_mut().enumerate() {
                    *v = grid.coord(p, a);
                }
                amplitude * profile.eval(&xs)
            })
            .collect();
        let basis = grid.basis();
        let mut data = Vec::with_capacity(basis.q() * points);
        for k in 0..basis.q() {
            let e = basis.value(k, n);
            data.extend(gx.iter().map(|g| g * e));
        }
        Ok(Self { grid: grid.clone(), data, x_space: XSpace::Physical, y_space: YSpace::Nodes })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn domain(&self) -> &DomainConfig {
        self.grid.domain()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn x_space(&self) -> XSpace {
        self.x_space
    }

    pub fn y_space(&self) -> YSpace {
        self.y_space
    }

    /// Number of y planes (`q` on nodes, `n_max` in Hermite space).
    pub fn modes(&self) -> usize {
        modes_of(&self.grid, self.y_space)
    }

    pub fn plane(&self, k: usize) -> &[Complex64] {
        let p = self.grid.points();
        &self.data[k * p..(k + 1) * p]
    }

    pub fn is_compatible(&self, other: &Field) -> bool {
        self.grid.same_domain(&other.grid)
    }

    pub fn to_x(&self, target: XSpace) -> Field {
        self.clone().into_x(target)
    }

    pub fn into_x(mut self, target: XSpace) -> Field {
        if self.x_space != target {
            self.grid.clone().fft_planes(&mut self.data, target == XSpace::Physical);
            self.x_space = target;
        }
        self
    }

    pub fn to_y(&self, target: YSpace) -> Field {
        self.clone().into_y(target)
    }

    pub fn into_y(self, target: YSpace) -> Field {
        if self.y_space == target {
            return self;
        }
        let basis = self.grid.basis();
        let plane = self.grid.points();
        let mut out = vec![ZERO; modes_of(&self.grid, target) * plane];
        match target {
            YSpace::Hermite => basis.analyze_planes(&self.data, plane, &mut out),
            YSpace::Nodes => basis.synthesize_planes(&self.data, plane, &mut out),
        }
        Field { grid: self.grid, data: out, x_space: self.x_space, y_space: target }
    }

    pub fn to_repr(&self, x: XSpace, y: YSpace) -> Field {
        self.clone().into_repr(x, y)
    }

    pub fn into_repr(self, x: XSpace, y: YSpace) -> Field {
        // run the x transform while the field has n_max planes rather than q
        if y == YSpace::Nodes {
            self.into_x(x).into_y(y)
        } else {
            self.into_y(y).into_x(x)
        }
    }

    /// Fourier in x, Hermite coefficients in y.
    pub fn to_spectral(&self) -> Field {
        self.to_repr(XSpace::Fourier, YSpace::Hermite)
    }

    pub fn into_spectral(self) -> Field {
        self.into_repr(XSpace::Fourier, YSpace::Hermite)
    }

    /// Physical grid in x, quadrature nodes in y.
    pub fn to_physical(&self) -> Field {
        self.to_repr(XSpace::Physical, YSpace::Nodes)
    }

    pub fn into_physical(self) -> Field {
        self.into_repr(XSpace::Physical, YSpace::Nodes)
    }

    /// Quadrature weight attached to entry `(k, ·)` in the current representation.
    pub(crate) fn plane_weight(&self, k: usize) -> f64 {
        let wx = match self.x_space {
            XSpace::Physical => self.grid.cell(),
            XSpace::Fourier => 1.0,
        };
        let wy = match self.y_space {
            YSpace::Nodes => self.grid.basis().weights()[k],
            YSpace::Hermite => 1.0,
        };
        wx * wy
    }

    /// `‖u‖₂²` evaluated in the current representation.
    pub fn norm_sqr(&self) -> f64 {
        let p = self.grid.points();
        crate::sum::sum(
            (0..self.modes()).map(|k| self.plane_weight(k) * crate::sum::sum(self.data[k * p..(k + 1) * p].iter().map(|c| c.norm_sqr()))),
        )
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Field {
        let mut out = self.clone();
        out.scale(Complex64::new(factor, 0.0));
        out
    }

    pub fn conj(&self) -> Field {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.conj();
        }
        out
    }

    /// `self - other` after bringing `other` into this representation.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        if !self.is_compatible(other) {
            return Err(Error::param("fields live on different domains"));
        }
        let other = other.to_repr(self.x_space, self.y_space);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(out)
    }

    /// `‖self - other‖₂`.
    pub fn l2_distance(&self, other: &Field) -> Result<f64> {
        Ok(self.difference(other)?.norm_sqr().sqrt())
    }

    /// Pointwise spectral derivative along `axis`; the result is in physical x,
    /// with the y representation unchanged.
    pub fn x_derivative(&self, axis: usize) -> Field {
        let mut f = self.to_x(XSpace::Fourier);
        let p = self.grid.points();
        for k in 0..f.modes() {
            for (i, v) in f.data[k * p..(k + 1) * p].iter_mut().enumerate() {
                *v *= Complex64::new(0.0, self.grid.derivative_xi(i, axis));
            }
        }
        f.into_x(XSpace::Physical)
    }

    /// `A_1(t) u = sin t · y u − i cos t · ∂_y u` (`j = 1`) or
    /// `A_2(t) u = cos t · y u + i sin t · ∂_y u` (`j = 2`), returned in
    /// Hermite-y with the x representation unchanged, together with the squared
    /// norm pushed above the top retained mode.
    pub fn apply_aj(&self, t: f64, j: u8) -> Result<(Field, f64)> {
        let (cy, cd) = match j {
            1 => (Complex64::new(t.sin(), 0.0), Complex64::new(0.0, -t.cos())),
            2 => (Complex64::new(t.cos(), 0.0), Complex64::new(0.0, t.sin())),
            _ => return Err(Error::param(format!("A_j is defined for j in {{1, 2}}, got {j}"))),
        };
        let f = self.to_y(YSpace::Hermite);
        let plane = self.grid.points();
        let modes = f.modes();
        let y = ladder_planes(&f.data, plane, modes, Ladder::Position, true);
        let dy = ladder_planes(&f.data, plane, modes, Ladder::Derivative, true);
        let mut ext: Vec<Complex64> = y.iter().zip(&dy).map(|(a, b)| cy * a + cd * b).collect();
        let top = ext.split_off(modes * plane);
        let wx = match f.x_space {
            XSpace::Physical => self.grid.cell(),
            XSpace::Fourier => 1.0,
        };
        let leakage = wx * crate::sum::sum(top.iter().map(|c| c.norm_sqr()));
        Ok((Field { grid: self.grid.clone(), data: ext, x_space: f.x_space, y_space: YSpace::Hermite }, leakage))
    }

    /// Largest `|u|` over the physical grid.
    pub fn max_abs(&self) -> f64 {
        let phys = self.to_physical();
        phys.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Fraction of the mass at `max_a |x_a| > frac · L`.
    pub fn tail_mass_fraction(&self, frac: f64) -> f64 {
        let rho = self.x_density();
        let total = crate::sum::sum(rho.iter().copied());
        if total == 0.0 {
            return 0.0;
        }
        let lim = frac * self.domain().l;
        let d = self.grid.d();
        let tail = crate::sum::sum(
            rho.iter()
                .enumerate()
                .filter(|(p, _)| (0..d).any(|a| self.grid.coord(*p, a).abs() > lim))
                .map(|(_, r)| *r),
        );
        tail / total
    }

    /// `ρ(x) = ∫ |u(x, y)|² dy · dx^d` on the physical x grid, so that `Σ ρ = ‖u‖²`.
    pub fn x_density(&self) -> Vec<f64> {
        let f = self.to_repr(XSpace::Physical, YSpace::Hermite);
        let plane = self.grid.points();
        let cell = self.grid.cell();
        let mut rho = vec![0.0; plane];
        for k in 0..f.modes() {
            for (r, c) in rho.iter_mut().zip(&f.data[k * plane..(k + 1) * plane]) {
                *r += c.norm_sqr();
            }
        }
        for r in &mut rho {
            *r *= cell;
        }
        rho
    }
}

fn modes_of(grid: &Grid, y: YSpace) -> usize {
    match y {
        YSpace::Nodes => grid.basis().q(),
        YSpace::Hermite => grid.basis().n_max(),
    }
}
