//! Positive solutions of `−Δ_z φ + y²φ + ωφ = |φ|^α φ` and the sign
//! classification of data below the ground-state action.

mod descent;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DomainConfig, Field, Grid, NormBundle, XProfile, XSpace, YSpace};
use crate::functionals::BaseNorms;

pub use descent::{solve_scaling_descent, DescentOptions, DescentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Petviashvili,
    ScalingDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PetviashviliOptions {
    /// Relative change between iterates.
    pub tol: f64,
    /// Elliptic residual relative to `‖φ‖_Σ`.
    pub res_tol: f64,
    pub max_iter: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl Default for PetviashviliOptions {
    fn default() -> Self {
        Self { tol: 1e-12, res_tol: 1e-10, max_iter: 2000, gamma_min: 1e-3, gamma_max: 1e3 }
    }
}

/// Everything a solve certifies about its output, without the field itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateCertificate {
    pub domain: DomainConfig,
    pub omega: f64,
    pub method: Method,
    pub iterations: usize,
    pub m_omega: f64,
    pub elliptic_residual: f64,
    #[serde(rename = "Q_value")]
    pub q_value: f64,
    pub lambda_star_value: f64,
    /// `|⟨S_ω'(φ), φ⟩|` relative to `‖φ‖_{α+2}^{α+2}`.
    pub nehari_defect: f64,
    pub mass: f64,
    pub grad_x_sq: f64,
    /// Largest `|Im φ| / max|φ|` on the grid.
    pub imag_defect: f64,
    /// Smallest `Re φ / max|φ|` over points where `|φ| > 1e-8 max|φ|`.
    pub min_interior_ratio: f64,
    /// Relative L² size of the part of `φ` odd under some reflection.
    pub symmetry_defect: f64,
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    /// Converged profile in the physical representation.
    pub field: Field,
    pub certificate: GroundStateCertificate,
}

impl GroundStateResult {
    pub fn m_omega(&self) -> f64 {
        self.certificate.m_omega
    }

    /// Path of the certificate stored next to the snapshot at `path`.
    pub fn certificate_path(path: &Path) -> PathBuf {
        let mut name = path.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }

    /// Writes the profile as a PHNL snapshot at `path` and the certificate
    /// as JSON at `path` with `.json` appended.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::field::snapshot::write(&self.field, path)?;
        crate::io::atomic_write(&Self::certificate_path(path), serde_json::to_string_pretty(&self.certificate)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let certificate: GroundStateCertificate = serde_json::from_slice(&std::fs::read(Self::certificate_path(path))?)?;
        let grid = Grid::new(certificate.domain.clone())?;
        let field = crate::field::snapshot::read(path, Some(&grid))?;
        Ok(Self { field, certificate })
    }
}

/// `|ξ|² + 2n + 1 + ω` on the fully spectral layout.
pub(crate) fn operator_symbol(grid: &Grid, omega: f64) -> Vec<f64> {
    let plane = grid.points();
    let mut out = Vec::with_capacity(plane * grid.domain().n_max);
    for n in 0..grid.domain().n_max {
        out.extend(grid.xi_sq().iter().map(|k| k + (2 * n + 1) as f64 + omega));
    }
    out
}

/// Spectral coefficients of `|φ|^α φ` for spectral `phi`; the imaginary part
/// is discarded on the physical grid so real iterates stay real.
pub(crate) fn nonlinearity(phi: &Field, alpha: f64, force_real: bool) -> Field {
    let mut p = phi.to_physical();
    for v in p.data_mut() {
        if force_real {
            v.im = 0.0;
        }
        *v *= v.norm().powf(alpha);
    }
    p.into_spectral()
}

pub(crate) fn initial_guess(grid: &Arc<Grid>) -> Result<Field> {
    Field::product_state(grid, &XProfile::Gaussian { sigma: 1.0 }, 0, Complex64::new(1.0, 0.0))
}

/// `‖(H+ω)φ − |φ|^αφ‖₂ / ‖φ‖_Σ` for spectral `phi`.
pub fn elliptic_residual(phi: &Field, omega: f64) -> f64 {
    let s = phi.to_spectral();
    let alpha = phi.domain().alpha;
    let sym = operator_symbol(s.grid(), omega);
    let nl = nonlinearity(&s, alpha, false);
    let r: f64 = s.data().iter().zip(nl.data()).zip(&sym).map(|((c, n), l)| (c * l - n).norm_sqr()).sum();
    let sigma = NormBundle::compute(&s, &[]).map(|nb| nb.sigma_sq).unwrap_or(0.0);
    r.sqrt() / sigma.sqrt()
}

fn reflect_defect(phys_h: &Field) -> f64 {
    // x reflection j -> N - j (mod N) about x = 0 on each axis, y parity from odd Hermite modes
    let grid = phys_h.grid();
    let n = grid.n_x();
    let d = grid.d();
    let plane = grid.points();
    let total = phys_h.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    let cell = grid.cell();
    let mut worst: f64 = 0.0;
    for axis in 0..d {
        let stride = n.pow(axis as u32);
        let mut acc = 0.0;
        for m in 0..phys_h.modes() {
            let pl = phys_h.plane(m);
            for p in 0..plane {
                let j = (p / stride) % n;
                let jr = (n - j) % n;
                let q = p - j * stride + jr * stride;
                acc += (pl[p] - pl[q]).norm_sqr() / 4.0;
            }
        }
        worst = worst.max(acc * cell / total);
    }
    let odd: f64 = (1..phys_h.modes()).step_by(2).map(|m| phys_h.plane(m).iter().map(|c| c.norm_sqr()).sum::<f64>()).sum();
    worst = worst.max(odd * cell / total);
    worst.sqrt()
}

pub(crate) fn certify(phi: Field, omega: f64, method: Method, iterations: usize) -> GroundStateResult {
    let base = BaseNorms::compute(&phi);
    let nb = NormBundle::compute(&phi, &[]).expect("no p list");
    let nehari = nb.grad_z_sq() + nb.y_weight_sq + omega * base.mass - base.potential;
    let phys = phi.to_physical();
    let max = phys.max_abs();
    let mut imag: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    for v in phys.data() {
        imag = imag.max(v.im.abs() / max);
        if v.norm() > 1e-8 * max {
            min_ratio = min_ratio.min(v.re / max);
        }
    }
    let certificate = GroundStateCertificate {
        domain: phi.domain().clone(),
        omega,
        method,
        iterations,
        m_omega: base.action(omega),
        elliptic_residual: elliptic_residual(&phi, omega),
        q_value: base.q(),
        lambda_star_value: base.lambda_star().unwrap_or(f64::NAN),
        nehari_defect: nehari.abs() / base.potential,
        mass: base.mass,
        grad_x_sq: base.grad_x_sq,
        imag_defect: imag,
        min_interior_ratio: min_ratio,
        symmetry_defect: reflect_defect(&phi.to_repr(XSpace::Physical, YSpace::Hermite)),
    };
    GroundStateResult { field: phys, certificate }
}

/// Petviashvili iteration `φ ← γ^{(α+1)/α} (H+ω)^{-1}(|φ|^α φ)` with
/// `γ = ⟨(H+ω)φ, φ⟩ / ⟨|φ|^α φ, φ⟩`, starting from `initial` or a Gaussian
/// product state of unit mass.
pub fn solve_petviashvili(
    domain: &DomainConfig,
    omega: f64,
    opts: &PetviashviliOptions,
    initial: Option<&Field>,
) -> Result<GroundStateResult> {
    if !(omega > 0.0) {
        return Err(Error::param(format!("omega must be positive, got {omega}")));
    }
    let grid = Grid::new(domain.clone())?;
    let alpha = domain.alpha;
    let mut phi = match initial {
        Some(f) if f.grid().same_domain(&grid) => f.to_spectral(),
        Some(_) => return Err(Error::param("initial iterate lives on a different domain")),
        None => initial_guess(&grid)?.into_spectral(),
    };
    let sym = operator_symbol(&grid, omega);
    let power = (alpha + 1.0) / alpha;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let nl = nonlinearity(&phi, alpha, true);
        let lin: f64 = phi.data().iter().zip(&sym).map(|(c, l)| l * c.norm_sqr()).sum();
        let pair: f64 = phi.data().iter().zip(nl.data()).map(|(c, n)| (c.conj() * n).re).sum();
        let gamma = lin / pair;
        if !(gamma >= opts.gamma_min && gamma <= opts.gamma_max) {
            return Err(Error::Divergence { iterations: it, reason: format!("stabilizer {gamma:e} left [{}, {}]", opts.gamma_min, opts.gamma_max) });
        }
        let factor = gamma.powf(power);
        let mut next = phi.clone();
        let mut change = 0.0;
        let mut norm = 0.0;
        let mut res = 0.0;
        for ((out, c), (n, l)) in next.data_mut().iter_mut().zip(phi.data()).zip(nl.data().iter().zip(&sym)) {
            res += (c * l - n).norm_sqr();
            *out = n * (factor / l);
            change += (*out - c).norm_sqr();
            norm += c.norm_sqr();
        }
        let sigma = NormBundle::compute(&phi, &[])?.sigma_sq;
        residual = (res / sigma).sqrt();
        let rel_change = (change / norm).sqrt();
        log::debug!("petviashvili it={it} gamma={gamma:.12} change={rel_change:.3e} residual={residual:.3e}");
        if rel_change < opts.tol && residual < opts.res_tol {
            return Ok(certify(phi, omega, Method::Petviashvili, it));
        }
        phi = next;
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    KPlus,
    KMinus,
    AboveThreshold,
    OnBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub abs_margin: f64,
    pub rel_margin: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self { abs_margin: 1e-8, rel_margin: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub action: f64,
    pub q: f64,
    pub m_omega: f64,
    pub margin: f64,
}

/// Places `u` relative to the threshold `m_omega` and the sign of `Q`.
pub fn classify(u: &Field, omega: f64, m_omega: f64, margins: Margins) -> Result<Classification> {
    let base = BaseNorms::compute(u);
    if base.mass == 0.0 {
        return Err(Error::Undefined("classification of the zero field".into()));
    }
    let action = base.action(omega);
    let q = base.q();
    let margin = margins.abs_margin.max(margins.rel_margin * m_omega.abs());
    let verdict = if action < m_omega - margin {
        if q >= 0.0 {
            Verdict::KPlus
        } else {
            Verdict::KMinus
        }
    } else if action >= m_omega + margin {
        Verdict::AboveThreshold
    } else {
        Verdict::OnBoundary
    };
    Ok(Classification { verdict, action, q, m_omega, margin })
}
