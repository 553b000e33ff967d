//! Scalar functionals of a field: mass, energy, action, the semivirial `Q`,
//! `I_ω`, the optimal dilation `λ⋆`, and the truncated virial.

mod virial;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, NormBundle};

pub use virial::{phi_tilde, truncated_virial, truncated_virial_remainder, VirialRemainder, WeightDerivatives};

/// The four norms that determine every functional along the dilation orbit
/// `λ ↦ u^λ`, plus the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseNorms {
    pub mass: f64,
    pub grad_x_sq: f64,
    pub dy_sq: f64,
    pub y_weight_sq: f64,
    /// `‖u‖_{α+2}^{α+2}`
    pub potential: f64,
    pub alpha: f64,
    pub d: usize,
}

impl BaseNorms {
    pub fn compute(u: &Field) -> Self {
        let alpha = u.domain().alpha;
        let nb = NormBundle::compute(u, &[]).expect("empty p list");
        Self::from_bundle(&nb, u.lp_integral(alpha + 2.0), alpha, u.domain().d)
    }

    pub fn from_bundle(nb: &NormBundle, potential: f64, alpha: f64, d: usize) -> Self {
        Self {
            mass: nb.l2 * nb.l2,
            grad_x_sq: nb.grad_x_sq,
            dy_sq: nb.dy_sq,
            y_weight_sq: nb.y_weight_sq,
            potential,
            alpha,
            d,
        }
    }

    /// `αd / (2(α+2))`
    fn q_coeff(&self) -> f64 {
        self.alpha * self.d as f64 / (2.0 * (self.alpha + 2.0))
    }

    pub fn energy(&self) -> f64 {
        0.5 * (self.grad_x_sq + self.dy_sq) + 0.5 * self.y_weight_sq - self.potential / (self.alpha + 2.0)
    }

    pub fn action(&self, omega: f64) -> f64 {
        self.energy() + 0.5 * omega * self.mass
    }

    pub fn q(&self) -> f64 {
        self.grad_x_sq - self.q_coeff() * self.potential
    }

    pub fn i_omega(&self, omega: f64) -> f64 {
        self.action(omega) - 2.0 / (self.alpha * self.d as f64) * self.q()
    }

    /// Norms of `u^λ` from the exact dilation laws.
    pub fn dilated(&self, lambda: f64) -> Self {
        Self {
            grad_x_sq: lambda * lambda * self.grad_x_sq,
            potential: lambda.powf(self.alpha * self.d as f64 / 2.0) * self.potential,
            ..*self
        }
    }

    pub fn lambda_star(&self) -> Result<f64> {
        let ad = self.alpha * self.d as f64;
        if !(self.grad_x_sq > 0.0) {
            return Err(Error::Undefined("lambda_star needs a nonzero x-gradient".into()));
        }
        if !(self.potential > 0.0) {
            return Err(Error::Undefined("lambda_star needs a nonzero L^{alpha+2} norm".into()));
        }
        if ad == 4.0 {
            return Err(Error::Undefined("lambda_star is undefined at the mass-critical power alpha d = 4".into()));
        }
        Ok((2.0 * (self.alpha + 2.0) * self.grad_x_sq / (ad * self.potential)).powf(2.0 / (ad - 4.0)))
    }
}

pub fn mass(u: &Field) -> f64 {
    u.norm_sqr()
}

pub fn energy(u: &Field) -> f64 {
    BaseNorms::compute(u).energy()
}

/// `S_ω = E + (ω/2) M`.
pub fn action(u: &Field, omega: f64) -> f64 {
    BaseNorms::compute(u).action(omega)
}

/// `Q = ‖∇_x u‖² − αd/(2(α+2)) ‖u‖_{α+2}^{α+2}`.
pub fn semivirial_q(u: &Field) -> f64 {
    BaseNorms::compute(u).q()
}

/// `I_ω = S_ω − 2/(αd) Q`.
pub fn i_omega(u: &Field, omega: f64) -> f64 {
    BaseNorms::compute(u).i_omega(omega)
}

/// The unique dilation with `Q(u^{λ⋆}) = 0`.
pub fn lambda_star(u: &Field) -> Result<f64> {
    BaseNorms::compute(u).lambda_star()
}

/// Anisotropic Gagliardo-Nirenberg quotient
/// `‖u‖_{α+2}^{α+2} / (‖∇_x u‖^{αd/2} ‖∂_y u‖^{α/2} ‖u‖^{(4−α(d−1))/2})`.
pub fn gn_quotient(u: &Field) -> Result<f64> {
    let alpha = u.domain().alpha;
    let d = u.domain().d as f64;
    let nb = NormBundle::compute(u, &[])?;
    let denom = nb.grad_x_sq.sqrt().powf(alpha * d / 2.0) * nb.dy_sq.sqrt().powf(alpha / 2.0) * nb.l2.powf((4.0 - alpha * (d - 1.0)) / 2.0);
    if !(denom > 0.0) {
        return Err(Error::Undefined("Gagliardo-Nirenberg quotient needs nonzero gradients".into()));
    }
    Ok(u.lp_integral(alpha + 2.0) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub energy: f64,
    pub action_omega: f64,
    pub q: f64,
    pub i_omega: f64,
    pub lambda_star: Option<f64>,
    #[serde(flatten)]
    pub norm_bundle: NormBundle,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time: Option<f64>,
}

impl FunctionalReport {
    pub fn compute(u: &Field, omega: f64) -> Self {
        let alpha = u.domain().alpha;
        let nb = NormBundle::compute(u, &[alpha + 2.0]).expect("alpha + 2 > 1");
        let potential = nb.lp(alpha + 2.0).unwrap_or(0.0).powf(alpha + 2.0);
        let base = BaseNorms::from_bundle(&nb, potential, alpha, u.domain().d);
        Self {
            mass: base.mass,
            energy: base.energy(),
            action_omega: base.action(omega),
            q: base.q(),
            i_omega: base.i_omega(omega),
            lambda_star: base.lambda_star().ok(),
            norm_bundle: nb,
            time: None,
        }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub lambda: f64,
    pub action: f64,
    pub q: f64,
}

/// `(λ, S_ω(u^λ), Q(u^λ))` along `lambdas`, from the closed-form dilation laws.
pub fn scan_action_profile(u: &Field, omega: f64, lambdas: &[f64]) -> Vec<ProfilePoint> {
    let base = BaseNorms::compute(u);
    scan_profile(&base, omega, lambdas)
}

pub fn scan_profile(base: &BaseNorms, omega: f64, lambdas: &[f64]) -> Vec<ProfilePoint> {
    lambdas
        .iter()
        .map(|&lambda| {
            let b = base.dilated(lambda);
            ProfilePoint { lambda, action: b.action(omega), q: b.q() }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionExponents {
    pub q: f64,
    pub r: f64,
    pub s_c: f64,
    pub s: f64,
}

/// Space-time exponents of the scattering criterion.
pub fn criterion_exponents(d: usize, alpha: f64) -> Result<CriterionExponents> {
    let d = d as f64;
    let denom = 2.0 * alpha + 4.0 - d * alpha;
    if !(denom > 0.0) || !(alpha > 0.0) {
        return Err(Error::param(format!("no admissible criterion exponents for d = {d}, alpha = {alpha}")));
    }
    let s_c = d / 2.0 - 2.0 / alpha;
    Ok(CriterionExponents { q: 2.0 * alpha * (alpha + 2.0) / denom, r: alpha + 2.0, s_c, s: 1.0 - s_c })
}
