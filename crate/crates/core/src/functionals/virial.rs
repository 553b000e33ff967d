//! Localized virial identity with the radial weight `ϕ̃_R(x) = R² ϕ̃(|x|/R)`.
//!
//! Along the flow, `V_R'' = 8 Q(u) + A_R` where, with `a = ϕ̃_R`,
//!
//! ```text
//! A_R = 4 ∫ (a'/r − 2) |∇_x u|²
//!     + 4 ∫ (a'' − a'/r) |x̂·∇_x u|²
//!     − 2α/(α+2) ∫ (Δa − 2d) |u|^{α+2}
//!     − ∫ Δ²a |u|²
//! ```
//!
//! All four integrands vanish where `|x| ≤ R`. The last term is evaluated as
//! `−∫ (Δa − 2d) Δρ` with `Δρ = 2 Re(ū Δ_x u) + 2 |∇_x u|²` taken spectrally:
//! `Δ²a` varies on a scale of `R/10`, which the x grid does not resolve for
//! small `R`, while `Δρ` is exact on the grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, XSpace, YSpace};
use crate::sum::Compensated;

/// Coefficients of the transition polynomial in `t = r − 1` on `[1, 2]`.
/// They match `r²` to fourth order at `t = 0` and the plateau `11/5` to
/// fourth order at `t = 1`.
const TRANSITION: [f64; 10] = [1.0, 2.0, 1.0, 0.0, 0.0, -119.0 / 5.0, 49.0, -38.0, 12.0, -1.0];

/// Plateau value of `ϕ̃` on `[2, ∞)`.
pub const PLATEAU: f64 = 2.2;

/// `ϕ̃` and its first four derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDerivatives {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

/// The profile `ϕ̃(r)`: `r²` on `[0, 1]`, a degree-9 polynomial on `[1, 2]`,
/// constant on `[2, ∞)`. It is `C⁴`, nondecreasing, and `ϕ̃'' ≤ 2`.
pub fn phi_tilde(r: f64) -> WeightDerivatives {
    if r <= 1.0 {
        return WeightDerivatives { value: r * r, d1: 2.0 * r, d2: 2.0, d3: 0.0, d4: 0.0 };
    }
    if r >= 2.0 {
        return WeightDerivatives { value: PLATEAU, d1: 0.0, d2: 0.0, d3: 0.0, d4: 0.0 };
    }
    let t = r - 1.0;
    let mut out = [0.0; 5];
    for (k, &c) in TRANSITION.iter().enumerate() {
        // Derivative j of c t^k is c k!/(k-j)! t^{k-j}.
        let mut factor = c;
        for (j, slot) in out.iter_mut().enumerate() {
            if j > k {
                break;
            }
            *slot += factor * t.powi((k - j) as i32);
            factor *= (k - j) as f64;
        }
    }
    WeightDerivatives { value: out[0], d1: out[1], d2: out[2], d3: out[3], d4: out[4] }
}

fn check_radius(u: &Field, r: f64) -> Result<()> {
    let l = u.domain().l;
    if !(r > 0.0) {
        return Err(Error::param(format!("virial radius must be positive, got {r}")));
    }
    if r > 0.8 * l {
        return Err(Error::param(format!("virial radius {r} exceeds 0.8 L = {}", 0.8 * l)));
    }
    Ok(())
}

/// `V_R = ∫ ϕ̃_R(x) |u|² dz`.
pub fn truncated_virial(u: &Field, r: f64) -> Result<f64> {
    check_radius(u, r)?;
    let rho = u.x_density();
    let grid = u.grid();
    let mut acc = Compensated::new();
    for (p, m) in rho.iter().enumerate() {
        acc.add(r * r * phi_tilde(grid.radius(p) / r).value * m);
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialRemainder {
    pub a_r: f64,
    /// Gradient annulus, radial derivative, potential annulus, bi-Laplacian.
    pub components: [f64; 4],
}

/// `A_R` and its four constituent integrals.
pub fn truncated_virial_remainder(u: &Field, r_cut: f64) -> Result<VirialRemainder> {
    check_radius(u, r_cut)?;
    let grid = u.grid().clone();
    let d = grid.d();
    let df = d as f64;
    let alpha = u.domain().alpha;
    let cell = grid.cell();
    let plane = grid.points();

    let active: Vec<usize> = (0..plane).filter(|&p| grid.radius(p) > r_cut).collect();
    if active.is_empty() {
        return Ok(VirialRemainder { a_r: 0.0, components: [0.0; 4] });
    }

    let herm = u.to_repr(XSpace::Fourier, YSpace::Hermite);
    let grads: Vec<Field> = (0..d).map(|a| herm.x_derivative(a)).collect();
    let phys_h = herm.to_x(XSpace::Physical);
    let mut lap_u = herm.clone();
    for k in 0..lap_u.modes() {
        let plane_data = &mut lap_u.data_mut()[k * plane..(k + 1) * plane];
        for (v, xi2) in plane_data.iter_mut().zip(grid.xi_sq()) {
            *v *= -xi2;
        }
    }
    let lap_u = lap_u.into_x(XSpace::Physical);
    let nodes = u.to_physical();
    let weights = grid.basis().weights();

    let mut t = [Compensated::new(), Compensated::new(), Compensated::new(), Compensated::new()];
    let mut g = vec![Complex64::new(0.0, 0.0); d];
    for &p in &active {
        let r = grid.radius(p);
        let w = phi_tilde(r / r_cut);
        let a1 = r_cut * w.d1;
        let a2 = w.d2;
        let a1_r = a1 / r;
        let lap = a2 + (df - 1.0) * a1_r;

        let mut grad_sq = 0.0;
        let mut radial_sq = 0.0;
        let mut lap_rho = 0.0;
        for n in 0..herm.modes() {
            let mut radial = Complex64::new(0.0, 0.0);
            for (a, ga) in g.iter_mut().enumerate() {
                *ga = grads[a].plane(n)[p];
                grad_sq += ga.norm_sqr();
                radial += *ga * (grid.coord(p, a) / r);
            }
            radial_sq += radial.norm_sqr();
            lap_rho += 2.0 * (phys_h.plane(n)[p].conj() * lap_u.plane(n)[p]).re;
        }
        let mut pot = 0.0;
        for (k, wk) in weights.iter().enumerate() {
            pot += wk * nodes.plane(k)[p].norm().powf(alpha + 2.0);
        }
        t[0].add(4.0 * (a1_r - 2.0) * grad_sq * cell);
        t[1].add(4.0 * (a2 - a1_r) * radial_sq * cell);
        t[2].add(-2.0 * alpha / (alpha + 2.0) * (lap - 2.0 * df) * pot * cell);
        t[3].add(-(lap - 2.0 * df) * (lap_rho + 2.0 * grad_sq) * cell);
    }
    let components = [t[0].value(), t[1].value(), t[2].value(), t[3].value()];
    Ok(VirialRemainder { a_r: components.iter().sum(), components })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_is_c4_and_admissible() {
        let eps = 1e-11;
        for edge in [1.0, 2.0] {
            let a = phi_tilde(edge - eps);
            let b = phi_tilde(edge + eps);
            for (x, y) in [(a.value, b.value), (a.d1, b.d1), (a.d2, b.d2), (a.d3, b.d3), (a.d4, b.d4)] {
                assert!((x - y).abs() < 1e-6, "edge {edge}: {x} vs {y}");
            }
        }
        for i in 0..=2000 {
            let w = phi_tilde(3.0 * i as f64 / 2000.0);
            assert!(w.d2 <= 2.0 + 1e-12);
            assert!(w.d1 >= -1e-12);
            assert!(w.value >= 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for r in [1.1, 1.37, 1.5, 1.83] {
            let w = phi_tilde(r);
            let (m, p) = (phi_tilde(r - h), phi_tilde(r + h));
            assert!(((p.value - m.value) / (2.0 * h) - w.d1).abs() < 1e-6);
            assert!(((p.d1 - m.d1) / (2.0 * h) - w.d2).abs() < 1e-6);
            assert!(((p.d2 - m.d2) / (2.0 * h) - w.d3).abs() < 1e-5);
            assert!(((p.d3 - m.d3) / (2.0 * h) - w.d4).abs() < 1e-4);
        }
    }
}
