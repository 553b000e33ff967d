//! Hermite functions, Gauss-Hermite transforms and ladder operators for the
//! one-dimensional oscillator `H = -d²/dy² + y²`.
//!
//! The normalized Hermite functions `e_n` are the eigenfunctions of `H` with
//! eigenvalues `2n + 1`. They are generated by the three-term recurrence
//!
//! ```text
//! e_{n+1}(y) = sqrt(2/(n+1)) y e_n(y) - sqrt(n/(n+1)) e_{n-1}(y)
//! ```
//!
//! started from `e_0(y) = π^{-1/4} exp(-y²/2)`. The running values are kept in
//! a rescaled form so that large `n` and large `|y|` neither overflow nor
//! flush to zero prematurely.
//!
//! Quadrature weights are folded with `exp(y²)`, so a [`HermiteBasis`]
//! integrates `∫ f(y) dy` directly for Gaussian-decaying `f`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const RESCALE: f64 = 1e150;

/// Recurrence state `(v_{n-1}, v_n, log_scale)` with `e_k = v_k · exp(log_scale)`.
fn scaled_recurrence(y: f64, n: usize, mut visit: impl FnMut(usize, f64, f64)) -> (f64, f64, f64) {
    let mut log_scale = -0.25 * PI.ln() - 0.5 * y * y;
    let mut prev = 0.0;
    let mut cur = 1.0;
    visit(0, cur, log_scale);
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
        visit(k + 1, cur, log_scale);
    }
    (prev, cur, log_scale)
}

#[inline]
fn unscale(v: f64, log_scale: f64) -> f64 {
    if log_scale > -700.0 {
        v * log_scale.exp()
    } else if v == 0.0 {
        0.0
    } else {
        v.signum() * (v.abs().ln() + log_scale).exp()
    }
}

/// Values `e_0(y), ..., e_{count-1}(y)`.
pub fn hermite_functions(y: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    scaled_recurrence(y, count - 1, |k, v, s| out[k] = unscale(v, s));
    out
}

/// Gauss-Hermite nodes (ascending) and folded weights for `q` points.
///
/// Nodes come from the eigenvalues of the symmetric Jacobi matrix and are then
/// polished by Newton steps on `e_q`. Folded weights use the identity
/// `w_k exp(y_k²) = 1 / (q e_{q-1}(y_k)²)`.
pub fn gauss_hermite(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(q, q);
    for k in 0..q.saturating_sub(1) {
        let b = ((k + 1) as f64 / 2.0).sqrt();
        jacobi[(k, k + 1)] = b;
        jacobi[(k + 1, k)] = b;
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let sq = (2.0 * q as f64).sqrt();
    for y in nodes.iter_mut() {
        for _ in 0..3 {
            let (prev, cur, _) = scaled_recurrence(*y, q, |_, _, _| {});
            let deriv = sq * prev - *y * cur;
            if deriv != 0.0 {
                *y -= cur / deriv;
            }
        }
    }
    // Enforce the exact reflection symmetry of the rule.
    for k in 0..q / 2 {
        let m = 0.5 * (nodes[q - 1 - k] - nodes[k]);
        nodes[k] = -m;
        nodes[q - 1 - k] = m;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }

    let weights = nodes
        .iter()
        .map(|&y| {
            let (_, last, s) = scaled_recurrence(y, q - 1, |_, _, _| {});
            (-2.0 * (last.abs().ln() + s)).exp() / q as f64
        })
        .collect();
    (nodes, weights)
}

/// Truncated Hermite basis with its Gauss-Hermite quadrature.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    n_max: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Row-major `q × n_max`, entry `(k, n) = e_n(y_k)`.
    table: Vec<f64>,
    /// Row-major `n_max × q`, entry `(n, k) = w_k e_n(y_k)`.
    analysis: Vec<f64>,
}

impl HermiteBasis {
    /// Builds the basis with `n_max` modes on a `q`-point rule. Requires `q ≥ 2 n_max`
    /// so that every product `e_m e_n` is integrated exactly.
    pub fn new(n_max: usize, q: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::param("n_max must be at least 1"));
        }
        if q < 2 * n_max {
            return Err(Error::param(format!(
                "quadrature size q = {q} cannot resolve products of {n_max} modes (need q >= {})",
                2 * n_max
            )));
        }
        let (nodes, weights) = gauss_hermite(q);
        let mut table = Vec::with_capacity(q * n_max);
        for &y in &nodes {
            table.extend(hermite_functions(y, n_max));
        }
        let mut analysis = vec![0.0; n_max * q];
        for k in 0..q {
            for n in 0..n_max {
                analysis[n * q + k] = weights[k] * table[k * n_max + n];
            }
        }
        let eigenvalues = (0..n_max).map(|n| (2 * n + 1) as f64).collect();
        Ok(Self { n_max, nodes, weights, eigenvalues, table, analysis })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn q(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `λ_n = 2n + 1`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `e_n(y_k)`.
    pub fn value(&self, k: usize, n: usize) -> f64 {
        self.table[k * self.n_max + n]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let (q, n) = (self.q(), self.n_max);
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                let g: f64 = crate::sum::sum((0..q).map(|k| self.analysis[a * q + k] * self.table[k * n + b]));
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `c_n = Σ_k w_k f(y_k) e_n(y_k)`.
    pub fn analyze(&self, values: &[Complex64]) -> Result<HermiteCoeffs> {
        check_len(values.len(), self.q())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_max];
        self.analyze_planes(values, 1, &mut out);
        Ok(HermiteCoeffs::new(out))
    }

    /// `f(y_k) = Σ_n c_n e_n(y_k)`; shorter coefficient vectors are zero-padded.
    pub fn synthesize(&self, coeffs: &HermiteCoeffs) -> Result<Vec<Complex64>> {
        if coeffs.len() > self.n_max {
            return Err(Error::ShapeMismatch { expected: self.n_max, got: coeffs.len() });
        }
        let mut padded = coeffs.coeffs.clone();
        padded.resize(self.n_max, Complex64::new(0.0, 0.0));
        let mut out = vec![Complex64::new(0.0, 0.0); self.q()];
        self.synthesize_planes(&padded, 1, &mut out);
        Ok(out)
    }

    /// Batched analysis: `src` holds `q` planes of `plane` values each,
    /// `dst` receives `n_max` planes.
    pub(crate) fn analyze_planes(&self, src: &[Complex64], plane: usize, dst: &mut [Complex64]) {
        assert_eq!(src.len(), self.q() * plane);
        assert_eq!(dst.len(), self.n_max * plane);
        real_times_complex(&self.analysis, self.n_max, self.q(), src, plane, dst);
    }

    /// Batched synthesis: `n_max` planes in, `q` planes out.
    pub(crate) fn synthesize_planes(&self, src: &[Complex64], plane: usize, dst: &mut [Complex64]) {
        assert_eq!(src.len(), self.n_max * plane);
        assert_eq!(dst.len(), self.q() * plane);
        real_times_complex(&self.table, self.q(), self.n_max, src, plane, dst);
    }
}

/// `dst (rows × plane) = mat (rows × inner) · src (inner × plane)` with a real
/// matrix acting on complex planes.
fn real_times_complex(mat: &[f64], rows: usize, inner: usize, src: &[Complex64], plane: usize, dst: &mut [Complex64]) {
    let cols = 2 * plane;
    // SAFETY: Complex64 is #[repr(C)] { re, im }, so a slice of `len` complex
    // values is a valid slice of `2 len` f64 values with the same alignment.
    // `src` and `dst` are distinct borrows, and the strides below stay within
    // `inner × cols` and `rows × cols` elements respectively.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            inner,
            cols,
            1.0,
            mat.as_ptr(),
            inner as isize,
            1,
            src.as_ptr() as *const f64,
            cols as isize,
            1,
            0.0,
            dst.as_mut_ptr() as *mut f64,
            cols as isize,
            1,
        );
    }
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// Coefficients `c_n = ⟨f, e_n⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCoeffs {
    pub coeffs: Vec<Complex64>,
}

impl HermiteCoeffs {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    /// The unit vector `δ_{n,index}` of length `n`.
    pub fn unit(n: usize, index: usize) -> Self {
        let mut c = Self::zeros(n);
        c.coeffs[index] = Complex64::new(1.0, 0.0);
        c
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::sum::sum(self.coeffs.iter().map(|c| c.norm_sqr()))
    }

    /// `c_n ↦ (2n+1)^γ c_n`.
    pub fn apply_h_power(&self, gamma: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, &c)| c * ((2 * n + 1) as f64).powf(gamma))
            .collect();
        Self::new(coeffs)
    }

    /// Multiplication by `y`.
    pub fn apply_y(&self) -> LadderOutput {
        LadderOutput::from_extended(ladder_planes(&self.coeffs, 1, self.len(), Ladder::Position, true), 1)
    }

    /// Differentiation `∂_y`.
    pub fn apply_dy(&self) -> LadderOutput {
        LadderOutput::from_extended(ladder_planes(&self.coeffs, 1, self.len(), Ladder::Derivative, true), 1)
    }
}

/// A ladder-operator image kept at the input length. The component pushed
/// above the top retained mode is reported as `leakage` (its squared norm).
#[derive(Debug, Clone)]
pub struct LadderOutput {
    pub coeffs: HermiteCoeffs,
    pub leakage: f64,
}

impl LadderOutput {
    fn from_extended(mut ext: Vec<Complex64>, plane: usize) -> Self {
        let keep = ext.len() - plane;
        let leakage = crate::sum::sum(ext[keep..].iter().map(|c| c.norm_sqr()));
        ext.truncate(keep);
        Self { coeffs: HermiteCoeffs::new(ext), leakage }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ladder {
    /// `y e_n = √(n/2) e_{n-1} + √((n+1)/2) e_{n+1}`
    Position,
    /// `∂_y e_n = √(n/2) e_{n-1} - √((n+1)/2) e_{n+1}`
    Derivative,
}

/// Applies a ladder operator to `modes` planes of `plane` values each. With
/// `extended` the output carries `modes + 1` planes, otherwise the raised top
/// mode is dropped.
pub(crate) fn ladder_planes(
    src: &[Complex64],
    plane: usize,
    modes: usize,
    kind: Ladder,
    extended: bool,
) -> Vec<Complex64> {
    assert_eq!(src.len(), plane * modes);
    let out_modes = if extended { modes + 1 } else { modes };
    let mut out = vec![Complex64::new(0.0, 0.0); out_modes * plane];
    let sign = match kind {
        Ladder::Position => 1.0,
        Ladder::Derivative => -1.0,
    };
    for m in 0..out_modes {
        let dst = &mut out[m * plane..(m + 1) * plane];
        if m + 1 < modes {
            let s = ((m + 1) as f64 / 2.0).sqrt();
            let up = &src[(m + 1) * plane..(m + 2) * plane];
            for (d, &u) in dst.iter_mut().zip(up) {
                *d += s * u;
            }
        }
        if m >= 1 && m - 1 < modes {
            let s = sign * (m as f64 / 2.0).sqrt();
            let down = &src[(m - 1) * plane..m * plane];
            for (d, &u) in dst.iter_mut().zip(down) {
                *d += s * u;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn e0_at_origin() {
        let b = HermiteBasis::new(1, 8).unwrap();
        let e0 = hermite_functions(0.0, 1)[0];
        assert!((e0 - 0.751_125_544_464_942_5).abs() < 1e-15);
        assert_eq!(b.eigenvalues(), &[1.0]);
    }

    #[test]
    fn eigenvalues_are_odd_integers() {
        let b = HermiteBasis::new(4, 16).unwrap();
        assert_eq!(b.eigenvalues(), &[1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let b = HermiteBasis::new(32, 64).unwrap();
        assert!(b.orthonormality_error() < 1e-10, "{}", b.orthonormality_error());
    }

    #[test]
    fn rejects_under_resolved_quadrature() {
        assert!(matches!(HermiteBasis::new(10, 19), Err(Error::InvalidParameter(_))));
        assert!(HermiteBasis::new(0, 4).is_err());
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let v = hermite_functions(40.0, 200);
        assert!(v.iter().all(|x| x.is_finite()));
        // e_0(40) underflows, high modes are tiny but representable
        assert_eq!(v[0], 0.0);
        let w = hermite_functions(25.0, 400);
        assert!(w[399].abs() > 0.0 && w[399].abs() < 1.0);
    }

    #[test]
    fn table_columns_obey_recurrence() {
        let b = HermiteBasis::new(40, 80).unwrap();
        for k in 0..b.q() {
            let y = b.nodes()[k];
            for n in 1..39 {
                let nf = n as f64;
                let lhs = b.value(k, n + 1);
                let rhs = (2.0 / (nf + 1.0)).sqrt() * y * b.value(k, n) - (nf / (nf + 1.0)).sqrt() * b.value(k, n - 1);
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analyze_basis_vector_and_zero() {
        let b = HermiteBasis::new(8, 16).unwrap();
        let e2: Vec<_> = (0..b.q()).map(|k| c(b.value(k, 2))).collect();
        let coeffs = b.analyze(&e2).unwrap();
        for (n, v) in coeffs.coeffs.iter().enumerate() {
            let target = if n == 2 { 1.0 } else { 0.0 };
            assert!((v - c(target)).norm() < 1e-13);
        }
        let zero = b.analyze(&vec![c(0.0); b.q()]).unwrap();
        assert!(zero.coeffs.iter().all(|v| v.norm() == 0.0));
        assert!(b.analyze(&[c(1.0)]).is_err());
    }

    #[test]
    fn analyze_y_times_ground_mode() {
        let b = HermiteBasis::new(8, 16).unwrap();
        let samples: Vec<_> = (0..b.q()).map(|k| c(b.nodes()[k] * b.value(k, 0))).collect();
        let coeffs = b.analyze(&samples).unwrap();
        // <y e_0, e_1> by brute-force trapezoid on a fine grid
        let h = 1e-3;
        let oracle: f64 = (-20_000..=20_000)
            .map(|i| {
                let y = i as f64 * h;
                let e = hermite_functions(y, 2);
                y * e[0] * e[1] * h
            })
            .sum();
        assert!((oracle - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((coeffs.coeffs[1].re - oracle).abs() < 1e-12);
        for n in [0, 2, 3, 4, 5, 6, 7] {
            assert!(coeffs.coeffs[n].norm() < 1e-13);
        }
    }

    #[test]
    fn synthesize_roundtrips() {
        let b = HermiteBasis::new(16, 32).unwrap();
        let v = b.synthesize(&HermiteCoeffs::unit(16, 0)).unwrap();
        for k in 0..b.q() {
            assert!((v[k].re - b.value(k, 0)).abs() < 1e-15);
        }
        let mut f = HermiteCoeffs::zeros(16);
        f.coeffs[0] = c(1.0);
        f.coeffs[3] = c(0.5);
        let back = b.analyze(&b.synthesize(&f).unwrap()).unwrap();
        for (x, y) in back.coeffs.iter().zip(&f.coeffs) {
            assert!((x - y).norm() < 1e-12);
        }
        let harmonic = HermiteCoeffs::new((0..16).map(|n| c(1.0 / (2 * n + 1) as f64)).collect());
        let back = b.analyze(&b.synthesize(&harmonic).unwrap()).unwrap();
        for (x, y) in back.coeffs.iter().zip(&harmonic.coeffs) {
            assert!((x - y).norm() < 1e-11);
        }
        assert!(b.synthesize(&HermiteCoeffs::zeros(17)).is_err());
    }

    #[test]
    fn functional_calculus() {
        let v = HermiteCoeffs::unit(6, 2);
        assert_eq!(v.apply_h_power(0.0), v);
        assert_eq!(v.apply_h_power(1.0).coeffs[2], c(5.0));
        let w = HermiteCoeffs::new((0..6).map(|n| Complex64::new(n as f64, 1.0)).collect());
        let back = w.apply_h_power(-1.0).apply_h_power(1.0);
        for (x, y) in back.coeffs.iter().zip(&w.coeffs) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn ladder_on_ground_mode() {
        let e0 = HermiteCoeffs::unit(4, 0);
        let y = e0.apply_y();
        assert!((y.coeffs.coeffs[1].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(y.leakage, 0.0);
        let dy = e0.apply_dy();
        assert!((dy.coeffs.coeffs[1].re + 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ladder_reports_top_mode_leakage() {
        let top = HermiteCoeffs::unit(4, 3);
        let y = top.apply_y();
        assert!((y.leakage - 2.0).abs() < 1e-14); // |c_3|² · 4/2
        assert!(HermiteCoeffs::unit(4, 1).apply_dy().leakage == 0.0);
    }

    #[test]
    fn diagonal_of_oscillator_from_ladders() {
        for n in 0..10 {
            let e = HermiteCoeffs::unit(12, n);
            let yy = e.apply_y().coeffs.apply_y().coeffs;
            let dd = e.apply_dy().coeffs.apply_dy().coeffs;
            let h = yy.coeffs[n] - dd.coeffs[n];
            assert!((h - c((2 * n + 1) as f64)).norm() < 1e-12);
        }
    }
}
