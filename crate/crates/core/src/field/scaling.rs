//! The mass-preserving dilation `u^λ(x, y) = λ^{d/2} u(λx, y)`.

use matrixmultiply::{zgemm, CGemmOption};
use num_complex::Complex64;

use super::{Field, XSpace, YSpace};
use crate::error::{Error, Result};

/// Mass fraction allowed outside the support radius.
const SUPPORT_TOL: f64 = 1e-12;

impl Field {
    /// Smallest `r` (in the max-norm over x axes) outside of which the mass
    /// fraction is below `1e-12`.
    pub fn support_radius(&self) -> f64 {
        let rho = self.x_density();
        let total: f64 = rho.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        let d = self.grid().d();
        let mut by_radius: Vec<(f64, f64)> = rho
            .iter()
            .enumerate()
            .map(|(p, &r)| ((0..d).map(|a| self.grid().coord(p, a).abs()).fold(0.0, f64::max), r))
            .collect();
        by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut tail = 0.0;
        for &(r, m) in &by_radius {
            tail += m;
            if tail > SUPPORT_TOL * total {
                return r;
            }
        }
        0.0
    }

    /// `u^λ(x, y) = λ^{d/2} u(λx, y)` by exact trigonometric interpolation of
    /// the periodic band-limited representation, one axis at a time. Samples
    /// that would be read from outside the box are zero.
    pub fn scale_x(&self, lambda: f64) -> Result<Field> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("dilation factor must be positive, got {lambda}")));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let l = self.domain().l;
        let support = self.support_radius();
        if support / lambda > l {
            return Err(Error::Resolution(format!(
                "dilation by {lambda} moves the support radius {support:.3} beyond the box half-width {l}"
            )));
        }
        let (x_space, y_space) = (self.x_space(), self.y_space());
        let mut f = self.to_repr(XSpace::Physical, YSpace::Hermite);
        let grid = f.grid().clone();
        let n = grid.n_x();
        let d = grid.d();

        // interp[j][k]: weight of unnormalized DFT coefficient k for the value at λ x_j
        let mut interp = vec![[0.0f64; 2]; n * n];
        for j in 0..n {
            let target = lambda * grid.x()[j];
            if target.abs() >= l {
                continue;
            }
            let shift = target + l;
            for k in 0..n {
                let val = if k == n / 2 {
                    Complex64::new((grid.xi()[k] * shift).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, grid.xi()[k] * shift)
                } / n as f64;
                interp[j * n + k] = [val.re, val.im];
            }
        }

        let fft = rustfft::FftPlanner::new().plan_fft_forward(n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let data = f.data_mut();
        for axis in 0..d {
            let stride = n.pow(axis as u32);
            let block = stride * n;
            let mut lines = vec![Complex64::new(0.0, 0.0); block];
            let mut out = vec![[0.0f64; 2]; block];
            for chunk in data.chunks_exact_mut(block) {
                for i in 0..stride {
                    for j in 0..n {
                        lines[i * n + j] = chunk[i + j * stride];
                    }
                }
                fft.process_with_scratch(&mut lines, &mut scratch);
                // out (stride × n) = lines (stride × n) · interpᵀ (n × n)
                // SAFETY: Complex64 is #[repr(C)] { re, im }, layout-compatible with
                // [f64; 2]; all buffers hold exactly the extents passed below.
                unsafe {
                    zgemm(
                        CGemmOption::Standard,
                        CGemmOption::Standard,
                        stride,
                        n,
                        n,
                        [1.0, 0.0],
                        lines.as_ptr() as *const [f64; 2],
                        n as isize,
                        1,
                        interp.as_ptr(),
                        1,
                        n as isize,
                        [0.0, 0.0],
                        out.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
                for i in 0..stride {
                    for j in 0..n {
                        let v = out[i * n + j];
                        chunk[i + j * stride] = Complex64::new(v[0], v[1]);
                    }
                }
            }
        }
        let factor = lambda.powf(d as f64 / 2.0);
        f.scale(Complex64::new(factor, 0.0));
        Ok(f.into_repr(x_space, y_space))
    }
}
