#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64;
use phnls::field::{DomainConfig, Field, Grid, XProfile, XSpace, YSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(d: usize, l: f64, n_x: usize, n_max: usize, alpha: f64, omega: f64) -> Arc<Grid> {
    Grid::new(DomainConfig::new(d, l, n_x, n_max, alpha, omega)).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Spectral field with random coefficients on `|ξ| < ξ_max/2` and the lower
/// half of the Hermite modes.
pub fn random_band_limited(grid: &Arc<Grid>, seed: u64) -> Field {
    let mut r = rng(seed);
    let dom = grid.domain();
    let cut = std::f64::consts::PI * (dom.n_x / 4) as f64 / dom.l;
    let p = grid.points();
    let mut data = vec![Complex64::new(0.0, 0.0); dom.n_max * p];
    for n in 0..dom.n_max / 2 {
        for i in 0..p {
            let inside = (0..dom.d).all(|a| grid.derivative_xi(i, a).abs() < cut);
            if inside {
                data[n * p + i] = Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
            }
        }
    }
    Field::from_data(grid, data, XSpace::Fourier, YSpace::Hermite).unwrap()
}

/// Smooth localized field: a few modulated Gaussians in x times low Hermite modes.
pub fn random_smooth(grid: &Arc<Grid>, seed: u64, sigma_range: (f64, f64), center: f64) -> Field {
    let mut r = rng(seed);
    let d = grid.d();
    let mut acc: Option<Field> = None;
    let terms = 3;
    for _ in 0..terms {
        let sigma = r.random_range(sigma_range.0..sigma_range.1);
        let x0 = (0..d).map(|_| r.random_range(-center..center)).collect();
        let xi0 = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = r.random_range(0..grid.domain().n_max.min(4));
        let amp = Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let term = Field::product_state(grid, &XProfile::GaussianShifted { sigma, x0, xi0 }, n, amp).unwrap();
        acc = Some(match acc {
            None => term,
            Some(a) => add(&a, &term),
        });
    }
    acc.unwrap()
}

pub fn add(a: &Field, b: &Field) -> Field {
    let b = b.to_repr(a.x_space(), a.y_space());
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Field::from_data(a.grid(), data, a.x_space(), a.y_space()).unwrap()
}

pub fn gaussian_e0(grid: &Arc<Grid>, sigma: f64) -> Field {
    Field::product_state(grid, &XProfile::Gaussian { sigma }, 0, Complex64::new(1.0, 0.0)).unwrap()
}
