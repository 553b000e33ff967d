//! Fast self-checks behind `phnls verify`, on desk-sized grids.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, linear_step, StepConfig};
use crate::field::{aniso_norm, DomainConfig, Field, Grid, XProfile, XSpace, YSpace};
use crate::functionals::{criterion_exponents, energy, gn_quotient, lambda_star, scan_action_profile};
use crate::ground_state::{solve_petviashvili, solve_scaling_descent, DescentOptions, PetviashviliOptions};
use crate::hermite::HermiteBasis;
use crate::morawetz::{build_weights, interaction_m, reduced_densities, xi, AuxGrid, CutoffConfig};

pub const SUITES: [&str; 10] =
    ["spectral", "linear", "conservation", "semivirial", "scaling", "ground_state", "morawetz", "gn", "criterion", "time_reversal"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

struct Table {
    suite: &'static str,
    out: Vec<CheckResult>,
}

impl Table {
    /// Passes when `value < threshold`.
    fn below(&mut self, name: &str, value: f64, threshold: f64) {
        self.out.push(CheckResult { suite: self.suite.into(), name: name.into(), pass: value < threshold, value, threshold });
    }

    /// Passes when `value >= threshold`.
    fn at_least(&mut self, name: &str, value: f64, threshold: f64) {
        self.out.push(CheckResult { suite: self.suite.into(), name: name.into(), pass: value >= threshold, value, threshold });
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.out.push(CheckResult { suite: self.suite.into(), name: name.into(), pass: ok, value: ok as u8 as f64, threshold: 1.0 });
    }
}

fn grid(d: usize, l: f64, n_x: usize, n_max: usize) -> Result<Arc<Grid>> {
    Grid::new(DomainConfig::new(d, l, n_x, n_max, 5.0, 1.0))
}

fn packet(g: &Arc<Grid>, amp: f64) -> Result<Field> {
    Field::product_state(g, &XProfile::GaussianShifted { sigma: 1.0, x0: vec![0.3], xi0: vec![0.5] }, 0, Complex64::new(amp, 0.0))
}

fn random_field(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Result<Field> {
    let mut acc = Field::zeros(g, XSpace::Physical, YSpace::Nodes);
    for _ in 0..3 {
        let sigma = rng.random_range(0.6..1.4);
        let x0 = vec![rng.random_range(-2.0..2.0)];
        let xi0 = vec![rng.random_range(-1.0..1.0)];
        let n = rng.random_range(0..3);
        let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let term = Field::product_state(g, &XProfile::GaussianShifted { sigma, x0, xi0 }, n, amp)?;
        for (a, b) in acc.data_mut().iter_mut().zip(term.data()) {
            *a += b;
        }
    }
    Ok(acc)
}

fn spectral(t: &mut Table) -> Result<()> {
    let basis = HermiteBasis::new(64, 128)?;
    t.below("hermite_orthonormality_n64_q128", basis.orthonormality_error(), 1e-10);
    let g = grid(1, 12.0, 128, 16)?;
    let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(1))?;
    let back = u.to_spectral().to_physical();
    t.below("fft_hermite_round_trip", back.l2_distance(&u)? / u.norm_sqr().sqrt(), 1e-11);
    Ok(())
}

fn linear(t: &mut Table) -> Result<()> {
    // e^{−iπ(−∂²_y + y²)} = −1 on every Hermite mode
    let g = grid(1, 12.0, 128, 16)?;
    let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(2))?;
    let v = linear_step(&u, PI).into_repr(XSpace::Fourier, YSpace::Hermite);
    let mut free = u.to_repr(XSpace::Fourier, YSpace::Hermite);
    let plane = g.points();
    for (i, c) in free.data_mut().iter_mut().enumerate() {
        *c *= -Complex64::cis(-PI * g.xi_sq()[i % plane]);
    }
    t.below("revival_at_pi", v.l2_distance(&free)? / u.norm_sqr().sqrt(), 1e-10);

    let g = grid(1, 200.0, 2048, 2)?;
    let gauss = Field::product_state(&g, &XProfile::Gaussian { sigma: 1.0 }, 0, Complex64::new(1.0, 0.0))?;
    let sup = aniso_norm(&linear_step(&gauss, 10.0), f64::INFINITY, 0.0)?;
    let exact = PI.powf(-0.25) * 401f64.powf(-0.25);
    t.below("gaussian_sup_at_t10", (sup - exact).abs(), 1e-3);
    Ok(())
}

fn conservation(t: &mut Table) -> Result<()> {
    let g = grid(1, 48.0, 512, 32)?;
    let u = packet(&g, 1.0)?;
    let tr = evolve(&u, 5.0, &StepConfig { dt: 5e-3, report_interval: 0.5, ..Default::default() })?;
    let m0 = tr.rows[0].mass;
    t.below("mass_drift", tr.rows.iter().map(|r| (r.mass - m0).abs() / m0).fold(0.0, f64::max), 1e-10);

    let g = grid(1, 16.0, 256, 24)?;
    let u = packet(&g, 1.3)?;
    let e0 = energy(&u);
    let run = |dt: f64| -> Result<Field> {
        Ok(evolve(&u, 1.0, &StepConfig { dt, adapt: false, report_interval: 1.0, ..Default::default() })?.final_field)
    };
    let (a, b) = (run(0.02)?, run(0.01)?);
    let ratio = (energy(&a) - e0).abs() / (energy(&b) - e0).abs();
    t.at_least("energy_order", ratio.log2(), 1.9);
    Ok(())
}

fn semivirial(t: &mut Table) -> Result<()> {
    let g = grid(1, 24.0, 512, 24)?;
    let u = packet(&g, 1.4)?;
    let h = 0.02;
    let tr = evolve(&u, 4.0 * h, &StepConfig { dt: 2e-4, adapt: false, report_interval: h, ..Default::default() })?;
    let v: Vec<f64> = tr.rows.iter().map(|r| r.v_semi).collect();
    if v.len() < 5 {
        return Err(Error::param("semivirial check needs five rows"));
    }
    let fd = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
    let q8 = 8.0 * tr.rows[2].q;
    t.below("fd_second_derivative_vs_8q", (fd - q8).abs() / q8.abs(), 1e-2);
    Ok(())
}

fn scaling(t: &mut Table) -> Result<()> {
    let g = grid(1, 24.0, 512, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut signs = true;
    for _ in 0..5 {
        let u = random_field(&g, &mut rng)?;
        let ls = lambda_star(&u)?;
        let prof = scan_action_profile(&u, 1.0, &[0.5 * ls, ls, 2.0 * ls]);
        let gx = crate::field::NormBundle::compute(&u, &[])?.grad_x_sq;
        worst = worst.max(prof[1].q.abs() / (ls * ls * gx));
        signs &= prof[0].q > 0.0 && prof[2].q < 0.0 && prof[1].action > prof[0].action && prof[1].action > prof[2].action;
    }
    t.below("q_at_lambda_star", worst, 1e-8);
    t.flag("sign_pattern_and_profile_maximum", signs);
    Ok(())
}

fn ground_state(t: &mut Table) -> Result<()> {
    let dom = DomainConfig::new(1, 12.0, 256, 16, 5.0, 1.0).with_q(32);
    let gs = solve_petviashvili(&dom, 1.0, &PetviashviliOptions::default(), None)?;
    let c = &gs.certificate;
    t.below("elliptic_residual", c.elliptic_residual, 1e-8);
    t.below("q_relative", c.q_value.abs() / c.grad_x_sq, 1e-5);
    t.below("lambda_star_minus_one", (c.lambda_star_value - 1.0).abs(), 1e-4);
    let (desc, _) = solve_scaling_descent(&dom, 1.0, &DescentOptions::default(), None)?;
    t.below("methods_agree", (desc.m_omega() - gs.m_omega()).abs() / gs.m_omega(), 1e-5);
    Ok(())
}

fn morawetz(t: &mut Table) -> Result<()> {
    let g = grid(1, 3.0, 8, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = (0..32).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let u = Field::from_data(&g, data, XSpace::Physical, YSpace::Hermite)?;
    let cutoff = CutoffConfig::new(0.1)?;
    let w = build_weights(&cutoff, 1.0, 5.0, 1, &AuxGrid::for_radius(&cutoff, 1.0, 1))?;
    let (rho, j) = reduced_densities(&u);
    let mut direct = 0.0;
    for p2 in 0..8 {
        for p1 in 0..8 {
            direct += j[0][p2] * w.kernel(&[g.coord(p1, 0) - g.coord(p2, 0)])[0] * rho[p1];
        }
    }
    direct *= 2.0 * g.cell() * g.cell();
    t.below("fft_vs_direct_sum", (interaction_m(&u, &w)? - direct).abs(), 1e-10);

    let g = grid(1, 16.0, 256, 4)?;
    let u = Field::product_state(&g, &XProfile::GaussianShifted { sigma: 1.2, x0: vec![0.0], xi0: vec![0.7] }, 0, Complex64::new(1.0, 0.0))?;
    t.below("xi_of_modulated_bump", (xi(&u, &cutoff, &[0.5], 2.5)?[0] + 0.7).abs(), 1e-6);
    Ok(())
}

fn gn(t: &mut Table) -> Result<()> {
    let g = grid(1, 24.0, 256, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut running: f64 = 0.0;
    let mut worst_excess: f64 = 0.0;
    let mut finite = true;
    for k in 0..100 {
        let q = gn_quotient(&random_field(&g, &mut rng)?)?;
        finite &= q.is_finite() && q > 0.0;
        if k >= 50 {
            worst_excess = worst_excess.max(q / running);
        }
        running = running.max(q);
    }
    t.flag("quotient_finite", finite);
    t.below("excess_over_running_max", worst_excess, 1.2);
    Ok(())
}

fn criterion(t: &mut Table) -> Result<()> {
    let e = criterion_exponents(1, 5.0)?;
    t.below("exponents_d1_alpha5", (e.q - 70.0 / 9.0).abs() + (e.r - 7.0).abs() + (e.s - 0.9).abs(), 1e-12);
    let e = criterion_exponents(2, 3.0)?;
    t.below("exponents_d2_alpha3", (e.q - 7.5).abs() + (e.r - 5.0).abs() + (e.s - 2.0 / 3.0).abs(), 1e-12);
    Ok(())
}

fn time_reversal(t: &mut Table) -> Result<()> {
    // u(t) ↦ ū(−t): forward, conjugate, forward, conjugate returns the datum
    let g = grid(1, 12.0, 128, 64)?;
    let u = packet(&g, 1.0)?;
    let cfg = StepConfig { dt: 0.01, adapt: false, report_interval: 0.5, ..Default::default() };
    let fwd = evolve(&u, 0.5, &cfg)?.final_field;
    let back = evolve(&fwd.conj(), 0.5, &cfg)?.final_field.conj();
    t.below("conjugate_reversal", back.l2_distance(&u)? / u.norm_sqr().sqrt(), 1e-10);
    Ok(())
}

/// Runs one suite, or all of them when `suite` is `None` or `"all"`.
pub fn verify(suite: Option<&str>) -> Result<Vec<CheckResult>> {
    let selected: Vec<&'static str> = match suite {
        None | Some("all") => SUITES.to_vec(),
        Some(s) if SUITES.contains(&s) => SUITES.iter().copied().filter(|k| *k == s).collect(),
        Some(s) => return Err(Error::param(format!("unknown suite {s}; known: {}", SUITES.join(", ")))),
    };
    let mut out = Vec::new();
    for s in selected {
        let mut t = Table { suite: s, out: Vec::new() };
        let r = match s {
            "spectral" => spectral(&mut t),
            "linear" => linear(&mut t),
            "conservation" => conservation(&mut t),
            "semivirial" => semivirial(&mut t),
            "scaling" => scaling(&mut t),
            "ground_state" => ground_state(&mut t),
            "morawetz" => morawetz(&mut t),
            "gn" => gn(&mut t),
            "criterion" => criterion(&mut t),
            _ => time_reversal(&mut t),
        };
        if let Err(e) = r {
            t.out.push(CheckResult { suite: s.into(), name: format!("error: {e}"), pass: false, value: f64::NAN, threshold: f64::NAN });
        }
        out.extend(t.out);
    }
    Ok(out)
}
