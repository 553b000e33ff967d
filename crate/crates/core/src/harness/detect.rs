//! Blow-up and scattering detectors and the windowed criterion norm.

use serde::{Deserialize, Serialize};

use super::DetectorConfig;
use crate::error::{Error, Result};
use crate::evolution::{scattering_profile, Snapshot, TraceRow};
use crate::field::{aniso_norm, NormBundle};
use crate::functionals::CriterionExponents;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupDetection {
    pub fired: bool,
    /// Time of the row that fired.
    pub fired_at: Option<f64>,
    /// Power-law extrapolation of the singular time.
    pub t_est: Option<f64>,
    /// `max ‖∇_z u(t)‖² / ‖∇_z u(0)‖²`.
    pub growth_ratio: f64,
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let (mt, my) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let den: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Least-squares residual of `log g = a − β log(T − t)` for a trial `T`.
fn power_law_residual(ts: &[f64], logs: &[f64], big_t: f64) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| (big_t - t).ln()).collect();
    let b = slope(&xs, logs);
    let n = xs.len() as f64;
    let a = logs.iter().sum::<f64>() / n - b * xs.iter().sum::<f64>() / n;
    xs.iter().zip(logs).map(|(x, y)| (y - a - b * x).powi(2)).sum()
}

/// Singular time `T` of a power-law fit `‖∇_z u‖ ∝ (T − t)^{−β}` over `rows`,
/// found by golden-section search past the last sample.
pub fn power_law_blowup_time(rows: &[TraceRow]) -> Option<f64> {
    if rows.len() < 3 {
        return None;
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let logs: Vec<f64> = rows.iter().map(|r| 0.5 * r.grad_z_sq().ln()).collect();
    let last = ts[ts.len() - 1];
    let span = (last - ts[0]).max(1e-12);
    let (mut lo, mut hi) = (last + 1e-9 * span, last + 10.0 * span);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if power_law_residual(&ts, &logs, a) < power_law_residual(&ts, &logs, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let t = 0.5 * (lo + hi);
    t.is_finite().then_some(t)
}

/// Fires at the first row with `‖∇_z u‖² ≥ factor · ‖∇_z u(0)‖²` whose last
/// `trend_samples` rows have a positive least-squares slope, or when the
/// stepper underflowed.
pub fn detect_blowup(rows: &[TraceRow], dt_underflow: bool, factor: f64, trend_samples: usize) -> BlowupDetection {
    let Some(first) = rows.first() else {
        return BlowupDetection { fired: dt_underflow, fired_at: None, t_est: None, growth_ratio: 0.0 };
    };
    let g0 = first.grad_z_sq();
    let growth_ratio = rows.iter().map(|r| r.grad_z_sq() / g0).fold(0.0, f64::max);
    let window = trend_samples.max(2);
    for (i, r) in rows.iter().enumerate() {
        if r.grad_z_sq() >= factor * g0 {
            let start = (i + 1).saturating_sub(window);
            let tail = &rows[start..=i];
            let ts: Vec<f64> = tail.iter().map(|r| r.t).collect();
            let ys: Vec<f64> = tail.iter().map(|r| r.grad_z_sq()).collect();
            if tail.len() >= 2 && slope(&ts, &ys) > 0.0 {
                let fit_start = (i + 1).saturating_sub(window.max(8));
                return BlowupDetection {
                    fired: true,
                    fired_at: Some(r.t),
                    t_est: power_law_blowup_time(&rows[fit_start..=i]),
                    growth_ratio,
                };
            }
        }
    }
    if dt_underflow {
        let last = rows.len() - 1;
        let fit_start = (last + 1).saturating_sub(window.max(8));
        return BlowupDetection {
            fired: true,
            fired_at: Some(rows[last].t),
            t_est: power_law_blowup_time(&rows[fit_start..]).or(Some(rows[last].t)),
            growth_ratio,
        };
    }
    BlowupDetection { fired: false, fired_at: None, t_est: None, growth_ratio }
}

/// `‖v(t_{k+1}) − v(t_k)‖_Σ` for the pullback `v(t) = e^{−itH} u(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyDelta {
    pub t0: f64,
    pub t1: f64,
    pub delta: f64,
}

/// Cauchy deltas over the dyadic windows `[2^k t₀, 2^{k+1} t₀]` covered by
/// the snapshots.
pub fn cauchy_deltas(snapshots: &[Snapshot], start: f64) -> Result<Vec<CauchyDelta>> {
    let find = |t: f64| snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9 * t.max(1.0));
    let mut out = Vec::new();
    let mut t = start;
    let Some(mut prev) = find(t) else {
        return Ok(out);
    };
    let mut v_prev = scattering_profile(&prev.field, prev.t);
    while let Some(next) = find(2.0 * t) {
        let v = scattering_profile(&next.field, next.t);
        let diff = v.difference(&v_prev)?;
        out.push(CauchyDelta { t0: prev.t, t1: next.t, delta: NormBundle::compute(&diff, &[])?.sigma_sq.sqrt() });
        prev = next;
        v_prev = v;
        t *= 2.0;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterEvidence {
    pub fired: bool,
    /// First report time where (a) and (b) hold together.
    pub fired_at: Option<f64>,
    /// `max_s P(s) / P(t)` at the last row, `P = ‖u‖_{α+2}^{α+2}`.
    pub potential_decay_ratio: f64,
    /// `Q / ‖∇_x u‖²` at the last row.
    pub q_ratio_final: f64,
    pub cauchy_deltas: Vec<CauchyDelta>,
    /// Length of the final run of decreasing deltas.
    pub cauchy_decreasing: usize,
    pub boundary_clean: bool,
    pub potential_decayed: bool,
    pub q_ratio_converged: bool,
    pub cauchy_ok: bool,
}

/// Deltas at or below this fraction of `‖v‖_Σ` count as converged.
const CAUCHY_FLOOR: f64 = 1e-12;

/// Scattering proxy: the potential energy decays, `Q/‖∇_x u‖² → 1`, the
/// pullback is Cauchy across dyadic windows, and the box stayed clean.
pub fn detect_scatter_proxy(
    rows: &[TraceRow],
    snapshots: &[Snapshot],
    boundary_threshold: f64,
    cfg: &DetectorConfig,
) -> Result<ScatterEvidence> {
    let boundary_clean = rows.iter().all(|r| r.boundary_mass <= boundary_threshold);
    let mut running_max: f64 = 0.0;
    let mut fired_at = None;
    let mut ratio = 1.0;
    let mut q_ratio = 0.0;
    for r in rows {
        running_max = running_max.max(r.lp_alpha_plus_2);
        ratio = if r.lp_alpha_plus_2 > 0.0 { running_max / r.lp_alpha_plus_2 } else { f64::INFINITY };
        q_ratio = if r.grad_x_sq > 0.0 { r.q / r.grad_x_sq } else { f64::NAN };
        if fired_at.is_none() && ratio >= cfg.potential_decay_factor && (q_ratio - 1.0).abs() <= cfg.q_ratio_tol {
            fired_at = Some(r.t);
        }
    }
    let potential_decayed = ratio >= cfg.potential_decay_factor;
    let q_ratio_converged = (q_ratio - 1.0).abs() <= cfg.q_ratio_tol;

    let deltas = cauchy_deltas(snapshots, cfg.cauchy_start)?;
    let scale = snapshots.first().map(|s| NormBundle::compute(&s.field, &[]).map(|n| n.sigma_sq.sqrt())).transpose()?.unwrap_or(0.0);
    let mut decreasing = 0;
    for w in deltas.windows(2).rev() {
        if w[1].delta < w[0].delta || w[1].delta <= CAUCHY_FLOOR * scale {
            decreasing += 1;
        } else {
            break;
        }
    }
    // k decreasing steps span k + 1 windows
    let cauchy_decreasing = if deltas.is_empty() { 0 } else { decreasing + 1 };
    let cauchy_ok = cauchy_decreasing >= cfg.cauchy_windows;
    let fired = potential_decayed && q_ratio_converged && cauchy_ok && boundary_clean && fired_at.is_some();
    Ok(ScatterEvidence {
        fired,
        fired_at: if fired { fired_at } else { None },
        potential_decay_ratio: ratio,
        q_ratio_final: q_ratio,
        cauchy_deltas: deltas,
        cauchy_decreasing,
        boundary_clean,
        potential_decayed,
        q_ratio_converged,
        cauchy_ok,
    })
}

/// `(∫_{t₀}^{t₁} ‖u(t)‖^q_{L^r_x H^s_y} dt)^{1/q}` by the trapezoid rule over
/// the snapshots in the window, which must reach both ends.
pub fn criterion_norm(snapshots: &[Snapshot], t0: f64, t1: f64, exps: &CriterionExponents) -> Result<f64> {
    if !(t1 > t0) {
        return Err(Error::param(format!("empty window [{t0}, {t1}]")));
    }
    let tol = 1e-9 * t1.abs().max(1.0);
    let inside: Vec<&Snapshot> = snapshots.iter().filter(|s| s.t >= t0 - tol && s.t <= t1 + tol).collect();
    let covered = inside.len() >= 2 && (inside[0].t - t0).abs() <= tol && (inside[inside.len() - 1].t - t1).abs() <= tol;
    if !covered {
        return Err(Error::param(format!("snapshots do not cover the window [{t0}, {t1}]")));
    }
    let vals: Vec<f64> = inside.iter().map(|s| aniso_norm(&s.field, exps.r, exps.s).map(|v| v.powf(exps.q))).collect::<Result<_>>()?;
    let mut integral = 0.0;
    for k in 1..inside.len() {
        integral += 0.5 * (inside[k].t - inside[k - 1].t) * (vals[k] + vals[k - 1]);
    }
    Ok(integral.powf(1.0 / exps.q))
}
