mod common;

use common::*;
use num_complex::Complex64;
use phnls::evolution::{linear_step, trace_row, Snapshot, TraceRow};
use phnls::field::{aniso_norm, DomainConfig, Field, XProfile, XSpace, YSpace};
use phnls::functionals::criterion_exponents;
use phnls::ground_state::{solve_petviashvili, PetviashviliOptions, Verdict};
use phnls::harness::*;

const CONFIG: &str = r#"
seed = 7
t_max = 2.0

[domain]
d = 1
l = 16.0
n_x = 256
n_max = 8
q = 16
alpha = 5.0
omega = 1.0

[initial]
kind = "product_state"
n = 0
amplitude = [0.5, 0.0]

[initial.profile]
kind = "gaussian"
sigma = 1.0

[step]
dt = 0.01
snapshot_interval = 0.25
report_interval = 0.25

[morawetz]
radii = [1.0, 2.0]
s_grid = [-1.0, 0.0, 1.0]
"#;

fn row(t: f64, grad: f64) -> TraceRow {
    TraceRow {
        t,
        mass: 1.0,
        energy: 0.0,
        action_omega: 0.0,
        q: grad,
        grad_x_sq: grad,
        dy_sq: 0.0,
        y_weight_sq: 0.0,
        lp_alpha_plus_2: 1.0,
        v_semi: 0.0,
        boundary_mass: 0.0,
        dt: 0.01,
    }
}

/// Rows and snapshots of the free flow of `u` at `k · step` up to `t_max`;
/// snapshots only at integer times.
fn linear_trace(u: &Field, t_max: f64, step: f64) -> (Vec<TraceRow>, Vec<Snapshot>) {
    let mut rows = Vec::new();
    let mut snaps = Vec::new();
    let n = (t_max / step).round() as usize;
    for k in 0..=n {
        let t = k as f64 * step;
        let v = linear_step(u, t);
        rows.push(trace_row(&v, t, step, 0.9));
        if (t - t.round()).abs() < 1e-12 {
            snaps.push(Snapshot { t, field: v });
        }
    }
    (rows, snaps)
}

#[test]
fn config_canonical_round_trip() {
    let cfg = ExperimentConfig::parse(CONFIG).unwrap();
    let text = cfg.canonical();
    let again = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.canonical(), text);
    assert_eq!(again.hash(), cfg.hash());
    assert_eq!(cfg.hash().len(), 64);
    assert_eq!(cfg.detectors, DetectorConfig::default());
    assert_eq!(cfg.morawetz.as_ref().unwrap().eta, 0.1);

    let mut other = cfg.clone();
    other.seed = 8;
    assert_ne!(other.hash(), cfg.hash());
}

#[test]
fn config_rejects_bad_input() {
    assert!(ExperimentConfig::parse(&CONFIG.replace("seed = 7", "seed = 7\nbogus = 1")).is_err());
    assert!(ExperimentConfig::parse(&CONFIG.replace("t_max = 2.0", "t_max = -1.0")).is_err());
    assert!(ExperimentConfig::parse(&CONFIG.replace("n_x = 256", "n_x = 250")).is_err());
    assert!(ExperimentConfig::parse(&CONFIG.replace("radii = [1.0, 2.0]", "radii = []")).is_err());
    let gs = CONFIG.replace("kind = \"product_state\"\nn = 0\namplitude = [0.5, 0.0]", "kind = \"ground_state_scaled\"\nscale = 0.0");
    let gs = gs.replace("\n[initial.profile]\nkind = \"gaussian\"\nsigma = 1.0\n", "");
    assert!(matches!(ExperimentConfig::parse(&gs), Err(phnls::Error::Config(_))));
    assert!(ExperimentConfig::parse(&gs.replace("scale = 0.0", "scale = 0.95")).is_ok());
}

#[test]
fn blowup_never_fires_on_linear_trace() {
    let g = grid(1, 32.0, 512, 8, 5.0, 1.0);
    let u = random_smooth(&g, 3, (0.8, 1.2), 2.0);
    let (rows, _) = linear_trace(&u, 4.0, 0.1);
    let det = detect_blowup(&rows, false, 100.0, 5);
    assert!(!det.fired);
    assert!(det.t_est.is_none());
    // ‖∇_x u‖ is conserved; ‖∂_y u‖ only trades with ‖y u‖
    let gx0 = rows[0].grad_x_sq;
    assert!(rows.iter().all(|r| rel(r.grad_x_sq, gx0) < 1e-10));
    assert!(det.growth_ratio < 3.0, "{}", det.growth_ratio);
}

#[test]
fn blowup_power_law_extrapolation() {
    // ‖∇u‖ = (1 − t)^{-1/2}
    let rows: Vec<TraceRow> = (0..=100).map(|k| row(0.00995 * k as f64, 1.0 / (1.0 - 0.00995 * k as f64))).collect();
    let det = detect_blowup(&rows, false, 100.0, 5);
    assert!(det.fired);
    assert!(det.fired_at.unwrap() >= 0.99 - 1e-12);
    let t = det.t_est.unwrap();
    assert!((t - 1.0).abs() < 1e-6, "{t}");
}

#[test]
fn blowup_needs_rising_trend() {
    let mut rows: Vec<TraceRow> = (0..10).map(|k| row(k as f64, 1.0)).collect();
    rows[5].grad_x_sq = 200.0;
    for r in rows.iter_mut().skip(6) {
        r.grad_x_sq = 150.0;
    }
    // the spike fires on its rising edge
    assert_eq!(detect_blowup(&rows, false, 100.0, 2).fired_at, Some(5.0));
    // a falling tail at the threshold does not
    let falling: Vec<TraceRow> = (0..10).map(|k| row(k as f64, if k == 0 { 1.0 } else { 1000.0 - k as f64 })).collect();
    let det = detect_blowup(&falling[1..], false, 100.0, 5);
    assert!(!det.fired);
}

#[test]
fn blowup_fires_on_dt_underflow() {
    let rows: Vec<TraceRow> = (0..4).map(|k| row(0.1 * k as f64, 1.0 + k as f64)).collect();
    let det = detect_blowup(&rows, true, 100.0, 5);
    assert!(det.fired);
    assert_eq!(det.fired_at, Some(rows[3].t));
    assert!(det.t_est.unwrap() >= rows[3].t);
    assert!(detect_blowup(&[], true, 100.0, 5).fired);
}

#[test]
fn linear_gaussian_fires_scatter_proxy() {
    let g = grid(1, 64.0, 1024, 2, 5.0, 1.0);
    let u = gaussian_e0(&g, 1.0);
    let (rows, snaps) = linear_trace(&u, 8.0, 0.25);
    let ev = detect_scatter_proxy(&rows, &snaps, 1e-6, &DetectorConfig::default()).unwrap();
    assert!(ev.boundary_clean);
    assert!(ev.potential_decayed, "{}", ev.potential_decay_ratio);
    assert!(ev.q_ratio_converged, "{}", ev.q_ratio_final);
    assert!(ev.cauchy_ok);
    assert_eq!(ev.cauchy_deltas.len(), 3);
    for d in &ev.cauchy_deltas {
        assert!(d.delta < 1e-12, "{d:?}");
    }
    assert!(ev.fired);
    // the decay ratio (1 + 4t²)^{5/4} first passes 100 at t ≈ 3.09
    let t = ev.fired_at.unwrap();
    assert!((3.0..=4.0).contains(&t), "{t}");
}

#[test]
fn boundary_breach_blocks_scatter_proxy() {
    let g = grid(1, 64.0, 1024, 2, 5.0, 1.0);
    let (mut rows, snaps) = linear_trace(&gaussian_e0(&g, 1.0), 8.0, 0.25);
    rows[10].boundary_mass = 1e-3;
    let ev = detect_scatter_proxy(&rows, &snaps, 1e-6, &DetectorConfig::default()).unwrap();
    assert!(!ev.boundary_clean);
    assert!(!ev.fired);
    assert!(ev.fired_at.is_none());
}

#[test]
fn standing_wave_never_scatters() {
    let dom = DomainConfig::new(1, 12.0, 256, 16, 5.0, 1.0).with_q(32);
    let gs = solve_petviashvili(&dom, 1.0, &PetviashviliOptions::default(), None).unwrap();
    let mut rows = Vec::new();
    let mut snaps = Vec::new();
    for k in 0..=16 {
        let t = 0.5 * k as f64;
        let mut v = gs.field.to_physical();
        v.scale(Complex64::cis(t));
        rows.push(trace_row(&v, t, 0.5, 0.9));
        snaps.push(Snapshot { t, field: v });
    }
    let ev = detect_scatter_proxy(&rows, &snaps, 1e-6, &DetectorConfig::default()).unwrap();
    assert!(!ev.fired);
    assert!(!ev.potential_decayed);
    assert!((ev.potential_decay_ratio - 1.0).abs() < 1e-10);
    assert!(ev.q_ratio_final.abs() < 1e-3, "{}", ev.q_ratio_final);
}

#[test]
fn criterion_norm_zero_and_constant() {
    let g = grid(1, 12.0, 128, 8, 5.0, 1.0);
    let exps = criterion_exponents(1, 5.0).unwrap();
    let zero = Field::zeros(&g, XSpace::Physical, YSpace::Nodes);
    let snaps: Vec<Snapshot> = (0..=10).map(|k| Snapshot { t: 0.5 * k as f64, field: zero.clone() }).collect();
    assert_eq!(criterion_norm(&snaps, 0.0, 5.0, &exps).unwrap(), 0.0);

    let u = random_smooth(&g, 9, (0.8, 1.2), 1.0);
    let a = aniso_norm(&u, exps.r, exps.s).unwrap();
    let snaps: Vec<Snapshot> = (0..=10).map(|k| Snapshot { t: 0.5 * k as f64, field: u.clone() }).collect();
    for (t0, t1) in [(0.0, 5.0), (1.0, 3.5), (2.0, 2.5)] {
        let v = criterion_norm(&snaps, t0, t1, &exps).unwrap();
        let want = (t1 - t0).powf(1.0 / exps.q) * a;
        assert!(rel(v, want) < 1e-12, "{v} vs {want}");
    }
    assert!(criterion_norm(&snaps, 0.0, 6.0, &exps).is_err());
    assert!(criterion_norm(&snaps, -1.0, 2.0, &exps).is_err());
    assert!(criterion_norm(&snaps, 0.25, 2.0, &exps).is_err());
    assert!(criterion_norm(&snaps, 2.0, 2.0, &exps).is_err());
}

#[test]
fn mismatch_flag_table() {
    use Outcome::*;
    for v in [Verdict::KPlus, Verdict::KMinus, Verdict::AboveThreshold, Verdict::OnBoundary] {
        assert!(!is_mismatch(ScatterProxy, v));
        assert!(!is_mismatch(Inconclusive, v));
    }
    assert!(!is_mismatch(Blowup, Verdict::KMinus));
    assert!(!is_mismatch(Blowup, Verdict::AboveThreshold));
    assert!(is_mismatch(Blowup, Verdict::KPlus));
    assert!(is_mismatch(Blowup, Verdict::OnBoundary));
}

#[test]
fn persisted_run_recomputes_report() {
    let cfg = ExperimentConfig::parse(CONFIG).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, Some(dir.path())).unwrap();
    let report = &out.report;
    assert_eq!(report.classification_in.verdict, Verdict::KPlus);
    assert!(!report.mismatch);
    assert_eq!(report.config_hash, cfg.hash());
    assert_eq!(report.version, VERSION);

    let (outcome, evidence) = evidence_from_trace(&cfg, &dir.path().join("trace")).unwrap();
    assert_eq!(outcome, report.outcome);
    assert_eq!(serde_json::to_string(&evidence).unwrap(), serde_json::to_string(&report.evidence).unwrap());

    let text = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert_eq!(text, cfg.canonical());
    let stored: DichotomyReport = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(&stored, report);
    assert!(dir.path().join("ground_state.json").exists());

    let m = out.morawetz.unwrap();
    assert_eq!(m.rows.len(), 9 * 2 * 3);
    assert_eq!(m.summary.bounds.len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("morawetz.csv")).unwrap();
    assert!(csv.starts_with("t,s,R,Q_loc,grad_loc,pass,M"));
    assert_eq!(csv.lines().count(), m.rows.len() + 1);
}

#[test]
fn run_rejects_missing_initial_file() {
    let text = CONFIG.replace("kind = \"product_state\"\nn = 0\namplitude = [0.5, 0.0]", "kind = \"file\"\npath = \"/nonexistent/u.phnl\"");
    let text = text.replace("\n[initial.profile]\nkind = \"gaussian\"\nsigma = 1.0\n", "");
    let cfg = ExperimentConfig::parse(&text).unwrap();
    assert!(run(&cfg, None).is_err());
}

#[test]
fn initial_field_matches_spec() {
    let cfg = ExperimentConfig::parse(CONFIG).unwrap();
    let g = phnls::field::Grid::new(cfg.domain.clone()).unwrap();
    let u = initial_field(&cfg, &g, None).unwrap();
    let want = Field::product_state(&g, &XProfile::Gaussian { sigma: 1.0 }, 0, Complex64::new(0.5, 0.0)).unwrap();
    assert!(u.l2_distance(&want).unwrap() < 1e-15);
    let gs_cfg = ExperimentConfig { initial: InitialSpec::GroundStateScaled { scale: 0.9 }, ..cfg };
    assert!(initial_field(&gs_cfg, &g, None).is_err());
}

#[test]
fn k_plus_persistence_and_sigma_bound() {
    // The Hermite projection after each nonlinear stage loses mass at first
    // order in dt while the peaked core disperses; the tight CFL keeps the
    // action drift under 1e-6.
    let dom = DomainConfig::new(1, 64.0, 1024, 32, 5.0, 1.0);
    let gs = solve_petviashvili(&dom, 1.0, &PetviashviliOptions::default(), None).unwrap();
    let m = gs.m_omega();
    let step = phnls::evolution::StepConfig { dt: 0.02, cfl_c: 1.5e-4, report_interval: 0.05, ..Default::default() };
    let mut constants = Vec::new();
    for c in [0.8, 0.9, 0.95] {
        let u0 = gs.field.scaled(c);
        let cl = phnls::ground_state::classify(&u0, 1.0, m, Default::default()).unwrap();
        assert_eq!(cl.verdict, Verdict::KPlus);
        let tr = phnls::evolution::evolve(&u0, 1.0, &step).unwrap();
        assert_eq!(tr.verdict, phnls::evolution::Verdict::Completed);
        let s0 = tr.rows[0].action_omega;
        for r in &tr.rows {
            assert!(r.q >= -1e-6 * r.grad_x_sq, "c = {c}, t = {}: Q = {}", r.t, r.q);
            assert!(r.action_omega < m);
            assert!(rel(r.action_omega, s0) < 1e-6, "c = {c}, t = {}: drift {:e}", r.t, rel(r.action_omega, s0));
        }
        constants.push(tr.rows.iter().map(|r| r.sigma_sq()).fold(0.0, f64::max) / m);
    }
    let mean = constants.iter().sum::<f64>() / 3.0;
    for k in &constants {
        assert!((k / mean - 1.0).abs() <= 0.2, "{constants:?}");
    }
}
