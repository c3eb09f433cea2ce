//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr, bypassing the test harness capture, and then asserts.
//!
//! Tests take a shared lock so wall-clock budgets are measured without
//! competition from the other tests in this binary.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use nullrec_core::harness::*;
use nullrec_core::limits::{sample_mittag_leffler, sample_stable};
use nullrec_core::model::*;
use nullrec_core::rng::StreamKey;
use nullrec_core::stats::{hill_estimator, median, MeanEstimate};
use rand::Rng;
use rand_distr::Open01;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct Verdict {
    id: u32,
    title: &'static str,
    failures: Vec<String>,
    details: Vec<String>,
}

impl Verdict {
    fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            failures: Vec::new(),
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.details.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn finish(self) {
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut parts = self.failures.clone();
        parts.extend(self.details);
        let line = format!(
            "criterion {} [{}]: {status} ({})\n",
            self.id,
            self.title,
            parts.join("; ")
        );
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        assert!(self.failures.is_empty(), "{}", line.trim_end());
    }
}

fn label(row: &ReportRow) -> String {
    let coord = row.coord.map_or(String::new(), |c| format!(" coord {c}"));
    let n = if row.horizon > 0.0 {
        format!(" n={}", row.horizon)
    } else {
        String::new()
    };
    format!("{}{coord}{n}", row.stat_name)
}

fn rows_at_most(v: &mut Verdict, report: &ExperimentReport, name: &str) {
    for row in report.find(name) {
        let tol = row.tolerance.expect("tolerance row");
        let ok = row.pass == Some(true);
        let op = if ok { "<=" } else { ">" };
        v.check(ok, format!("{}: {:.4} {op} {tol}", label(row), row.value));
    }
}

fn flag_rows(v: &mut Verdict, report: &ExperimentReport, name: &str) {
    let mut seen = false;
    for row in report.find(name) {
        seen = true;
        let ok = row.pass == Some(true);
        v.check(
            ok,
            format!(
                "{}: {:.4} {}",
                label(row),
                row.value,
                if ok { "ok" } else { "violated" }
            ),
        );
    }
    v.check(seen, format!("{name} reported"));
}

fn within_budget(v: &mut Verdict, elapsed: Duration, budget_s: f64) {
    let s = elapsed.as_secs_f64();
    v.check(s < budget_s, format!("runtime {s:.1}s < {budget_s}s"));
}

#[test]
fn criterion_1_exact_identities() {
    let _g = serial();
    let mut v = Verdict::new(1, "exact identities");
    let cfg = ExperimentConfig {
        replications: 100,
        horizons: vec![50],
        dt: 1e-2,
        ..ExperimentConfig::default_for(ExperimentKind::Identity)
    };
    let start = Instant::now();
    let r = run_experiment(&cfg).unwrap();
    let elapsed = start.elapsed();
    for row in &r.rows {
        if let Some(tol) = row.tolerance {
            v.check(
                row.pass == Some(true),
                format!("{} {:.2e} <= {tol:e}", row.stat_name, row.value),
            );
        }
    }
    within_budget(&mut v, elapsed, 10.0);
    v.finish();
}

#[test]
fn criterion_2_stable_laplace_transform() {
    let _g = serial();
    let mut v = Verdict::new(2, "stable Laplace transform");
    let start = Instant::now();
    let n = 100_000;
    for (i, alpha) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let mut rng = StreamKey::derive(2, &[i as u64]).rng();
        let s: Vec<f64> = (0..n).map(|_| sample_stable(alpha, &mut rng).unwrap()).collect();
        for zeta in [0.5, 1.0, 2.0] {
            let vals: Vec<f64> = s.iter().map(|x| (-zeta * x).exp()).collect();
            let m = MeanEstimate::from_sample(&vals).unwrap();
            let target = (-f64::powf(zeta, alpha)).exp();
            let z = (m.mean - target).abs() / m.stderr;
            v.check(z <= 3.0, format!("a={alpha} z={zeta}: {z:.2} se"));
        }
    }
    within_budget(&mut v, start.elapsed(), 5.0);
    v.finish();
}

#[test]
fn criterion_3_mittag_leffler() {
    let _g = serial();
    let mut v = Verdict::new(3, "Mittag-Leffler moments");
    let mut rng = StreamKey::new(3).rng();
    let vals: Vec<f64> = (0..100_000)
        .map(|_| sample_mittag_leffler(0.5, &mut rng).unwrap())
        .collect();
    let m = MeanEstimate::from_sample(&vals).unwrap();
    let target = 2.0 / PI.sqrt();
    let z = (m.mean - target).abs() / m.stderr;
    v.check(z <= 3.0, format!("mean V {:.5} vs {target:.5}: {z:.2} se", m.mean));

    // running means of 1/V at 10³, 10⁴, 10⁵, medians over 20 independent streams
    let checkpoints = [1_000usize, 10_000, 100_000];
    let mut at = vec![Vec::new(); 3];
    for s in 0..20u64 {
        let mut rng = StreamKey::derive(3, &[s]).rng();
        let mut sum = 0.0;
        let mut next = 0;
        for i in 1..=checkpoints[2] {
            sum += 1.0 / sample_mittag_leffler(0.5, &mut rng).unwrap();
            if i == checkpoints[next] {
                at[next].push(sum / i as f64);
                next += 1;
            }
        }
    }
    let med: Vec<f64> = at.iter().map(|x| median(x).unwrap()).collect();
    v.check(
        med[0] < med[1] && med[1] < med[2],
        format!(
            "running mean of 1/V grows: {:.3} < {:.3} < {:.3}",
            med[0], med[1], med[2]
        ),
    );
    v.finish();
}

#[test]
fn criterion_4_life_cycle_tails() {
    let _g = serial();
    let mut v = Verdict::new(4, "life-cycle tails");
    // the Hill estimator must first recover a synthetic Pareto index
    let mut rng = StreamKey::new(4).rng();
    let pareto: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(Open01).powf(-2.0)).collect();
    let a = hill_estimator(&pareto, 500).unwrap();
    v.check((a - 0.5).abs() <= 0.05, format!("synthetic Hill {a:.4}"));

    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Tail);
    cfg.theta = ParamVector::zeros(1);
    cfg.dt = 1e-3;
    cfg.horizons = vec![100_000];
    cfg.options.target_cycles = 20_000;
    cfg.options.hill_k = Some(1000);
    let start = Instant::now();
    let r = run_experiment(&cfg).unwrap();
    let elapsed = start.elapsed();
    let val = |name: &str| r.find(name).next().map(|row| row.value);
    let completed = val("cycles").unwrap() - val("censored_cycles").unwrap();
    v.check(completed >= 5000.0, format!("{completed} completed cycles"));
    match val("hill_alpha") {
        Some(h) => v.check((0.43..=0.57).contains(&h), format!("hill alpha {h:.4} in [0.43, 0.57]")),
        None => v.check(false, "hill alpha missing".into()),
    }
    let c = val("tail_constant").unwrap_or(f64::NAN);
    let ct = 4.0 / (2.0 * PI).sqrt();
    let rel = (c - ct).abs() / ct;
    v.check(rel <= 0.25, format!("tail constant {c:.4} vs {ct:.4}: rel {rel:.3}"));
    within_budget(&mut v, elapsed, 900.0);
    v.finish();
}

fn rate_report() -> &'static (ExperimentReport, Duration) {
    static REPORT: OnceLock<(ExperimentReport, Duration)> = OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = ExperimentConfig {
            theta: ParamVector::new(0.0, vec![0.3]),
            horizons: vec![1000, 4000],
            dt: 1e-2,
            replications: 1000,
            window: Some(Window::new(-2.0, 2.0).unwrap()),
            ..ExperimentConfig::default_for(ExperimentKind::Rate)
        };
        assert_eq!(cfg.options.limit_draws, 2000);
        let start = Instant::now();
        let r = run_experiment(&cfg).unwrap();
        (r, start.elapsed())
    })
}

#[test]
fn criterion_5_rate_and_limit_law() {
    let _g = serial();
    let mut v = Verdict::new(5, "rate and limit law");
    let (r, elapsed) = rate_report();
    rows_at_most(&mut v, r, "ks_between_horizons");
    rows_at_most(&mut v, r, "ks_limit");
    rows_at_most(&mut v, r, "ks_calibration");
    within_budget(&mut v, *elapsed, 2700.0);
    v.finish();
}

#[test]
fn criterion_6_restricted_spread() {
    let _g = serial();
    let mut v = Verdict::new(6, "restricted estimator spread");
    let (r, _) = rate_report();
    flag_rows(&mut v, r, "iqr_window_minus_iqr");
    flag_rows(&mut v, r, "lambda_minus_lambda_window_positive_definite");
    v.finish();
}

#[test]
fn criterion_7_ratio_limit_and_inconsistency() {
    let _g = serial();
    let mut v = Verdict::new(7, "ratio limit and naive inconsistency");
    let cfg = ExperimentConfig {
        theta: ParamVector::new(0.0, vec![0.5]),
        horizons: vec![10, 100, 1000, 10_000],
        replications: 50,
        ..ExperimentConfig::default_for(ExperimentKind::Rlt)
    };
    let r = run_experiment(&cfg).unwrap();
    rows_at_most(&mut v, &r, "bias_rel_error");
    flag_rows(&mut v, &r, "naive_over_mle_error");
    v.finish();
}

#[test]
fn criterion_8_quadrature_oracles() {
    let _g = serial();
    let mut v = Verdict::new(8, "quadrature oracles");
    let spec = ModelSpec::new(1.0, DriftBasis::none(), 0.0).unwrap();
    let t = ParamVector::zeros(0);
    let full = mu_moment_matrix(&spec, &t, None).unwrap()[(0, 0)];
    v.check(
        (full - FRAC_PI_2).abs() <= 1e-6,
        format!("full line {:.2e}", (full - FRAC_PI_2).abs()),
    );
    let w = mu_moment_matrix(&spec, &t, Some(Window::new(-1.0, 1.0).unwrap())).unwrap()[(0, 0)];
    let target = PI / 4.0 - 0.5;
    v.check(
        (w - target).abs() <= 1e-8,
        format!("window [-1, 1] {:.2e}", (w - target).abs()),
    );
    let f = DriftBasis::sinc().numeric_limit_pos(0);
    v.check(
        (f - FRAC_PI_2).abs() <= 1e-4,
        format!("sinc antiderivative at +inf {:.2e}", (f - FRAC_PI_2).abs()),
    );
    v.finish();
}

#[test]
fn criterion_9_risk_ordering() {
    let _g = serial();
    let mut v = Verdict::new(9, "minimax risk ordering");
    let cfg = ExperimentConfig {
        theta: ParamVector::new(0.0, vec![0.3]),
        horizons: vec![2000],
        replications: 500,
        window: Some(Window::new(-2.0, 2.0).unwrap()),
        ..ExperimentConfig::default_for(ExperimentKind::Risk)
    };
    assert_eq!(cfg.options.risk_c, 2.0);
    let r = run_experiment(&cfg).unwrap();
    v.check(
        r.find("dropped_grid_points").all(|row| row.value == 0.0),
        "no grid point dropped".into(),
    );
    for name in ["bound_minus_sup_risk_in_stderr", "sup_risk_window_minus_sup_risk"] {
        for row in r.find(name) {
            v.check(row.pass == Some(true), format!("{name} {:.4}", row.value));
        }
    }
    v.finish();
}
