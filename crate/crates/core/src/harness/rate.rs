use rayon::prelude::*;

use super::report::{ExperimentReport, ReportRow};
use super::{tags, ExperimentConfig};
use crate::error::Result;
use crate::estimate::{mle, restricted_mle};
use crate::limits::LimitLawSpec;
use crate::linalg::{is_positive_definite, min_eigenvalue};
use crate::model::{asymptotic_constants, mu_moment_matrix, norming_at};
use crate::rng::StreamKey;
use crate::simulate::{simulate_streaming, step_count, StatsAccumulator};
use crate::stats::{iqr, ks_statistic};

/// Rescaled errors of one horizon, by coordinate; gated-out replications
/// are left out.
struct HorizonErrors {
    full: Vec<Vec<f64>>,
    windowed: Vec<Vec<f64>>,
    singular_full: usize,
    singular_windowed: usize,
}

fn by_coord(draws: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    (0..dim).map(|c| draws.iter().map(|d| d[c]).collect()).collect()
}

fn limit_batch(law: &LimitLawSpec, n: usize, key: StreamKey) -> Result<Vec<Vec<f64>>> {
    let sampler = law.sampler()?;
    let mut rng = key.rng();
    Ok(by_coord(
        &(0..n).map(|_| sampler.sample(&mut rng)).collect::<Vec<_>>(),
        law.dim(),
    ))
}

pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("rate", serde_json::to_value(config)?);
    let spec = &config.spec;
    let theta = &config.theta;
    let truth = theta.to_vec();
    let dim = spec.dim();
    let tol = &config.tolerances;
    let consts = asymptotic_constants(spec, theta)?;
    let lam = mu_moment_matrix(spec, theta, None)?;
    let lam_a = match config.window {
        Some(w) => Some(mu_moment_matrix(spec, theta, Some(w))?),
        None => None,
    };

    report.push(ReportRow::info(0.0, None, "alpha", consts.alpha));
    report.push(ReportRow::info(
        0.0,
        None,
        "information_factor",
        consts.information_factor(),
    ));
    for r in 0..dim {
        for c in r..dim {
            report.push(ReportRow::info(0.0, Some(r * dim + c), "lambda", lam[(r, c)]));
            if let Some(a) = &lam_a {
                report.push(ReportRow::info(0.0, Some(r * dim + c), "lambda_window", a[(r, c)]));
            }
        }
    }
    if let Some(a) = &lam_a {
        let gap = &lam - a;
        report.push(ReportRow::info(
            0.0,
            None,
            "lambda_minus_lambda_window_min_eigenvalue",
            min_eigenvalue(&gap),
        ));
        report.push(ReportRow::flag(
            0.0,
            None,
            "lambda_minus_lambda_window_positive_definite",
            is_positive_definite(&gap),
        ));
    }

    let draws = config.options.limit_draws;
    let law = LimitLawSpec::from_matrix(consts.alpha, &lam)?;
    let limit = limit_batch(&law, draws, StreamKey::derive(config.master_seed, &[tags::LIMIT, 0]))?;
    let calib = limit_batch(&law, draws, StreamKey::derive(config.master_seed, &[tags::LIMIT, 1]))?;
    let limit_a = match &lam_a {
        Some(a) => Some(limit_batch(
            &LimitLawSpec::from_matrix(consts.alpha, a)?,
            draws,
            StreamKey::derive(config.master_seed, &[tags::LIMIT, 2]),
        )?),
        None => None,
    };
    for c in 0..dim {
        report.push(ReportRow::at_most(
            0.0,
            Some(c),
            "ks_calibration",
            ks_statistic(&limit[c], &calib[c])?,
            tol.ks_calibration,
        ));
    }

    let mut previous: Option<(u64, HorizonErrors)> = None;
    for (hi, &n) in config.horizons.iter().enumerate() {
        let steps = step_count(n as f64, config.dt)?;
        let scale = norming_at(&consts, n as f64).alpha_n.sqrt();
        let rescale = |est: &[f64]| -> Vec<f64> { est.iter().zip(&truth).map(|(e, t)| scale * (e - t)).collect() };
        let reps: Vec<(Option<Vec<f64>>, Option<Vec<f64>>)> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let key = StreamKey::derive(config.master_seed, &[tags::RATE, hi as u64, r as u64]);
                let mut full = StatsAccumulator::new(spec, config.dt, None);
                let mut win = config.window.map(|w| StatsAccumulator::new(spec, config.dt, Some(w)));
                simulate_streaming(spec, theta, spec.x0, steps, config.dt, key, |_, x, psi, next| {
                    full.push(x, psi, next - x);
                    if let Some(w) = win.as_mut() {
                        w.push(x, psi, next - x);
                    }
                })?;
                let e = mle(&full.stats())?;
                let full_err = e.j_invertible.then(|| rescale(&e.theta_hat));
                let win_err = match &win {
                    Some(w) => {
                        let e = restricted_mle(&w.stats(), spec)?;
                        e.j_invertible.then(|| rescale(&e.theta_hat))
                    }
                    None => None,
                };
                Ok((full_err, win_err))
            })
            .collect::<Result<_>>()?;

        let full: Vec<Vec<f64>> = reps.iter().filter_map(|r| r.0.clone()).collect();
        let windowed: Vec<Vec<f64>> = reps.iter().filter_map(|r| r.1.clone()).collect();
        let errs = HorizonErrors {
            singular_full: reps.len() - full.len(),
            singular_windowed: if config.window.is_some() {
                reps.len() - windowed.len()
            } else {
                0
            },
            full: by_coord(&full, dim),
            windowed: by_coord(&windowed, dim),
        };

        let h = n as f64;
        let reps_f = config.replications as f64;
        report.push(ReportRow::info(h, None, "alpha_n", scale * scale));
        report.push(ReportRow::at_least(
            h,
            None,
            "nonsingular_fraction",
            1.0 - errs.singular_full as f64 / reps_f,
            tol.min_nonsingular_fraction,
        ));
        if config.window.is_some() {
            report.push(ReportRow::at_least(
                h,
                None,
                "nonsingular_fraction_window",
                1.0 - errs.singular_windowed as f64 / reps_f,
                tol.min_nonsingular_fraction,
            ));
        }
        if full.is_empty() {
            report.note(format!("horizon {n}: no replication passed the gate"));
            continue;
        }
        for c in 0..dim {
            report.push(ReportRow::at_most(
                h,
                Some(c),
                "ks_limit",
                ks_statistic(&errs.full[c], &limit[c])?,
                tol.ks_limit,
            ));
            let iqr_full = iqr(&errs.full[c])?;
            report.push(ReportRow::info(h, Some(c), "iqr", iqr_full));
            if let (Some(la), false) = (&limit_a, windowed.is_empty()) {
                report.push(ReportRow::at_most(
                    h,
                    Some(c),
                    "ks_limit_window",
                    ks_statistic(&errs.windowed[c], &la[c])?,
                    tol.ks_limit,
                ));
                let iqr_win = iqr(&errs.windowed[c])?;
                report.push(ReportRow::info(h, Some(c), "iqr_window", iqr_win));
                report.push(ReportRow::above(
                    h,
                    Some(c),
                    "iqr_window_minus_iqr",
                    iqr_win - iqr_full,
                    0.0,
                ));
            }
            if let Some((_, prev)) = &previous {
                report.push(ReportRow::at_most(
                    h,
                    Some(c),
                    "ks_between_horizons",
                    ks_statistic(&errs.full[c], &prev.full[c])?,
                    tol.ks_between_horizons,
                ));
            }
        }
        previous = Some((n, errs));
    }
    Ok(report)
}
