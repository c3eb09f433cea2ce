use rayon::prelude::*;

use super::report::{ExperimentReport, ReportRow};
use super::{tags, ExperimentConfig};
use crate::error::Result;
use crate::estimate::{mle, restricted_mle};
use crate::limits::{limit_risk, LimitLawSpec};
use crate::model::{asymptotic_constants, norming_at, scaled_information, ParamVector};
use crate::rng::StreamKey;
use crate::simulate::{simulate_streaming, step_count, StatsAccumulator};
use crate::stats::MeanEstimate;

/// Local parameters `0` and `±c/2·eᵢ, ±c·eᵢ` for each axis `i`, tagged with
/// the axis (`None` for the origin).
pub fn risk_grid(dim: usize, c: f64) -> Vec<(Option<usize>, Vec<f64>)> {
    let mut grid = vec![(None, vec![0.0; dim])];
    for i in 0..dim {
        for s in [-c, -c / 2.0, c / 2.0, c] {
            if s == 0.0 {
                continue;
            }
            let mut h = vec![0.0; dim];
            h[i] = s;
            grid.push((Some(i), h));
        }
    }
    grid
}

fn fmt_h(h: &[f64]) -> String {
    let parts: Vec<String> = h.iter().map(|v| format!("{v:+}")).collect();
    format!("h=({})", parts.join(";"))
}

pub fn run_risk_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("risk", serde_json::to_value(config)?);
    let spec = &config.spec;
    let center = &config.theta;
    let dim = spec.dim();
    let loss = config.options.loss;
    let n = *config.horizons.last().expect("validated");
    let steps = step_count(n as f64, config.dt)?;
    let consts = asymptotic_constants(spec, center)?;
    let delta = norming_at(&consts, n as f64).delta_n;
    let hn = n as f64;

    let law = LimitLawSpec::from_matrix(consts.alpha, &scaled_information(spec, center)?)?;
    let bound = limit_risk(
        &law,
        loss,
        config.options.risk_draws,
        StreamKey::derive(config.master_seed, &[tags::LIMIT, 9]),
    )?;
    report.push(ReportRow::info(hn, None, "delta_n", delta));
    report.push(ReportRow::info(hn, None, "limit_risk", bound.mean));
    report.push(ReportRow::info(hn, None, "limit_risk_stderr", bound.stderr));
    report.note("the supremum over the ball |h| <= c is approximated on a finite axis-aligned grid");

    let mut sup_mle: Option<MeanEstimate> = None;
    let mut sup_win: Option<MeanEstimate> = None;
    let mut dropped = 0usize;
    for (gi, (axis, h)) in risk_grid(dim, config.options.risk_c).into_iter().enumerate() {
        let shifted: Vec<f64> = center.to_vec().iter().zip(&h).map(|(t, hh)| t + delta * hh).collect();
        let theta_h = ParamVector::from_slice(&shifted);
        let tag = fmt_h(&h);
        if theta_h.check_in_domain(spec).is_err() {
            dropped += 1;
            report.push(ReportRow::flag(hn, axis, format!("grid_point_in_domain_{tag}"), false));
            continue;
        }
        let losses: Vec<(f64, Option<f64>)> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let key = StreamKey::derive(config.master_seed, &[tags::RISK, gi as u64, r as u64]);
                let mut full = StatsAccumulator::new(spec, config.dt, None);
                let mut win = config.window.map(|w| StatsAccumulator::new(spec, config.dt, Some(w)));
                simulate_streaming(spec, &theta_h, spec.x0, steps, config.dt, key, |_, x, psi, next| {
                    full.push(x, psi, next - x);
                    if let Some(w) = win.as_mut() {
                        w.push(x, psi, next - x);
                    }
                })?;
                let z = |est: &[f64]| -> Vec<f64> { est.iter().zip(&shifted).map(|(e, t)| (e - t) / delta).collect() };
                let l_full = loss.eval(&z(&mle(&full.stats())?.theta_hat));
                let l_win = match &win {
                    Some(w) => Some(loss.eval(&z(&restricted_mle(&w.stats(), spec)?.theta_hat))),
                    None => None,
                };
                Ok((l_full, l_win))
            })
            .collect::<Result<_>>()?;
        let m = MeanEstimate::from_sample(&losses.iter().map(|l| l.0).collect::<Vec<_>>())?;
        report.push(ReportRow::info(hn, axis, format!("risk_{tag}"), m.mean));
        if sup_mle.is_none_or(|s| m.mean > s.mean) {
            sup_mle = Some(m);
        }
        if config.window.is_some() {
            let w: Vec<f64> = losses.iter().filter_map(|l| l.1).collect();
            let mw = MeanEstimate::from_sample(&w)?;
            report.push(ReportRow::info(hn, axis, format!("risk_window_{tag}"), mw.mean));
            if sup_win.is_none_or(|s| mw.mean > s.mean) {
                sup_win = Some(mw);
            }
        }
    }
    report.push(ReportRow::info(hn, None, "dropped_grid_points", dropped as f64));
    let Some(sm) = sup_mle else {
        report.note("every grid point left the parameter space");
        report.push(ReportRow::flag(hn, None, "grid_nonempty", false));
        return Ok(report);
    };
    report.push(ReportRow::info(hn, None, "sup_risk", sm.mean));
    report.push(ReportRow::info(hn, None, "sup_risk_stderr", sm.stderr));
    let se = (sm.stderr.powi(2) + bound.stderr.powi(2)).sqrt();
    let shortfall = if se > 0.0 {
        (bound.mean - sm.mean) / se
    } else if bound.mean > sm.mean {
        f64::INFINITY
    } else {
        0.0
    };
    report.push(ReportRow::at_most(
        hn,
        None,
        "bound_minus_sup_risk_in_stderr",
        shortfall,
        config.tolerances.risk_stderr,
    ));
    if let Some(sw) = sup_win {
        report.push(ReportRow::info(hn, None, "sup_risk_window", sw.mean));
        report.push(ReportRow::at_least(
            hn,
            None,
            "sup_risk_window_minus_sup_risk",
            sw.mean - sm.mean,
            0.0,
        ));
    }
    Ok(report)
}
