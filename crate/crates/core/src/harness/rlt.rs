use rayon::prelude::*;

use super::report::{ExperimentReport, ReportRow};
use super::{tags, ExperimentConfig};
use crate::error::Result;
use crate::estimate::{mle, naive_bias_process, predicted_naive_bias};
use crate::rng::StreamKey;
use crate::simulate::{simulate_streaming, step_count, StatsAccumulator, SufficientStats};
use crate::stats::median;

/// Per checkpoint: naive bias process, naive deviation `|ϑ̌ − ϑ₁|` and ML
/// first-coordinate error `|ϑ̂₁ − ϑ₁|` (NaN when undefined).
type Track = Vec<(f64, f64, f64)>;

fn finite(v: impl Iterator<Item = f64>) -> Vec<f64> {
    v.filter(|x| x.is_finite()).collect()
}

pub fn run_rlt_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("rlt", serde_json::to_value(config)?);
    let spec = &config.spec;
    let theta = &config.theta;
    let tol = &config.tolerances;
    let predicted = predicted_naive_bias(spec, theta)?;
    report.push(ReportRow::info(0.0, None, "predicted_bias", predicted));

    let checkpoints: Vec<u64> = config
        .horizons
        .iter()
        .map(|&h| step_count(h as f64, config.dt))
        .collect::<Result<_>>()?;
    let last = *checkpoints.last().expect("validated");
    let evaluate = |s: &SufficientStats| -> Result<(f64, f64, f64)> {
        if s.j[0][0] == 0.0 {
            return Ok((f64::NAN, f64::NAN, f64::NAN));
        }
        let bias = naive_bias_process(s, theta)?;
        let naive = (s.y[0] / s.j[0][0] - theta.theta1).abs();
        let e = mle(s)?;
        let ml = if e.j_invertible {
            (e.theta_hat[0] - theta.theta1).abs()
        } else {
            f64::NAN
        };
        Ok((bias, naive, ml))
    };

    let tracks: Vec<Track> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let key = StreamKey::derive(config.master_seed, &[tags::RLT, r as u64]);
            let mut acc = StatsAccumulator::new(spec, config.dt, None);
            let mut snaps = Vec::with_capacity(checkpoints.len());
            let mut next_cp = 0;
            simulate_streaming(spec, theta, spec.x0, last, config.dt, key, |k, x, psi, next| {
                acc.push(x, psi, next - x);
                while next_cp < checkpoints.len() && checkpoints[next_cp] == k + 1 {
                    snaps.push(acc.stats());
                    next_cp += 1;
                }
            })?;
            snaps.iter().map(&evaluate).collect()
        })
        .collect::<Result<_>>()?;

    for (ci, &h) in config.horizons.iter().enumerate() {
        let h = h as f64;
        let bias = finite(tracks.iter().map(|t| t[ci].0));
        let naive = finite(tracks.iter().map(|t| t[ci].1));
        let ml = finite(tracks.iter().map(|t| t[ci].2));
        if bias.is_empty() || ml.is_empty() {
            report.note(format!("checkpoint {h}: statistics undefined on every replication"));
            continue;
        }
        let b = median(&bias)?;
        report.push(ReportRow::info(h, None, "bias_median", b));
        report.push(ReportRow::info(h, None, "naive_deviation_median", median(&naive)?));
        report.push(ReportRow::info(h, None, "mle_error_median", median(&ml)?));
        if ci + 1 == config.horizons.len() {
            let err = if predicted != 0.0 {
                (b - predicted).abs() / predicted.abs()
            } else {
                b.abs()
            };
            report.push(ReportRow::at_most(h, None, "bias_rel_error", err, tol.rlt_rel));
            let ratio = median(&naive)? / median(&ml)?;
            report.push(ReportRow::above(
                h,
                None,
                "naive_over_mle_error",
                ratio,
                tol.inconsistency_ratio,
            ));
        }
    }
    Ok(report)
}
