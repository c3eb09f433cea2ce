use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, ReportRow};
use super::{tags, ExperimentConfig};
use crate::error::{Error, Result};
use crate::model::{asymptotic_constants, ModelSpec, ParamVector};
use crate::rng::StreamKey;
use crate::simulate::{cycle_threshold, simulate_cycle, step_count};
use crate::stats::{censored_hill_estimator, quantile};

/// Durations of independent life cycles, with right-censoring flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    pub threshold: f64,
    pub durations: Vec<f64>,
    pub censored: Vec<bool>,
}

/// Simulates `count` independent cycles, each capped at `cap` time units.
pub fn simulate_cycles(
    spec: &ModelSpec,
    theta: &ParamVector,
    dt: f64,
    cap: f64,
    count: usize,
    seed: u64,
) -> Result<CycleSample> {
    let threshold = cycle_threshold(spec, theta)?;
    let max_steps = step_count(cap, dt)?;
    let out: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            simulate_cycle(
                spec,
                theta,
                dt,
                threshold,
                max_steps,
                StreamKey::derive(seed, &[tags::TAIL, i as u64]),
            )
        })
        .collect::<Result<_>>()?;
    Ok(CycleSample {
        threshold,
        durations: out.iter().map(|c| c.duration).collect(),
        censored: out.iter().map(|c| c.censored).collect(),
    })
}

pub fn run_tail_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("tail", serde_json::to_value(config)?);
    let spec = &config.spec;
    let tol = &config.tolerances;
    let opts = &config.options;
    let consts = asymptotic_constants(spec, &config.theta)?;
    let cap = *config.horizons.last().expect("validated");
    let sample = simulate_cycles(
        spec,
        &config.theta,
        config.dt,
        cap as f64,
        opts.target_cycles,
        config.master_seed,
    )?;
    let n = sample.durations.len();
    let censored = sample.censored.iter().filter(|c| **c).count();
    let k = opts.hill_k.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
    let h = cap as f64;

    report.push(ReportRow::info(h, None, "threshold", sample.threshold));
    report.push(ReportRow::info(h, None, "cycles", n as f64));
    report.push(ReportRow::info(h, None, "censored_cycles", censored as f64));
    report.push(ReportRow::info(h, None, "hill_k", k as f64));
    report.push(ReportRow::info(h, None, "alpha_theory", consts.alpha));

    let enough = k < n && censored < k;
    report.push(ReportRow::flag(h, None, "enough_cycles", enough));
    if !enough {
        report.note(format!("{n} cycles with {censored} censored cannot support k = {k}"));
        return Ok(report);
    }
    match censored_hill_estimator(&sample.durations, &sample.censored, k) {
        Ok(a) => {
            report.push(ReportRow::info(h, None, "hill_alpha", a));
            report.push(ReportRow::at_most(
                h,
                None,
                "hill_alpha_abs_error",
                (a - consts.alpha).abs(),
                tol.hill_abs,
            ));
        }
        Err(Error::Degenerate(msg)) => {
            report.push(ReportRow::flag(h, None, "hill_defined", false));
            report.note(msg);
        }
        Err(e) => return Err(e),
    }

    let t = quantile(&sample.durations, opts.tail_quantile)?;
    if sample
        .censored
        .iter()
        .zip(&sample.durations)
        .any(|(c, d)| *c && *d <= t)
    {
        report.note("the tail quantile reaches the cycle cap; raise the cap");
        report.push(ReportRow::flag(h, None, "quantile_below_cap", false));
    }
    let exceed = sample.durations.iter().filter(|d| **d > t).count() as f64 / n as f64;
    let c_hat = t.powf(consts.alpha) * exceed;
    let c_theory = consts.cycle_tail_constant(spec.sigma);
    report.push(ReportRow::info(h, None, "tail_quantile_t", t));
    report.push(ReportRow::info(h, None, "tail_constant", c_hat));
    report.push(ReportRow::info(h, None, "tail_constant_theory", c_theory));
    report.push(ReportRow::at_most(
        h,
        None,
        "tail_constant_rel_error",
        (c_hat - c_theory).abs() / c_theory,
        tol.tail_constant_rel,
    ));
    Ok(report)
}
