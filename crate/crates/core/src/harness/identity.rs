use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, ReportRow};
use super::{tags, ExperimentConfig};
use crate::error::Result;
use crate::estimate::{error_representation, log_likelihood, log_likelihood_ratio, mle, one_step};
use crate::model::{norming, ParamVector};
use crate::rng::StreamKey;
use crate::simulate::{score_at, simulate_streaming, step_count, StatsAccumulator, SufficientStats};

/// Largest relative residual of each exact identity on one set of statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `ϑ̂ − ϑ` against `J⁻¹ S(ϑ)`.
    pub error_representation: f64,
    /// `Λ(ϑ',ϑ) + Λ(ϑ'',ϑ') = Λ(ϑ'',ϑ)`.
    pub cocycle: f64,
    /// One-step correction from each grid point against the MLE.
    pub one_step: f64,
    /// `Λ(ϑ+δh, ϑ)` against `hᵀ(δS) − ½hᵀ(δ²J)h`.
    pub local_quadratic: f64,
    /// `Λ(ϑ',ϑ)` against the difference of log-likelihoods.
    pub quadratic_expansion: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.error_representation,
            self.cocycle,
            self.one_step,
            self.local_quadratic,
            self.quadratic_expansion,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn merge(self, o: Self) -> Self {
        Self {
            error_representation: self.error_representation.max(o.error_representation),
            cocycle: self.cocycle.max(o.cocycle),
            one_step: self.one_step.max(o.one_step),
            local_quadratic: self.local_quadratic.max(o.local_quadratic),
            quadratic_expansion: self.quadratic_expansion.max(o.quadratic_expansion),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

/// Evaluates all identities over the parameter points `grid` with local
/// scale `delta`. Returns `None` when `J` fails the gate.
pub fn identity_residuals(stats: &SufficientStats, grid: &[Vec<f64>], delta: f64) -> Result<Option<IdentityResiduals>> {
    let hat = mle(stats)?;
    if !hat.j_invertible {
        return Ok(None);
    }
    let mut r = IdentityResiduals::default();
    for th in grid {
        if let Some(rhs) = error_representation(stats, th)? {
            let lhs: Vec<f64> = hat.theta_hat.iter().zip(th).map(|(a, b)| a - b).collect();
            r.error_representation = r.error_representation.max(rel_vec(&lhs, &rhs));
        }
        let os = one_step(stats, th)?;
        r.one_step = r.one_step.max(rel_vec(&os.theta_hat, &hat.theta_hat));
    }
    for (i, a) in grid.iter().enumerate() {
        let b = &grid[(i + 1) % grid.len()];
        let c = &grid[(i + 2) % grid.len()];
        let lhs = log_likelihood_ratio(stats, b, a)? + log_likelihood_ratio(stats, c, b)?;
        r.cocycle = r.cocycle.max(rel(lhs, log_likelihood_ratio(stats, c, a)?));

        let diff = log_likelihood(stats, b)? - log_likelihood(stats, a)?;
        r.quadratic_expansion = r.quadratic_expansion.max(rel(log_likelihood_ratio(stats, b, a)?, diff));

        let h: Vec<f64> = b.iter().zip(a).map(|(x, y)| (x - y) / delta).collect();
        let shifted: Vec<f64> = a.iter().zip(&h).map(|(x, hh)| x + delta * hh).collect();
        let score = score_at(stats, a)?;
        let lin: f64 = h.iter().zip(&score).map(|(hh, s)| hh * delta * s).sum();
        let quad: f64 = (0..h.len())
            .map(|p| {
                (0..h.len())
                    .map(|q| h[p] * delta * delta * stats.j[p][q] * h[q])
                    .sum::<f64>()
            })
            .sum();
        r.local_quadratic = r
            .local_quadratic
            .max(rel(log_likelihood_ratio(stats, &shifted, a)?, lin - 0.5 * quad));
    }
    Ok(Some(r))
}

/// Parameter points around `theta`: the point itself, a step along each
/// axis and a step along the diagonal.
fn identity_grid(theta: &ParamVector) -> Vec<Vec<f64>> {
    let c = theta.to_vec();
    let mut grid = vec![c.clone()];
    for i in 0..c.len() {
        let mut p = c.clone();
        p[i] += 0.1;
        grid.push(p);
    }
    grid.push(c.iter().map(|v| v - 0.2).collect());
    grid
}

pub fn run_identity_suite(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("identity", serde_json::to_value(config)?);
    let grid = identity_grid(&config.theta);
    let tol = config.tolerances.identity;
    for (hi, &n) in config.horizons.iter().enumerate() {
        let steps = step_count(n as f64, config.dt)?;
        let delta = norming(&config.spec, &config.theta, n)?.delta_n;
        let per_rep: Vec<Option<IdentityResiduals>> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let key = StreamKey::derive(config.master_seed, &[tags::IDENTITY, hi as u64, r as u64]);
                let mut acc = StatsAccumulator::new(&config.spec, config.dt, config.window);
                simulate_streaming(
                    &config.spec,
                    &config.theta,
                    config.spec.x0,
                    steps,
                    config.dt,
                    key,
                    |_, x, psi, next| acc.push(x, psi, next - x),
                )?;
                identity_residuals(&acc.stats(), &grid, delta)
            })
            .collect::<Result<_>>()?;
        let singular = per_rep.iter().filter(|r| r.is_none()).count();
        let worst = per_rep
            .iter()
            .flatten()
            .fold(IdentityResiduals::default(), |a, b| a.merge(*b));
        let h = n as f64;
        report.push(ReportRow::info(h, None, "replications", config.replications as f64));
        report.push(ReportRow::info(h, None, "singular_replications", singular as f64));
        for (name, v) in [
            ("error_representation_residual", worst.error_representation),
            ("cocycle_residual", worst.cocycle),
            ("one_step_residual", worst.one_step),
            ("local_quadratic_residual", worst.local_quadratic),
            ("quadratic_expansion_residual", worst.quadratic_expansion),
        ] {
            report.push(ReportRow::at_most(h, None, name, v, tol));
        }
        report.push(ReportRow::at_most(h, None, "max_residual", worst.max(), tol));
    }
    Ok(report)
}
