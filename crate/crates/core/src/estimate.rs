//! Maximum likelihood, window-restricted and naive drift estimators.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pd_gate;
use crate::model::{mu_moment_matrix, ModelSpec, ParamVector};
use crate::simulate::{score_at, SufficientStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: Vec<f64>,
    /// Whether `J` passed the positive definiteness gate.
    pub j_invertible: bool,
    /// Smallest eigenvalue of `J`.
    pub conditioning: f64,
    pub horizon: f64,
}

/// `J⁻¹ rhs` on the gate event, `None` otherwise; also returns the smallest
/// eigenvalue of `J`.
fn gated_solve(stats: &SufficientStats, rhs: &[f64]) -> (Option<Vec<f64>>, f64) {
    let (chol, lmin) = pd_gate(&stats.j_matrix());
    let sol = chol.map(|c| c.solve(&DVector::from_column_slice(rhs)).iter().copied().collect());
    (sol, lmin)
}

/// `1{J ∈ D⁺} J⁻¹ Y`.
pub fn mle(stats: &SufficientStats) -> Result<EstimateResult> {
    stats.validate()?;
    let (sol, lmin) = gated_solve(stats, &stats.y);
    Ok(EstimateResult {
        j_invertible: sol.is_some(),
        theta_hat: sol.unwrap_or_else(|| vec![0.0; stats.dim()]),
        conditioning: lmin,
        horizon: stats.t,
    })
}

/// The estimator computed from window-truncated statistics. The window must
/// have the starting point `spec.x0` in its interior.
pub fn restricted_mle(stats: &SufficientStats, spec: &ModelSpec) -> Result<EstimateResult> {
    let w = stats
        .window
        .ok_or_else(|| Error::InvalidArgument("restricted estimator needs windowed statistics".into()))?;
    if !w.contains_interior(spec.x0) {
        return Err(Error::WindowExcludesStart {
            x0: spec.x0,
            lo: w.lo,
            hi: w.hi,
        });
    }
    mle(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveEstimate {
    pub theta_check: f64,
    /// Almost sure limit of the bias `Σ ϑ₂,ν ∫f₁f₂,ν / ∫f₁²`.
    pub predicted_bias: Option<f64>,
}

/// The one-parameter estimator `Y₁/J₁₁` that ignores the secondary drift terms.
pub fn naive_estimator(
    stats: &SufficientStats,
    spec: &ModelSpec,
    theta_true: Option<&ParamVector>,
) -> Result<NaiveEstimate> {
    stats.validate()?;
    let j11 = stats.j[0][0];
    if j11 == 0.0 {
        return Err(Error::Degenerate("J₁₁ = 0, the naive estimator is undefined".into()));
    }
    let predicted_bias = match theta_true {
        Some(t) => Some(predicted_naive_bias(spec, t)?),
        None => None,
    };
    Ok(NaiveEstimate {
        theta_check: stats.y[0] / j11,
        predicted_bias,
    })
}

pub fn predicted_naive_bias(spec: &ModelSpec, theta: &ParamVector) -> Result<f64> {
    if theta.theta2.iter().all(|&t| t == 0.0) {
        theta.check_in_domain(spec)?;
        return Ok(0.0);
    }
    let lam = mu_moment_matrix(spec, theta, None)?;
    Ok(theta
        .theta2
        .iter()
        .enumerate()
        .map(|(i, t)| t * lam[(0, i + 1)])
        .sum::<f64>()
        / lam[(0, 0)])
}

/// Bias term `Σ ϑ₂,ν J₁,ν / J₁₁` of the naive estimator along a path.
pub fn naive_bias_process(stats: &SufficientStats, theta: &ParamVector) -> Result<f64> {
    if theta.dim() != stats.dim() {
        return Err(Error::Dimension {
            expected: stats.dim(),
            got: theta.dim(),
        });
    }
    let j11 = stats.j[0][0];
    if j11 == 0.0 {
        return Err(Error::Degenerate("J₁₁ = 0".into()));
    }
    Ok(theta
        .theta2
        .iter()
        .enumerate()
        .map(|(i, t)| t * stats.j[0][i + 1])
        .sum::<f64>()
        / j11)
}

fn quad_form(j: &[Vec<f64>], v: &[f64]) -> f64 {
    j.iter()
        .zip(v)
        .map(|(row, vi)| vi * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// `(ϑ'−ϑ)ᵀ S(ϑ) − ½ (ϑ'−ϑ)ᵀ J (ϑ'−ϑ)`.
pub fn log_likelihood_ratio(stats: &SufficientStats, theta_prime: &[f64], theta: &[f64]) -> Result<f64> {
    let score = score_at(stats, theta)?;
    if theta_prime.len() != theta.len() {
        return Err(Error::Dimension {
            expected: theta.len(),
            got: theta_prime.len(),
        });
    }
    let h: Vec<f64> = theta_prime.iter().zip(theta).map(|(a, b)| a - b).collect();
    let lin: f64 = h.iter().zip(&score).map(|(a, b)| a * b).sum();
    Ok(lin - 0.5 * quad_form(&stats.j, &h))
}

/// `ϑᵀY − ½ϑᵀJϑ`, the log-likelihood up to a parameter-free term.
pub fn log_likelihood(stats: &SufficientStats, theta: &[f64]) -> Result<f64> {
    if theta.len() != stats.dim() {
        return Err(Error::Dimension {
            expected: stats.dim(),
            got: theta.len(),
        });
    }
    let lin: f64 = theta.iter().zip(&stats.y).map(|(a, b)| a * b).sum();
    Ok(lin - 0.5 * quad_form(&stats.j, theta))
}

/// `T + 1{J ∈ D⁺} J⁻¹ S(T)` for a preliminary estimate `T`.
pub fn one_step(stats: &SufficientStats, preliminary: &[f64]) -> Result<EstimateResult> {
    stats.validate()?;
    if preliminary.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("preliminary estimate must be finite".into()));
    }
    let score = score_at(stats, preliminary)?;
    let (sol, lmin) = gated_solve(stats, &score);
    let theta_hat = match &sol {
        Some(step) => preliminary.iter().zip(step).map(|(a, b)| a + b).collect(),
        None => preliminary.to_vec(),
    };
    Ok(EstimateResult {
        theta_hat,
        j_invertible: sol.is_some(),
        conditioning: lmin,
        horizon: stats.t,
    })
}

/// `J⁻¹ S(ϑ)` on the gate event: the right-hand side of the error
/// representation `ϑ̂ − ϑ = J⁻¹ S(ϑ)`.
pub fn error_representation(stats: &SufficientStats, theta: &[f64]) -> Result<Option<Vec<f64>>> {
    let score = score_at(stats, theta)?;
    Ok(gated_solve(stats, &score).0)
}
