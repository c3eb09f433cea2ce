use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

use super::{lambdas, ModelSpec, ParamVector};

const ROOT_TOL: f64 = 1e-10;

pub(super) fn log_weight(spec: &ModelSpec, lambda1: f64, lambda2: &[f64], x: f64) -> f64 {
    let mut v = 0.5 * lambda1 * (1.0 + x * x).ln();
    for (i, l) in lambda2.iter().enumerate() {
        if *l != 0.0 {
            v += l * spec.basis.antiderivative(i, x);
        }
    }
    v
}

/// Scale density `s(x) = (1+x²)^{-λ₁/2} exp(-Σ λ₂,ν F₂,ν(x))`.
pub fn scale_density(spec: &ModelSpec, theta: &ParamVector, x: f64) -> f64 {
    let (l1, l2) = lambdas(spec, theta);
    (-log_weight(spec, l1, &l2, x)).exp()
}

/// Lebesgue density of the invariant measure,
/// `(1/σ²)(1+x²)^{λ₁/2} exp(Σ λ₂,ν F₂,ν(x)) = 1 / (σ² s(x))`.
pub fn invariant_density(spec: &ModelSpec, theta: &ParamVector, x: f64) -> f64 {
    let (l1, l2) = lambdas(spec, theta);
    log_weight(spec, l1, &l2, x).exp() / spec.sigma2()
}

fn scale_quad() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        ..Default::default()
    }
}

/// `S(x) = ∫₀ˣ s(y) dy`.
pub fn scale_function(spec: &ModelSpec, theta: &ParamVector, x: f64) -> Result<f64> {
    theta.check_dim(spec)?;
    let (l1, l2) = lambdas(spec, theta);
    integrate(|y| (-log_weight(spec, l1, &l2, y)).exp(), 0.0, x, scale_quad())
}

/// Inverse of the scale function: the unique `x` with `S(x) = u`.
///
/// Brackets the root by doubling, then runs Newton steps on `S' = s`
/// guarded by bisection. `S` is advanced incrementally between iterates.
pub fn scale_inverse(spec: &ModelSpec, theta: &ParamVector, u: f64) -> Result<f64> {
    theta.check_in_domain(spec)?;
    if !u.is_finite() {
        return Err(Error::InvalidArgument(format!("u must be finite, got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let (l1, l2) = lambdas(spec, theta);
    // work with r = |x| along the direction of u: G(r) = |S(dir r)|
    let dir = u.signum();
    let g = |r: f64| (-log_weight(spec, l1, &l2, dir * r)).exp();
    let seg = |a: f64, b: f64| integrate(g, a, b, scale_quad());

    let target = u.abs();
    let mut lo = 0.0;
    let mut g_lo = 0.0;
    let mut hi = 1.0;
    let mut g_hi = seg(0.0, hi)?;
    while g_hi < target {
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Degenerate("scale function does not reach target".into()));
        }
        g_hi += seg(lo, hi)?;
    }

    let mut r = lo + (hi - lo) * (target - g_lo) / (g_hi - g_lo);
    let mut g_r = g_lo + seg(lo, r)?;
    for _ in 0..200 {
        let f = g_r - target;
        if f > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let newton = r - f / g(r);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - r).abs() <= ROOT_TOL || hi - lo <= ROOT_TOL {
            return Ok(dir * next);
        }
        g_r += seg(r, next)?;
        r = next;
    }
    Err(Error::Degenerate("scale inverse did not converge".into()))
}
