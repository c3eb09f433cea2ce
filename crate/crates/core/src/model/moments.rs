//! `Λ(ϑ) = σ⁻⁴ μ^ϑ(ψ ψᵀ)` and its windowed variant by quadrature.
//!
//! On the whole line the integrals are split into a tabulated core
//! `[-FAR, FAR]`, an oscillatory far field `FAR < |x| < T` integrated over
//! short panels, and a tail `|x| > T` where the integrand is replaced by its
//! period average `c Ψ^± |x|^{λ₁-2} / σ²` and integrated in closed form.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::quadrature::{integrate_vec, uniform_breaks, QuadOptions};

use super::basis::{BasisFn, FAR};
use super::scale::log_weight;
use super::{asymptotic_constants, lambdas, ModelSpec, ParamVector, Window};

#[derive(Debug, Clone, Copy)]
pub struct MomentOptions {
    /// Far-field cutoff in units of 2π.
    pub periods: f64,
    pub quad: QuadOptions,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            periods: 16_000.0,
            quad: QuadOptions {
                abs_tol: 1e-13,
                rel_tol: 1e-12,
                max_intervals: 1 << 21,
            },
        }
    }
}

fn pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            v.push((i, j));
        }
    }
    v
}

fn max_frequency(spec: &ModelSpec) -> f64 {
    spec.basis
        .functions()
        .iter()
        .map(|f| match f {
            BasisFn::Sinc => 1,
            BasisFn::TemperedCos(k) | BasisFn::TemperedSin(k) => *k,
        })
        .max()
        .unwrap_or(1) as f64
}

/// Symmetric `(1+m)×(1+m)` matrix with entries `σ⁻⁴ μ^ϑ(ψᵢ ψⱼ 1_A)`.
///
/// `window = None` integrates over the whole line.
pub fn mu_moment_matrix(spec: &ModelSpec, theta: &ParamVector, window: Option<Window>) -> Result<DMatrix<f64>> {
    mu_moment_matrix_with(spec, theta, window, MomentOptions::default())
}

pub fn mu_moment_matrix_with(
    spec: &ModelSpec,
    theta: &ParamVector,
    window: Option<Window>,
    opts: MomentOptions,
) -> Result<DMatrix<f64>> {
    let consts = asymptotic_constants(spec, theta)?;
    let dim = spec.dim();
    let (l1, l2) = lambdas(spec, theta);
    let sigma2 = spec.sigma2();
    let idx = pairs(dim);
    let panel = (0.5 * PI / max_frequency(spec)).min(1.0);

    let integrand = |x: f64, out: &mut [f64]| {
        let mut psi = [0.0; 64];
        let psi = &mut psi[..dim];
        spec.psi(x, psi);
        let w = log_weight(spec, l1, &l2, x).exp() / sigma2;
        for (o, &(i, j)) in out.iter_mut().zip(idx.iter()) {
            *o = psi[i] * psi[j] * w;
        }
    };

    let mut acc = vec![0.0; idx.len()];
    match window.filter(Window::is_bounded) {
        Some(w) => {
            let breaks = uniform_breaks(w.lo, w.hi, panel);
            acc = integrate_vec(integrand, &breaks, idx.len(), opts.quad)?;
        }
        None => {
            let cutoff = 2.0 * PI * opts.periods;
            let mut breaks = uniform_breaks(-cutoff, -FAR, panel);
            breaks.pop();
            breaks.extend(uniform_breaks(-FAR, FAR, 1.0f64.min(panel)));
            breaks.pop();
            breaks.extend(uniform_breaks(FAR, cutoff, panel));
            let core = integrate_vec(integrand, &breaks, idx.len(), opts.quad)?;

            // ∫_T^∞ x^{λ₁-2} dx = T^{λ₁-1} / (1-λ₁)
            let tail = cutoff.powf(l1 - 1.0) / (1.0 - l1) / sigma2;
            let fns = spec.basis.functions();
            let fn_at = |i: usize| if i == 0 { None } else { Some(fns[i - 1]) };
            let parity = |i: usize| if i == 0 { -1.0 } else { fns[i - 1].parity() };
            for (k, &(i, j)) in idx.iter().enumerate() {
                let c = BasisFn::tail_product(fn_at(i), fn_at(j));
                acc[k] = core[k] + c * tail * (consts.psi_plus + parity(i) * parity(j) * consts.psi_minus);
            }
        }
    }

    let scale = 1.0 / (sigma2 * sigma2);
    let mut m = DMatrix::zeros(dim, dim);
    for (k, &(i, j)) in idx.iter().enumerate() {
        m[(i, j)] = acc[k] * scale;
        m[(j, i)] = acc[k] * scale;
    }
    Ok(m)
}

/// `𝚺(ϑ) = D/(Ψ⁺+Ψ⁻) · Λ(ϑ)`, the limiting rescaled information.
pub fn scaled_information(spec: &ModelSpec, theta: &ParamVector) -> Result<DMatrix<f64>> {
    let consts = asymptotic_constants(spec, theta)?;
    Ok(mu_moment_matrix(spec, theta, None)? * consts.information_factor())
}
