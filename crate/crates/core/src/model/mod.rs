//! The diffusion `dξ = (ϑ₁ f₁ + Σ ϑ₂,ν f₂,ν)(ξ) dt + σ dW` and its closed-form
//! asymptotic constants.

mod basis;
mod moments;
mod scale;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

pub use basis::{f1, BasisFn, DriftBasis};
pub use moments::{mu_moment_matrix, scaled_information, MomentOptions};
pub use scale::{invariant_density, scale_density, scale_function, scale_inverse};

use crate::error::{Error, Result};

/// Closed interval used to truncate path functionals. Infinite bounds are
/// written as `null` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    #[serde(with = "lower_bound")]
    pub lo: f64,
    #[serde(with = "upper_bound")]
    pub hi: f64,
}

macro_rules! nullable_bound {
    ($name:ident, $inf:expr) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                if v.is_finite() {
                    s.serialize_f64(*v)
                } else {
                    s.serialize_none()
                }
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                Ok(Option::<f64>::deserialize(d)?.unwrap_or($inf))
            }
        }
    };
}
nullable_bound!(lower_bound, f64::NEG_INFINITY);
nullable_bound!(upper_bound, f64::INFINITY);

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::DegenerateWindow { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// A window so wide that no finite simulated state falls outside it.
    pub fn whole_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// Known diffusion coefficient, drift basis and starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub sigma: f64,
    pub basis: DriftBasis,
    #[serde(default)]
    pub x0: f64,
}

impl ModelSpec {
    pub fn new(sigma: f64, basis: DriftBasis, x0: f64) -> Result<Self> {
        let spec = Self { sigma, basis, x0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidModel(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidModel(format!("x0 must be finite, got {}", self.x0)));
        }
        Ok(())
    }

    /// Number of parameters, `1 + m`.
    pub fn dim(&self) -> usize {
        1 + self.basis.m()
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Open interval `(-σ²/2, σ²/2)` of admissible `ϑ₁`.
    pub fn theta1_range(&self) -> (f64, f64) {
        let h = self.sigma2() / 2.0;
        (-h, h)
    }

    /// Short identifier used to tag simulated paths.
    pub fn id(&self) -> String {
        format!("sigma={};basis={};x0={}", self.sigma, self.basis.name(), self.x0)
    }

    /// `ψ = (f₁, f₂,₁, …, f₂,ₘ)` at `x`.
    #[inline]
    pub fn psi(&self, x: f64, out: &mut [f64]) {
        self.basis.eval_all(x, out)
    }
}

/// `ϑ = (ϑ₁, ϑ₂,₁, …, ϑ₂,ₘ)`. Unconstrained as a value; checked against the
/// parameter space only where simulation or asymptotics need it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub theta1: f64,
    #[serde(default)]
    pub theta2: Vec<f64>,
}

impl ParamVector {
    pub fn new(theta1: f64, theta2: Vec<f64>) -> Self {
        Self { theta1, theta2 }
    }

    pub fn zeros(m: usize) -> Self {
        Self::new(0.0, vec![0.0; m])
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1..].to_vec())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.theta2.len());
        v.push(self.theta1);
        v.extend_from_slice(&self.theta2);
        v
    }

    pub fn dim(&self) -> usize {
        1 + self.theta2.len()
    }

    pub fn id(&self) -> String {
        format!("{:?}", self.to_vec())
    }

    /// Checks dimension against `spec` and `ϑ₁ ∈ (-σ²/2, σ²/2)`.
    pub fn check_in_domain(&self, spec: &ModelSpec) -> Result<()> {
        self.check_dim(spec)?;
        let (lo, hi) = spec.theta1_range();
        if !(self.theta1 > lo && self.theta1 < hi) || self.theta2.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain {
                theta1: self.theta1,
                sigma: spec.sigma,
            });
        }
        Ok(())
    }

    pub fn check_dim(&self, spec: &ModelSpec) -> Result<()> {
        if self.theta2.len() != spec.m() {
            return Err(Error::Dimension {
                expected: spec.m(),
                got: self.theta2.len(),
            });
        }
        Ok(())
    }
}

/// `b(x) = ϑ₁ f₁(x) + Σ ϑ₂,ν f₂,ν(x)`. Terms with a zero coefficient are
/// skipped.
#[inline]
pub fn eval_drift(spec: &ModelSpec, theta: &ParamVector, x: f64) -> f64 {
    let mut b = if theta.theta1 != 0.0 { theta.theta1 * f1(x) } else { 0.0 };
    for (i, &t) in theta.theta2.iter().enumerate() {
        if t != 0.0 {
            b += t * spec.basis.eval(i, x);
        }
    }
    b
}

/// `F₂,ν(x) = ∫₀ˣ f₂,ν`, with one-based `nu` as in the model notation.
pub fn antiderivative_f(spec: &ModelSpec, nu: usize, x: f64) -> Result<f64> {
    if nu == 0 || nu > spec.m() {
        return Err(Error::InvalidArgument(format!(
            "nu must be in 1..={}, got {nu}",
            spec.m()
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("x must be finite, got {x}")));
    }
    Ok(spec.basis.antiderivative(nu - 1, x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub lambda1: f64,
    pub lambda2: Vec<f64>,
    pub alpha: f64,
    pub psi_plus: f64,
    pub psi_minus: f64,
    pub d_weight: f64,
}

impl AsymptoticConstants {
    /// `D / (Ψ⁺ + Ψ⁻)`, the factor shared by the norming sequence and the
    /// rescaled information.
    pub fn information_factor(&self) -> f64 {
        self.d_weight / (self.psi_plus + self.psi_minus)
    }

    /// Constant `c` in `P(R_{n+1} - R_n > t) ~ c t^{-α}`.
    pub fn cycle_tail_constant(&self, sigma: f64) -> f64 {
        let a = self.alpha;
        (1.0 / (2.0 * sigma * sigma)).powf(a) * 2.0 * (self.psi_plus + self.psi_minus) / gamma(a)
    }
}

/// `λ₁ = 2ϑ₁/σ²`, `λ₂,ν = 2ϑ₂,ν/σ²`.
pub fn lambdas(spec: &ModelSpec, theta: &ParamVector) -> (f64, Vec<f64>) {
    let s2 = spec.sigma2();
    (
        2.0 * theta.theta1 / s2,
        theta.theta2.iter().map(|t| 2.0 * t / s2).collect(),
    )
}

pub fn asymptotic_constants(spec: &ModelSpec, theta: &ParamVector) -> Result<AsymptoticConstants> {
    theta.check_in_domain(spec)?;
    let (lambda1, lambda2) = lambdas(spec, theta);
    let alpha = 0.5 * (1.0 - lambda1);
    let mut log_plus = 0.0;
    let mut log_minus = 0.0;
    for (i, l) in lambda2.iter().enumerate() {
        log_plus += l * spec.basis.limit_pos(i);
        log_minus += l * spec.basis.limit_neg(i);
    }
    let s2 = spec.sigma2();
    let d_weight = (2.0 * s2).powf(1.0 + alpha) * gamma(alpha) / (2.0 * gamma(1.0 - alpha));
    Ok(AsymptoticConstants {
        lambda1,
        lambda2,
        alpha,
        psi_plus: log_plus.exp(),
        psi_minus: log_minus.exp(),
        d_weight,
    })
}

/// Norming constant `α_n = n^α D / (Ψ⁺+Ψ⁻)` and local scale `δ_n = n^{-α/2}`
/// at a (not necessarily integer) horizon `n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norming {
    pub alpha_n: f64,
    pub delta_n: f64,
}

pub fn norming_at(consts: &AsymptoticConstants, n: f64) -> Norming {
    let pow = n.powf(consts.alpha);
    Norming {
        alpha_n: pow * consts.information_factor(),
        delta_n: 1.0 / pow.sqrt(),
    }
}

pub fn norming(spec: &ModelSpec, theta: &ParamVector, n: u64) -> Result<Norming> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(norming_at(&asymptotic_constants(spec, theta)?, n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    Transient,
    NullRecurrent,
    PositiveRecurrent,
}

/// Classification by `λ₁ = 2ϑ₁/σ²`; the boundary values `λ₁ = ±1` count as
/// null recurrent.
pub fn classify_recurrence(spec: &ModelSpec, theta1: f64) -> Recurrence {
    let l1 = 2.0 * theta1 / spec.sigma2();
    if l1 > 1.0 {
        Recurrence::Transient
    } else if l1 < -1.0 {
        Recurrence::PositiveRecurrent
    } else {
        Recurrence::NullRecurrent
    }
}
