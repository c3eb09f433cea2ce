//! One-sided stable and Mittag-Leffler variables and the mixed normal limit
//! law of the rescaled estimation errors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_spd, is_positive_definite, to_matrix};
use crate::rng::StreamKey;
use crate::stats::MeanEstimate;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `log S` for one draw of the positive stable law with `E e^{−ζS} = e^{−ζ^α}`.
///
/// Kanter's representation: with `U ~ Unif(0, π)` and `W ~ Exp(1)`,
/// `S = sin(αU) / sin(U)^{1/α} · (sin((1−α)U) / W)^{(1−α)/α}`.
/// This is Chambers–Mallows–Stuck at skewness 1 with the scale chosen so
/// that the Laplace exponent is exactly `ζ^α` (no extra `cos(πα/2)` factor).
fn log_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let w: f64 = Exp1.sample(rng);
    (alpha * u).sin().ln() - u.sin().ln() / alpha + (1.0 - alpha) / alpha * (((1.0 - alpha) * u).sin().ln() - w.ln())
}

pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(log_stable(alpha, rng).exp())
}

/// `V = S^{−α}`, the time-one value of the inverse stable subordinator.
pub fn sample_mittag_leffler<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((-alpha * log_stable(alpha, rng)).exp())
}

/// Index and covariance of the law of `cov^{−1/2} B(V)/V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawSpec {
    pub alpha: f64,
    pub cov: Vec<Vec<f64>>,
}

impl LimitLawSpec {
    pub fn new(alpha: f64, cov: Vec<Vec<f64>>) -> Result<Self> {
        let law = Self { alpha, cov };
        law.validate()?;
        Ok(law)
    }

    pub fn from_matrix(alpha: f64, cov: &DMatrix<f64>) -> Result<Self> {
        Self::new(alpha, crate::linalg::to_rows(cov))
    }

    pub fn dim(&self) -> usize {
        self.cov.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let m = to_matrix(&self.cov)?;
        if !is_positive_definite(&m) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<LimitSampler> {
        self.validate()?;
        Ok(LimitSampler {
            alpha: self.alpha,
            root: inv_sqrt_spd(&to_matrix(&self.cov)?)?,
        })
    }
}

/// Precomputed `cov^{−1/2}` for repeated draws.
#[derive(Debug, Clone)]
pub struct LimitSampler {
    alpha: f64,
    root: DMatrix<f64>,
}

impl LimitSampler {
    pub fn inv_sqrt_cov(&self) -> &DMatrix<f64> {
        &self.root
    }

    /// `cov^{−1/2} G / √V`, which has the law of `cov^{−1/2} B(V)/V` since
    /// `B(V)/V` given `V` is `N(0, I/V)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let v = (-self.alpha * log_stable(self.alpha, rng)).exp();
        self.sample_given(v, rng)
    }

    /// The same draw conditional on the mixing variable `V = v`.
    pub fn sample_given<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> Vec<f64> {
        let d = self.root.nrows();
        let g = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        (&self.root * g / v.sqrt()).iter().copied().collect()
    }
}

pub fn sample_limit_error<R: Rng + ?Sized>(law: &LimitLawSpec, rng: &mut R) -> Result<Vec<f64>> {
    Ok(law.sampler()?.sample(rng))
}

/// Bounded losses for the minimax risk comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Loss {
    /// `min(|x|², cap)`
    TruncatedQuadratic {
        cap: f64,
    },
    /// `1 − exp(−|x|²)`
    ExpQuadratic,
    Constant {
        value: f64,
    },
}

impl Loss {
    /// Parses `truncated-quadratic[:cap]`, `exp-quadratic` or `constant[:value]`.
    pub fn from_name(name: &str) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let num = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad loss argument `{a}`"))),
            }
        };
        match head {
            "truncated-quadratic" => Ok(Loss::TruncatedQuadratic { cap: num(4.0)? }),
            "exp-quadratic" if arg.is_none() => Ok(Loss::ExpQuadratic),
            "constant" => Ok(Loss::Constant { value: num(1.0)? }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown loss `{name}` (expected truncated-quadratic[:cap], exp-quadratic, constant[:value])"
            ))),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            Loss::TruncatedQuadratic { cap } => r2.min(cap),
            Loss::ExpQuadratic => 1.0 - (-r2).exp(),
            Loss::Constant { value } => value,
        }
    }
}

/// Monte Carlo estimate of `E ℓ(Z)` for `Z` drawn from `law`.
pub fn limit_risk(law: &LimitLawSpec, loss: Loss, draws: usize, key: StreamKey) -> Result<MeanEstimate> {
    let sampler = law.sampler()?;
    let mut rng = key.rng();
    let vals: Vec<f64> = (0..draws).map(|_| loss.eval(&sampler.sample(&mut rng))).collect();
    MeanEstimate::from_sample(&vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_index_is_levy() {
        // at α = 1/2 the representation collapses to 1 / (4 cos²(U/2) W)
        let mut a = StreamKey::new(1).rng();
        let mut b = StreamKey::new(1).rng();
        for _ in 0..100 {
            let s = sample_stable(0.5, &mut a).unwrap();
            let u = std::f64::consts::PI * b.sample::<f64, _>(Open01);
            let w: f64 = Exp1.sample(&mut b);
            let direct = 1.0 / (4.0 * (u / 2.0).cos().powi(2) * w);
            assert!((s / direct - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let mut r = StreamKey::new(0).rng();
        for a in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(sample_stable(a, &mut r).is_err());
            assert!(sample_mittag_leffler(a, &mut r).is_err());
        }
    }

    #[test]
    fn conditional_draw_is_whitened_normal() {
        let law = LimitLawSpec::new(0.5, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = law.sampler().unwrap();
        let mut a = StreamKey::new(2).rng();
        let mut b = StreamKey::new(2).rng();
        let x = s.sample_given(1.0, &mut a);
        let g: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut b)).collect();
        assert_eq!(x, g);
    }

    #[test]
    fn law_validation() {
        assert!(LimitLawSpec::new(0.5, vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(LimitLawSpec::new(1.5, vec![vec![1.0]]).is_err());
        assert!(LimitLawSpec::new(0.5, vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn loss_parsing_and_values() {
        assert_eq!(
            Loss::from_name("truncated-quadratic").unwrap(),
            Loss::TruncatedQuadratic { cap: 4.0 }
        );
        assert_eq!(Loss::from_name("constant:0.3").unwrap().eval(&[5.0]), 0.3);
        assert_eq!(Loss::TruncatedQuadratic { cap: 4.0 }.eval(&[1.0, 1.0]), 2.0);
        assert_eq!(Loss::TruncatedQuadratic { cap: 4.0 }.eval(&[3.0]), 4.0);
        assert!((Loss::ExpQuadratic.eval(&[1.0]) - (1.0 - (-1.0f64).exp())).abs() < 1e-16);
        assert!(Loss::from_name("hinge").is_err());
        assert!(Loss::from_name("constant:x").is_err());
    }
}
