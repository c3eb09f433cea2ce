//! Secondary drift functions and their antiderivatives.
//!
//! Every built-in function has the form `g(x) * trig(k x)` with an envelope
//! `g` that decays like `1/x`. Antiderivatives `F(x) = ∫_0^x f` are tabulated
//! on `[0, FAR]`; beyond that they are evaluated as `F(±∞) - tail(x)` where
//! the tail integral comes from the asymptotic expansion
//!
//! ```text
//! ∫_x^∞ y^{-n} e^{iky} dy = -(e^{ikx} / ik) Σ_j (n)_j x^{-n-j} / (ik)^j
//! ```
//!
//! applied term by term to the `1/y` expansion of the envelope.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quadrature::kronrod_fixed;

/// Boundary between the tabulated region and the asymptotic far field.
pub(crate) const FAR: f64 = 100.0;
const TABLE_STEP: f64 = 0.25;
const ENVELOPE_TERMS: usize = 5;
const TAIL_TERMS: usize = 12;
const MAX_FOURIER_ORDER: u32 = 16;

/// The principal drift function `x / (1 + x²)`.
#[inline]
pub fn f1(x: f64) -> f64 {
    x / (1.0 + x * x)
}

/// One secondary drift function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFn {
    /// `sin(x) / x`
    Sinc,
    /// `f1(x) cos(k x)`
    TemperedCos(u32),
    /// `f1(x) sin(k x)`
    TemperedSin(u32),
}

impl BasisFn {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            BasisFn::Sinc => sinc(x),
            BasisFn::TemperedCos(k) => f1(x) * (k as f64 * x).cos(),
            BasisFn::TemperedSin(k) => f1(x) * (k as f64 * x).sin(),
        }
    }

    /// `f(-x) = parity * f(x)`.
    pub fn parity(self) -> f64 {
        match self {
            BasisFn::Sinc | BasisFn::TemperedSin(_) => 1.0,
            BasisFn::TemperedCos(_) => -1.0,
        }
    }

    fn frequency(self) -> u32 {
        match self {
            BasisFn::Sinc => 1,
            BasisFn::TemperedCos(k) | BasisFn::TemperedSin(k) => k,
        }
    }

    fn is_sine(self) -> bool {
        !matches!(self, BasisFn::TemperedCos(_))
    }

    /// Coefficients `a_n` of the envelope expansion `g(y) = Σ a_n y^{-n}`.
    fn envelope(self) -> Vec<(i32, f64)> {
        match self {
            BasisFn::Sinc => vec![(1, 1.0)],
            _ => (0..ENVELOPE_TERMS)
                .map(|r| {
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    (2 * r as i32 + 1, sign)
                })
                .collect(),
        }
    }

    /// `∫_x^∞ f(y) dy` for `x >= FAR`.
    fn far_tail(self, x: f64) -> f64 {
        debug_assert!(x >= FAR * 0.999);
        let k = self.frequency() as f64;
        let ik = Complex64::new(0.0, k);
        let phase = Complex64::from_polar(1.0, k * x);
        let mut total = Complex64::new(0.0, 0.0);
        for (n, a) in self.envelope() {
            let mut term = Complex64::new(x.powi(-n), 0.0);
            let mut series = term;
            for j in 0..TAIL_TERMS {
                term *= (n as f64 + j as f64) / (ik * x);
                series += term;
            }
            total += a * series;
        }
        let integral = -phase / ik * total;
        if self.is_sine() {
            integral.im
        } else {
            integral.re
        }
    }

    /// Leading coefficient `c` of the period-averaged product
    /// `f_a f_b ≈ c / x²` as `x → ±∞`; `None` stands for `f1`.
    pub(crate) fn tail_product(a: Option<BasisFn>, b: Option<BasisFn>) -> f64 {
        // f1 behaves as cos(0 x) / x
        let key = |f: Option<BasisFn>| match f {
            None => (0, false),
            Some(g) => (g.frequency(), g.is_sine()),
        };
        let (ka, sa) = key(a);
        let (kb, sb) = key(b);
        if ka != kb || sa != sb {
            0.0
        } else if ka == 0 {
            1.0
        } else {
            0.5
        }
    }
}

#[inline]
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Tabulated antiderivative of one basis function.
#[derive(Debug)]
struct Antiderivative {
    f: BasisFn,
    table: Vec<f64>,
    limit_pos: f64,
    numeric_limit_pos: f64,
}

impl Antiderivative {
    fn build(f: BasisFn) -> Self {
        let cells = (FAR / TABLE_STEP).round() as usize;
        let mut table = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for i in 0..cells {
            let lo = i as f64 * TABLE_STEP;
            acc += kronrod_fixed(|y| f.eval(y), lo, lo + TABLE_STEP);
            table.push(acc);
        }
        let numeric_limit_pos = acc + f.far_tail(FAR);
        let limit_pos = match f {
            BasisFn::Sinc => PI / 2.0,
            _ => numeric_limit_pos,
        };
        Self {
            f,
            table,
            limit_pos,
            numeric_limit_pos,
        }
    }

    fn eval_pos(&self, x: f64) -> f64 {
        if x >= FAR {
            return self.limit_pos - self.f.far_tail(x);
        }
        let i = ((x / TABLE_STEP) as usize).min(self.table.len() - 1);
        let node = i as f64 * TABLE_STEP;
        if x == node {
            return self.table[i];
        }
        self.table[i] + kronrod_fixed(|y| self.f.eval(y), node, x)
    }

    fn eval(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.eval_pos(x)
        } else {
            -self.f.parity() * self.eval_pos(-x)
        }
    }

    fn limit_neg(&self) -> f64 {
        -self.f.parity() * self.limit_pos
    }
}

#[derive(Debug)]
struct BasisInner {
    name: String,
    fns: Vec<BasisFn>,
    antiderivatives: Vec<Antiderivative>,
}

/// The secondary functions `f_{2,1}, …, f_{2,m}` of the drift, together with
/// their cached antiderivatives and limits `F_{2,ν}(±∞)`.
///
/// Cloning is cheap; the tables are shared.
#[derive(Clone)]
pub struct DriftBasis {
    inner: Arc<BasisInner>,
}

impl fmt::Debug for DriftBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftBasis")
            .field("name", &self.inner.name)
            .field("m", &self.m())
            .finish()
    }
}

impl PartialEq for DriftBasis {
    fn eq(&self, other: &Self) -> bool {
        self.inner.fns == other.inner.fns
    }
}

impl DriftBasis {
    fn from_fns(name: String, fns: Vec<BasisFn>) -> Self {
        let antiderivatives = fns.iter().map(|&f| Antiderivative::build(f)).collect();
        Self {
            inner: Arc::new(BasisInner {
                name,
                fns,
                antiderivatives,
            }),
        }
    }

    /// Only the principal function (`m = 0`).
    pub fn none() -> Self {
        Self::from_fns("none".into(), Vec::new())
    }

    /// `m = 1`, `f_2(x) = sin(x)/x`.
    pub fn sinc() -> Self {
        Self::from_fns("sinc".into(), vec![BasisFn::Sinc])
    }

    /// `m = 2ℓ`: `f1 cos(kx), f1 sin(kx)` for `k = 1..=ℓ`, in that order.
    pub fn fourier(order: u32) -> Result<Self> {
        if order == 0 || order > MAX_FOURIER_ORDER {
            return Err(Error::InvalidModel(format!(
                "fourier order must be in 1..={MAX_FOURIER_ORDER}, got {order}"
            )));
        }
        let fns = (1..=order)
            .flat_map(|k| [BasisFn::TemperedCos(k), BasisFn::TemperedSin(k)])
            .collect();
        Ok(Self::from_fns(format!("fourier-{order}"), fns))
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        match trimmed {
            "none" | "" => Ok(Self::none()),
            "sinc" => Ok(Self::sinc()),
            _ => {
                let order = trimmed
                    .strip_prefix("fourier-")
                    .and_then(|s| s.parse::<u32>().ok())
                    .ok_or_else(|| Error::UnknownBasis(name.to_string()))?;
                Self::fourier(order)
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    /// Number of secondary functions.
    pub fn m(&self) -> usize {
        self.inner.fns.len()
    }

    pub fn functions(&self) -> &[BasisFn] {
        &self.inner.fns
    }

    /// `f_{2,ν}(x)` for zero-based `idx = ν - 1`.
    #[inline]
    pub fn eval(&self, idx: usize, x: f64) -> f64 {
        self.inner.fns[idx].eval(x)
    }

    /// Writes `(f1, f_{2,1}, …, f_{2,m})(x)` into `out`.
    #[inline]
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        out[0] = f1(x);
        for (slot, f) in out[1..].iter_mut().zip(self.inner.fns.iter()) {
            *slot = f.eval(x);
        }
    }

    /// `F_{2,ν}(x)` for zero-based `idx`.
    pub fn antiderivative(&self, idx: usize, x: f64) -> f64 {
        self.inner.antiderivatives[idx].eval(x)
    }

    pub fn limit_pos(&self, idx: usize) -> f64 {
        self.inner.antiderivatives[idx].limit_pos
    }

    pub fn limit_neg(&self, idx: usize) -> f64 {
        self.inner.antiderivatives[idx].limit_neg()
    }

    /// `F(+∞)` as obtained from the table plus asymptotic tail, independent
    /// of any closed form stored for the basis.
    pub fn numeric_limit_pos(&self, idx: usize) -> f64 {
        self.inner.antiderivatives[idx].numeric_limit_pos
    }
}

impl Serialize for DriftBasis {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for DriftBasis {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        DriftBasis::from_name(&name).map_err(serde::de::Error::custom)
    }
}
