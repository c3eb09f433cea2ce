//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature for vector-valued
//! integrands.
//!
//! The integrand writes all components for a given abscissa into an output
//! slice, so shared work (e.g. the invariant density) is evaluated once per
//! node. Intervals are bisected in order of decreasing error estimate until
//! the summed error satisfies the requested tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and limits for [`integrate_vec`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 1 << 20,
        }
    }
}

/// 21-point Kronrod estimate on `[a, b]`; returns the per-component
/// Kronrod values and the max-norm error estimate |K - G|.
fn kronrod21<F>(f: &F, a: f64, b: f64, dim: usize, buf: &mut [f64], out: &mut [f64]) -> f64
where
    F: Fn(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let (lo_buf, rest) = buf.split_at_mut(dim);
    let (hi_buf, gauss) = rest.split_at_mut(dim);
    gauss[..dim].fill(0.0);

    f(center, lo_buf);
    for c in 0..dim {
        out[c] = WGK[10] * lo_buf[c];
    }
    for (j, &x) in XGK.iter().take(10).enumerate() {
        let dx = half * x;
        f(center - dx, lo_buf);
        f(center + dx, hi_buf);
        for c in 0..dim {
            let pair = lo_buf[c] + hi_buf[c];
            out[c] += WGK[j] * pair;
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * pair;
            }
        }
    }
    let mut err: f64 = 0.0;
    for c in 0..dim {
        out[c] *= half;
        err = err.max((out[c] - half * gauss[c]).abs());
    }
    err
}

struct Piece {
    lo: f64,
    hi: f64,
    err: f64,
    value: Vec<f64>,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates a `dim`-component integrand over the partition given by the
/// sorted `breaks` (at least two points).
pub fn integrate_vec<F>(f: F, breaks: &[f64], dim: usize, opts: QuadOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut buf = vec![0.0; 3 * dim.max(1)];
    let mut heap = BinaryHeap::with_capacity(breaks.len());
    let mut total = vec![0.0; dim];
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi == lo {
            continue;
        }
        let mut value = vec![0.0; dim];
        let err = kronrod21(&f, lo, hi, dim, &mut buf, &mut value);
        for c in 0..dim {
            total[c] += value[c];
        }
        total_err += err;
        heap.push(Piece { lo, hi, err, value });
    }

    let target = |total: &[f64]| {
        let scale = total.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        opts.abs_tol.max(opts.rel_tol * scale)
    };

    while total_err > target(&total) {
        if heap.len() >= opts.max_intervals {
            let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
            return Err(Error::Quadrature {
                lo,
                hi,
                abserr: total_err,
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval exhausted at machine resolution; accept what we have
            heap.push(Piece { err: 0.0, ..worst });
            total_err = heap.iter().map(|p| p.err).sum();
            if total_err <= target(&total) {
                break;
            }
            continue;
        }
        let mut left = vec![0.0; dim];
        let mut right = vec![0.0; dim];
        let el = kronrod21(&f, worst.lo, mid, dim, &mut buf, &mut left);
        let er = kronrod21(&f, mid, worst.hi, dim, &mut buf, &mut right);
        for c in 0..dim {
            total[c] += left[c] + right[c] - worst.value[c];
        }
        total_err += el + er - worst.err;
        heap.push(Piece {
            lo: worst.lo,
            hi: mid,
            err: el,
            value: left,
        });
        heap.push(Piece {
            lo: mid,
            hi: worst.hi,
            err: er,
            value: right,
        });
    }

    // resum to shed the drift of the incremental updates
    let mut exact = vec![0.0; dim];
    for p in heap.iter() {
        for c in 0..dim {
            exact[c] += p.value[c];
        }
    }
    Ok(exact)
}

/// Scalar convenience wrapper over [`integrate_vec`] on `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let breaks = geometric_breaks(lo, hi);
    let v = integrate_vec(|x, out: &mut [f64]| out[0] = f(x), &breaks, 1, opts)?;
    Ok(sign * v[0])
}

/// Single non-adaptive 21-point Kronrod rule, exact to rounding for smooth
/// integrands on short intervals.
pub fn kronrod_fixed<F>(f: F, a: f64, b: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = WGK[10] * f(center);
    for (j, &x) in XGK.iter().take(10).enumerate() {
        let dx = half * x;
        acc += WGK[j] * (f(center - dx) + f(center + dx));
    }
    acc * half
}

/// Breakpoints at 0 and ±2^k inside `[lo, hi]`, so integrands with
/// algebraic behaviour across many scales start from a sensible partition.
pub fn geometric_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    if lo < 0.0 && hi > 0.0 {
        pts.push(0.0);
    }
    let mut p = 1.0_f64;
    while p < lo.abs().max(hi.abs()) && p < 1e300 {
        for v in [p, -p] {
            if v > lo && v < hi {
                pts.push(v);
            }
        }
        p *= 2.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Uniform panels of width at most `width` covering `[lo, hi]`.
pub fn uniform_breaks(lo: f64, hi: f64, width: f64) -> Vec<f64> {
    let n = ((hi - lo) / width).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let mut pts: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    pts.push(hi);
    pts
}
