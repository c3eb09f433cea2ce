use nalgebra::DMatrix;
use nullrec_core::limits::*;
use nullrec_core::linalg::{inv_sqrt_spd, is_positive_definite};
use nullrec_core::rng::StreamKey;
use nullrec_core::stats::{ks_one_sample, ks_statistic, median, MeanEstimate};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

fn levy_cdf(t: f64) -> f64 {
    // at α = 1/2 the law has density t^{-3/2} e^{-1/(4t)} / (2√π)
    if t <= 0.0 {
        0.0
    } else {
        erfc(0.5 / t.sqrt())
    }
}

fn stable_draws(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = StreamKey::new(seed).rng();
    (0..n).map(|_| sample_stable(alpha, &mut r).unwrap()).collect()
}

#[test]
fn half_index_matches_levy_distribution() {
    let s = stable_draws(0.5, 100_000, 1);
    assert!(s.iter().all(|&v| v > 0.0 && v.is_finite()));
    let ks = ks_one_sample(&s, levy_cdf).unwrap();
    assert!(ks < 0.01, "{ks}");
}

#[test]
fn mittag_leffler_is_positive() {
    let mut r = StreamKey::new(2).rng();
    for a in [0.05, 0.25, 0.5, 0.75, 0.95] {
        for _ in 0..10_000 {
            let v = sample_mittag_leffler(a, &mut r).unwrap();
            assert!(v > 0.0 && v.is_finite());
        }
    }
}

#[test]
fn sums_of_stable_draws_rescale() {
    // S₁ + … + S_k has the law of k^{1/α} S₁
    let k = 4;
    let scaled = |alpha: f64, n: usize, seed: u64| -> Vec<f64> {
        let s = stable_draws(alpha, n * k, seed);
        s.chunks(k)
            .map(|c| c.iter().sum::<f64>() / (k as f64).powf(1.0 / alpha))
            .collect()
    };
    let ks = ks_one_sample(&scaled(0.5, 10_000, 3), levy_cdf).unwrap();
    assert!(ks <= 0.015, "{ks}");
    for (alpha, seed) in [(0.25, 4), (0.75, 5)] {
        let ks = ks_statistic(&scaled(alpha, 100_000, seed), &stable_draws(alpha, 100_000, seed + 100)).unwrap();
        assert!(ks <= 0.015, "alpha {alpha}: {ks}");
    }
}

#[test]
fn limit_error_is_symmetric() {
    let law = LimitLawSpec::new(0.5, vec![vec![2.19891, 0.79758], vec![0.79758, 3.74043]]).unwrap();
    let s = law.sampler().unwrap();
    let mut r = StreamKey::new(6).rng();
    let n = 50_000;
    let draws: Vec<Vec<f64>> = (0..2 * n).map(|_| s.sample(&mut r)).collect();
    let crit = 1.63 * (2.0 / n as f64).sqrt();
    for c in 0..2 {
        let a: Vec<f64> = draws[..n].iter().map(|d| d[c]).collect();
        let b: Vec<f64> = draws[n..].iter().map(|d| -d[c]).collect();
        let ks = ks_statistic(&a, &b).unwrap();
        assert!(ks < crit, "coord {c}: {ks}");
    }
}

#[test]
fn sampler_agrees_with_two_stage_construction() {
    let law = LimitLawSpec::new(0.5, vec![vec![std::f64::consts::FRAC_PI_2]]).unwrap();
    let s = law.sampler().unwrap();
    let n = 100_000;
    let mut r = StreamKey::new(7).rng();
    let direct: Vec<f64> = (0..n).map(|_| s.sample(&mut r)[0]).collect();
    let mut r2 = StreamKey::new(8).rng();
    let two_stage: Vec<f64> = (0..n)
        .map(|_| {
            let v = sample_mittag_leffler(0.5, &mut r2).unwrap();
            let g: f64 = StandardNormal.sample(&mut r2);
            g * (2.0 / std::f64::consts::PI / v).sqrt()
        })
        .collect();
    let ks = ks_statistic(&direct, &two_stage).unwrap();
    assert!(ks <= 0.01, "{ks}");
}

/// Medians over independent streams of the running mean of `draw` at each checkpoint.
fn running_mean_medians(
    seed: u64,
    checkpoints: &[usize],
    draw: impl Fn(&mut nullrec_core::rng::CounterRng) -> f64,
) -> Vec<f64> {
    let streams = 20;
    let mut at = vec![Vec::new(); checkpoints.len()];
    for s in 0..streams {
        let mut r = StreamKey::derive(seed, &[s]).rng();
        let mut sum = 0.0;
        let mut next = 0;
        for i in 1..=*checkpoints.last().unwrap() {
            sum += draw(&mut r);
            if i == checkpoints[next] {
                at[next].push(sum / i as f64);
                next += 1;
            }
        }
    }
    at.iter().map(|v| median(v).unwrap()).collect()
}

#[test]
fn second_moments_of_limit_error_do_not_settle() {
    let law = LimitLawSpec::new(0.5, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let s = law.sampler().unwrap();
    let m = running_mean_medians(9, &[1_000, 10_000, 100_000], |r| s.sample(r)[0].powi(2));
    assert!(m[0] < m[1] && m[1] < m[2], "{m:?}");
    // a finite-variance control settles
    let c = running_mean_medians(9, &[1_000, 10_000, 100_000], |r| {
        let g: f64 = StandardNormal.sample(r);
        g * g
    });
    assert!((c[2] - 1.0).abs() < 0.01 && (c[1] - 1.0).abs() < 0.03, "{c:?}");
}

#[test]
fn inverse_square_root_whitens_limit_covariance() {
    let cov = DMatrix::from_row_slice(2, 2, &[2.19891, 0.79758, 0.79758, 3.74043]);
    let law = LimitLawSpec::from_matrix(0.5, &cov).unwrap();
    let r = law.sampler().unwrap();
    let w = r.inv_sqrt_cov() * &cov * r.inv_sqrt_cov();
    assert!((w - DMatrix::identity(2, 2)).abs().max() < 1e-12);
}

#[test]
fn risk_bounds_for_simple_losses() {
    let law = LimitLawSpec::new(0.5, vec![vec![std::f64::consts::FRAC_PI_2]]).unwrap();
    let c = limit_risk(&law, Loss::Constant { value: 0.7 }, 1000, StreamKey::new(1)).unwrap();
    assert!((c.mean - 0.7).abs() < 1e-12);
    assert!(c.stderr < 1e-12);
    let e = limit_risk(&law, Loss::ExpQuadratic, 5000, StreamKey::new(1)).unwrap();
    assert!(e.mean > 0.0 && e.mean < 1.0);
    let loss = Loss::TruncatedQuadratic { cap: 4.0 };
    let a = limit_risk(&law, loss, 100_000, StreamKey::new(10)).unwrap();
    let b = limit_risk(&law, loss, 100_000, StreamKey::new(11)).unwrap();
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se, "{a:?} {b:?}");
}

#[test]
fn mittag_leffler_mean_matches_moment_identity() {
    let mut r = StreamKey::new(12).rng();
    let v: Vec<f64> = (0..100_000)
        .map(|_| sample_mittag_leffler(0.5, &mut r).unwrap())
        .collect();
    let m = MeanEstimate::from_sample(&v).unwrap();
    assert!(
        (m.mean - 2.0 / std::f64::consts::PI.sqrt()).abs() <= 3.0 * m.stderr,
        "{m:?}"
    );
}

fn spd_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..5)
        .prop_flat_map(|d| (Just(d), prop::collection::vec(-2.0f64..2.0, d * d), 0.05f64..2.0))
        .prop_map(|(d, v, ridge)| {
            let a = DMatrix::from_vec(d, d, v);
            &a * a.transpose() + DMatrix::identity(d, d) * ridge
        })
}

proptest! {
    #[test]
    fn inverse_root_identity(m in spd_strategy()) {
        prop_assume!(is_positive_definite(&m));
        let r = inv_sqrt_spd(&m).unwrap();
        let w = &r * &m * &r;
        prop_assert!((w - DMatrix::identity(m.nrows(), m.nrows())).abs().max() < 1e-10);
        prop_assert!((&r - r.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn draws_stay_positive(alpha in 0.01f64..0.99, seed in 0u64..1000) {
        let mut r = StreamKey::new(seed).rng();
        for _ in 0..200 {
            let s = sample_stable(alpha, &mut r).unwrap();
            prop_assert!(s > 0.0);
        }
    }
}
