use nullrec_core::estimate::*;
use nullrec_core::harness::identity_residuals;
use nullrec_core::model::*;
use nullrec_core::simulate::*;
use nullrec_core::stats::{ks_statistic, MeanEstimate};
use proptest::prelude::*;

fn sinc() -> ModelSpec {
    ModelSpec::new(1.0, DriftBasis::sinc(), 0.0).unwrap()
}

#[test]
fn zero_drift_increments_are_standard_normal() {
    let s = ModelSpec::new(1.0, DriftBasis::none(), 0.0).unwrap();
    let p = simulate_path(&s, &ParamVector::zeros(0), 1000.0, 0.1, 3).unwrap();
    let inc: Vec<f64> = p.values.windows(2).map(|w| (w[1] - w[0]) / 0.1f64.sqrt()).collect();
    let m = MeanEstimate::from_sample(&inc).unwrap();
    assert!(m.mean.abs() < 4.0 * m.stderr);
    let var = inc.iter().map(|v| v * v).sum::<f64>() / inc.len() as f64;
    assert!((var - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn identical_seed_gives_identical_path() {
    let t = ParamVector::new(0.1, vec![-0.4]);
    let a = simulate_path(&sinc(), &t, 20.0, 0.01, 77).unwrap();
    let b = simulate_path(&sinc(), &t, 20.0, 0.01, 77).unwrap();
    assert_eq!(a, b);
    let c = simulate_path(&sinc(), &t, 20.0, 0.01, 78).unwrap();
    assert_ne!(a.values, c.values);
}

#[test]
fn mle_error_matches_representation_on_simulated_paths() {
    let t = ParamVector::new(0.0, vec![0.3]);
    for seed in 0..20 {
        let p = simulate_path(&sinc(), &t, 50.0, 0.01, seed).unwrap();
        let st = accumulate_stats(&sinc(), &p, None).unwrap();
        let e = mle(&st).unwrap();
        let rep = error_representation(&st, &t.to_vec()).unwrap().unwrap();
        for i in 0..2 {
            assert!((e.theta_hat[i] - t.to_vec()[i] - rep[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn singular_information_is_rare() {
    let t = ParamVector::new(0.0, vec![0.3]);
    let singular = (0..200)
        .filter(|&seed| {
            let p = simulate_path(&sinc(), &t, 10.0, 0.01, seed).unwrap();
            !mle(&accumulate_stats(&sinc(), &p, None).unwrap()).unwrap().j_invertible
        })
        .count();
    assert!(singular < 2, "{singular} singular of 200");
}

#[test]
fn singular_window_statistics_are_flagged_not_failed() {
    // a window around the start that the path leaves at once sees ψ(0) = (0, 1) only
    let t = ParamVector::new(0.0, vec![0.3]);
    let p = simulate_path(&sinc(), &t, 1.0, 0.01, 5).unwrap();
    let st = accumulate_stats(&sinc(), &p, Some(Window::new(-1e-12, 1e-12).unwrap())).unwrap();
    let e = restricted_mle(&st, &sinc()).unwrap();
    assert!(!e.j_invertible);
    assert_eq!(e.theta_hat, vec![0.0, 0.0]);
    let grid = vec![t.to_vec()];
    assert!(identity_residuals(&st, &grid, 0.5).unwrap().is_none());
}

#[test]
fn restricted_estimator_is_consistent() {
    let spec = sinc();
    let t = ParamVector::new(0.0, vec![0.3]);
    let w = Some(Window::new(-2.0, 2.0).unwrap());
    let mut hat = [Vec::new(), Vec::new()];
    for seed in 0..100 {
        let p = simulate_path(&spec, &t, 2000.0, 0.02, 1000 + seed).unwrap();
        let e = restricted_mle(&accumulate_stats(&spec, &p, w).unwrap(), &spec).unwrap();
        assert!(e.j_invertible);
        hat[0].push(e.theta_hat[0]);
        hat[1].push(e.theta_hat[1]);
    }
    for (i, h) in hat.iter().enumerate() {
        let m = MeanEstimate::from_sample(h).unwrap();
        assert!((m.mean - t.to_vec()[i]).abs() < 3.0 * m.stderr, "coord {i}: {m:?}");
    }
}

#[test]
fn naive_estimator_carries_the_predicted_bias() {
    let spec = sinc();
    let t = ParamVector::new(0.0, vec![0.5]);
    let b = predicted_naive_bias(&spec, &t).unwrap();
    let mut bias = Vec::new();
    for seed in 0..30 {
        let p = simulate_path(&spec, &t, 10000.0, 0.02, seed).unwrap();
        bias.push(naive_bias_process(&accumulate_stats(&spec, &p, None).unwrap(), &t).unwrap());
    }
    let med = nullrec_core::stats::median(&bias).unwrap();
    assert!((med - b).abs() < 0.15 * b, "median {med} vs {b}");
}

#[test]
fn life_cycles_look_exchangeable() {
    // odd against even cycles, pooled over independent paths
    let spec = ModelSpec::new(1.0, DriftBasis::none(), 0.0).unwrap();
    let t = ParamVector::zeros(0);
    let (mut odd, mut even) = (Vec::new(), Vec::new());
    for seed in 0..40 {
        let p = simulate_path(&spec, &t, 20_000.0, 0.05, 300 + seed).unwrap();
        for (i, d) in detect_with_threshold(&p, 1.0).durations.into_iter().enumerate() {
            if i % 2 == 0 {
                even.push(d);
            } else {
                odd.push(d);
            }
        }
    }
    assert!(odd.len() > 300, "{} cycles", odd.len());
    let ks = ks_statistic(&odd, &even).unwrap();
    // 1% critical value of the two-sample test
    let crit = 1.63 * ((odd.len() + even.len()) as f64 / (odd.len() * even.len()) as f64).sqrt();
    assert!(ks < crit, "{ks} >= {crit}");
}

fn stats_strategy() -> impl Strategy<Value = (SufficientStats, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (
        1u64..10_000,
        -0.4f64..0.4,
        -1.0f64..1.0,
        prop::collection::vec(-2.0f64..2.0, 6),
    )
        .prop_map(|(seed, t1, t2, v)| {
            let p = simulate_path(&sinc(), &ParamVector::new(t1, vec![t2]), 20.0, 0.01, seed).unwrap();
            let st = accumulate_stats(&sinc(), &p, None).unwrap();
            (st, v[0..2].to_vec(), v[2..4].to_vec(), v[4..6].to_vec())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_likelihood_ratio_is_a_cocycle((st, a, b, c) in stats_strategy()) {
        let ab = log_likelihood_ratio(&st, &a, &b).unwrap();
        let bc = log_likelihood_ratio(&st, &b, &c).unwrap();
        let ac = log_likelihood_ratio(&st, &a, &c).unwrap();
        let diff = log_likelihood(&st, &a).unwrap() - log_likelihood(&st, &b).unwrap();
        let scale = 1.0 + ab.abs() + bc.abs();
        prop_assert!((ab + bc - ac).abs() < 1e-10 * scale);
        prop_assert!((ab - diff).abs() < 1e-10 * scale);
    }

    #[test]
    fn one_step_lands_on_the_mle((st, a, _, _) in stats_strategy()) {
        let m = mle(&st).unwrap();
        let o = one_step(&st, &a).unwrap();
        prop_assert_eq!(m.j_invertible, o.j_invertible);
        if m.j_invertible {
            for (x, y) in m.theta_hat.iter().zip(&o.theta_hat) {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn ito_statistics_match_their_definition(seed in 1u64..10_000, t1 in -0.4f64..0.4, t2 in -1.0f64..1.0, sigma in 0.5f64..2.0) {
        let spec = ModelSpec::new(sigma, DriftBasis::sinc(), 0.0).unwrap();
        let t = ParamVector::new(t1 * sigma * sigma, vec![t2]);
        let dt = 0.01;
        let p = simulate_path(&spec, &t, 5.0, dt, seed).unwrap();
        let st = accumulate_stats(&spec, &p, None).unwrap();
        let mut y = [0.0; 2];
        let mut j = [[0.0; 2]; 2];
        for w in p.values.windows(2) {
            let psi = [f1(w[0]), DriftBasis::sinc().eval(0, w[0])];
            for a in 0..2 {
                y[a] += psi[a] * (w[1] - w[0]);
                for b in 0..2 {
                    j[a][b] += psi[a] * psi[b] * dt;
                }
            }
        }
        let s2 = sigma * sigma;
        for a in 0..2 {
            prop_assert!((st.y[a] - y[a] / s2).abs() < 1e-10 * (1.0 + y[a].abs()));
            for b in 0..2 {
                prop_assert!((st.j[a][b] - j[a][b] / s2).abs() < 1e-10 * (1.0 + (j[a][b] / s2).abs()));
            }
        }
        prop_assert_eq!(st.j[0][1], st.j[1][0]);
    }

    #[test]
    fn whole_line_window_is_no_window(seed in 1u64..10_000, t2 in -1.0f64..1.0) {
        let p = simulate_path(&sinc(), &ParamVector::new(0.1, vec![t2]), 10.0, 0.01, seed).unwrap();
        let a = accumulate_stats(&sinc(), &p, None).unwrap();
        let b = accumulate_stats(&sinc(), &p, Some(Window::whole_line())).unwrap();
        prop_assert_eq!(a.y, b.y);
        prop_assert_eq!(a.j, b.j);
    }
}
