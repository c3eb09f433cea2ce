//! Euler–Maruyama simulation and the path functionals built on it.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_drift, scale_inverse, ModelSpec, ParamVector, Window};
use crate::rng::StreamKey;

/// Number of Euler steps covering `[0, horizon]`.
pub fn step_count(horizon: f64, dt: f64) -> Result<u64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be nonnegative, got {horizon}"
        )));
    }
    if horizon > 0.0 && dt > horizon {
        return Err(Error::InvalidArgument(format!("dt = {dt} exceeds horizon = {horizon}")));
    }
    Ok((horizon / dt + 1e-9).floor() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPath {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub spec_ref: String,
    pub theta_ref: String,
    pub values: Vec<f64>,
}

impl DiffusionPath {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Runs `steps` Euler steps from `x0`, calling `visit(k, x_k, ψ(x_k), x_{k+1})`
/// after each step. Returns the terminal state.
///
/// The Gaussian increment of step `k` is drawn from the counter block `k` of
/// `key`, so it does not depend on how many steps are run.
pub fn simulate_streaming<V>(
    spec: &ModelSpec,
    theta: &ParamVector,
    x0: f64,
    steps: u64,
    dt: f64,
    key: StreamKey,
    mut visit: V,
) -> Result<f64>
where
    V: FnMut(u64, f64, &[f64], f64),
{
    theta.check_in_domain(spec)?;
    let coef = theta.to_vec();
    let mut psi = vec![0.0; spec.dim()];
    let vol = spec.sigma * dt.sqrt();
    let mut x = x0;
    for k in 0..steps {
        spec.psi(x, &mut psi);
        let mut b = 0.0;
        for (c, p) in coef.iter().zip(&psi) {
            if *c != 0.0 {
                b += c * p;
            }
        }
        let z: f64 = StandardNormal.sample(&mut key.step_rng(k));
        let next = x + b * dt + vol * z;
        if !next.is_finite() {
            return Err(Error::SimulationDiverged { step: k, state: next });
        }
        visit(k, x, &psi, next);
        x = next;
    }
    Ok(x)
}

/// Simulates a stored path from `spec.x0` with the stream derived from `seed`.
pub fn simulate_path(spec: &ModelSpec, theta: &ParamVector, horizon: f64, dt: f64, seed: u64) -> Result<DiffusionPath> {
    simulate_path_keyed(spec, theta, horizon, dt, seed, StreamKey::new(seed))
}

pub fn simulate_path_keyed(
    spec: &ModelSpec,
    theta: &ParamVector,
    horizon: f64,
    dt: f64,
    seed: u64,
    key: StreamKey,
) -> Result<DiffusionPath> {
    let steps = step_count(horizon, dt)?;
    let mut values = Vec::with_capacity(steps as usize + 1);
    values.push(spec.x0);
    simulate_streaming(spec, theta, spec.x0, steps, dt, key, |_, _, _, next| values.push(next))?;
    Ok(DiffusionPath {
        dt,
        horizon,
        seed,
        spec_ref: spec.id(),
        theta_ref: theta.id(),
        values,
    })
}

/// `Y`, `J` and horizon of one path, optionally truncated to a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub y: Vec<f64>,
    pub j: Vec<Vec<f64>>,
    pub t: f64,
    #[serde(default)]
    pub window: Option<Window>,
}

impl SufficientStats {
    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.y.len();
        if d == 0 {
            return Err(Error::InvalidArgument("stats have dimension 0".into()));
        }
        if self.j.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: self.j.len(),
            });
        }
        for row in &self.j {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
        }
        if !(self.t >= 0.0) {
            return Err(Error::InvalidArgument(format!("t must be nonnegative, got {}", self.t)));
        }
        Ok(())
    }

    pub fn y_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    pub fn j_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.j[r][c])
    }
}

/// Running sums for [`SufficientStats`]; feed it the output of
/// [`simulate_streaming`].
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    dim: usize,
    sigma2: f64,
    dt: f64,
    window: Option<Window>,
    y: Vec<f64>,
    j: Vec<f64>,
    steps: u64,
}

impl StatsAccumulator {
    pub fn new(spec: &ModelSpec, dt: f64, window: Option<Window>) -> Self {
        let dim = spec.dim();
        Self {
            dim,
            sigma2: spec.sigma2(),
            dt,
            window,
            y: vec![0.0; dim],
            j: vec![0.0; dim * dim],
            steps: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64, psi: &[f64], dx: f64) {
        self.steps += 1;
        if let Some(w) = &self.window {
            if !w.contains(x) {
                return;
            }
        }
        let d = self.dim;
        for r in 0..d {
            let pr = psi[r];
            self.y[r] += pr * dx;
            for c in r..d {
                self.j[r * d + c] += pr * psi[c];
            }
        }
    }

    pub fn stats(&self) -> SufficientStats {
        let d = self.dim;
        let jscale = self.dt / self.sigma2;
        let mut j = vec![vec![0.0; d]; d];
        for r in 0..d {
            for c in r..d {
                let v = self.j[r * d + c] * jscale;
                j[r][c] = v;
                j[c][r] = v;
            }
        }
        SufficientStats {
            y: self.y.iter().map(|v| v / self.sigma2).collect(),
            j,
            t: self.steps as f64 * self.dt,
            window: self.window,
        }
    }
}

/// `Y`, `J` of a stored path with left-point evaluation, optionally with
/// `ψ` replaced by `ψ·1_A`.
pub fn accumulate_stats(spec: &ModelSpec, path: &DiffusionPath, window: Option<Window>) -> Result<SufficientStats> {
    if path.values.is_empty() {
        return Err(Error::InvalidArgument("path is empty".into()));
    }
    let mut acc = StatsAccumulator::new(spec, path.dt, window);
    let mut psi = vec![0.0; spec.dim()];
    for w in path.values.windows(2) {
        spec.psi(w[0], &mut psi);
        acc.push(w[0], &psi, w[1] - w[0]);
    }
    Ok(acc.stats())
}

/// The score `Y - Jϑ`.
pub fn score_at(stats: &SufficientStats, theta: &[f64]) -> Result<Vec<f64>> {
    let d = stats.dim();
    if theta.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: theta.len(),
        });
    }
    Ok((0..d)
        .map(|r| stats.y[r] - stats.j[r].iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeCycleRecord {
    pub r_times: Vec<f64>,
    pub durations: Vec<f64>,
    pub threshold: f64,
}

/// Streaming detector for the stopping times
/// `Sₙ = inf{t > Rₙ₋₁ : x > threshold}`, `Rₙ = inf{t > Sₙ : x < 0}`, with `R₀ = 0`.
#[derive(Debug, Clone)]
pub struct CycleDetector {
    threshold: f64,
    above: bool,
    r_steps: Vec<u64>,
}

impl CycleDetector {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            above: false,
            r_steps: Vec::new(),
        }
    }

    /// Feeds the state at grid index `k`; returns true when `k` is some `Rₙ`.
    #[inline]
    pub fn observe(&mut self, k: u64, x: f64) -> bool {
        if !self.above {
            if x > self.threshold {
                self.above = true;
            }
            false
        } else if x < 0.0 {
            self.above = false;
            self.r_steps.push(k);
            true
        } else {
            false
        }
    }

    pub fn r_steps(&self) -> &[u64] {
        &self.r_steps
    }

    pub fn record(&self, dt: f64) -> LifeCycleRecord {
        let r_times: Vec<f64> = self.r_steps.iter().map(|&k| k as f64 * dt).collect();
        let durations = self.r_steps.windows(2).map(|w| (w[1] - w[0]) as f64 * dt).collect();
        LifeCycleRecord {
            r_times,
            durations,
            threshold: self.threshold,
        }
    }
}

/// The level `S⁻¹(1)` that separates the two halves of a life cycle.
pub fn cycle_threshold(spec: &ModelSpec, theta: &ParamVector) -> Result<f64> {
    scale_inverse(spec, theta, 1.0)
}

pub fn detect_life_cycles(spec: &ModelSpec, theta: &ParamVector, path: &DiffusionPath) -> Result<LifeCycleRecord> {
    let threshold = cycle_threshold(spec, theta)?;
    Ok(detect_with_threshold(path, threshold))
}

pub fn detect_with_threshold(path: &DiffusionPath, threshold: f64) -> LifeCycleRecord {
    let mut det = CycleDetector::new(threshold);
    for (k, &x) in path.values.iter().enumerate() {
        det.observe(k as u64, x);
    }
    det.record(path.dt)
}

/// One life cycle simulated on its own, started at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOutcome {
    pub duration: f64,
    /// The cycle did not finish within the step cap; `duration` is the cap.
    pub censored: bool,
}

/// Simulates from 0 until the path has exceeded `threshold` and then
/// dropped below 0, or until `max_steps` steps have been taken.
pub fn simulate_cycle(
    spec: &ModelSpec,
    theta: &ParamVector,
    dt: f64,
    threshold: f64,
    max_steps: u64,
    key: StreamKey,
) -> Result<CycleOutcome> {
    theta.check_in_domain(spec)?;
    let vol = spec.sigma * dt.sqrt();
    let zero_drift = theta.theta1 == 0.0 && theta.theta2.iter().all(|&t| t == 0.0);
    let mut det = CycleDetector::new(threshold);
    let mut x = 0.0;
    for k in 0..max_steps {
        let b = if zero_drift { 0.0 } else { eval_drift(spec, theta, x) };
        let z: f64 = StandardNormal.sample(&mut key.step_rng(k));
        x += b * dt + vol * z;
        if !x.is_finite() {
            return Err(Error::SimulationDiverged { step: k, state: x });
        }
        if det.observe(k + 1, x) {
            return Ok(CycleOutcome {
                duration: (k + 1) as f64 * dt,
                censored: false,
            });
        }
    }
    Ok(CycleOutcome {
        duration: max_steps as f64 * dt,
        censored: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DriftBasis;

    fn sinc_spec() -> ModelSpec {
        ModelSpec::new(1.0, DriftBasis::sinc(), 0.0).unwrap()
    }

    #[test]
    fn zero_horizon_is_start_point() {
        let s = ModelSpec::new(1.0, DriftBasis::none(), 0.7).unwrap();
        let p = simulate_path(&s, &ParamVector::zeros(0), 0.0, 0.1, 1).unwrap();
        assert_eq!(p.values, vec![0.7]);
        assert!(simulate_path(&s, &ParamVector::zeros(0), 0.05, 0.1, 1).is_err());
        assert!(simulate_path(&s, &ParamVector::new(0.5, vec![]), 1.0, 0.1, 1).is_err());
    }

    #[test]
    fn stored_path_follows_drift_recursion() {
        let s = sinc_spec();
        let t = ParamVector::new(0.2, vec![0.4]);
        let dt = 0.01;
        let p = simulate_path(&s, &t, 3.0, dt, 9).unwrap();
        assert_eq!(p.values.len(), 301);
        let key = StreamKey::new(9);
        let mut x = 0.0;
        for k in 0..300usize {
            let z: f64 = StandardNormal.sample(&mut key.step_rng(k as u64));
            x = x + eval_drift(&s, &t, x) * dt + dt.sqrt() * z;
            assert_eq!(p.values[k + 1], x);
        }
    }

    #[test]
    fn single_step_sinc_stats() {
        let s = sinc_spec();
        let path = DiffusionPath {
            dt: 0.5,
            horizon: 0.5,
            seed: 0,
            spec_ref: String::new(),
            theta_ref: String::new(),
            values: vec![0.0, 0.3],
        };
        let st = accumulate_stats(&s, &path, None).unwrap();
        assert_eq!(st.y, vec![0.0, 0.3]);
        assert_eq!(st.j, vec![vec![0.0, 0.0], vec![0.0, 0.5]]);
        let single = DiffusionPath {
            values: vec![1.0],
            ..path
        };
        let st = accumulate_stats(&s, &single, None).unwrap();
        assert_eq!(st.y, vec![0.0, 0.0]);
        assert_eq!(st.t, 0.0);
    }

    #[test]
    fn score_hand_example() {
        let st = SufficientStats {
            y: vec![1.0, 0.0],
            j: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            t: 1.0,
            window: None,
        };
        assert_eq!(score_at(&st, &[0.5, 0.0]).unwrap(), vec![0.5, 0.0]);
        assert_eq!(score_at(&st, &[0.0, 0.0]).unwrap(), st.y);
        assert!(score_at(&st, &[0.0]).is_err());
    }

    #[test]
    fn sawtooth_gives_one_cycle() {
        let path = DiffusionPath {
            dt: 1.0,
            horizon: 8.0,
            seed: 0,
            spec_ref: String::new(),
            theta_ref: String::new(),
            values: vec![0.0, 0.5, 1.5, 0.2, -0.1, 1.2, 0.5, -0.3, 0.1],
        };
        let rec = detect_with_threshold(&path, 1.0);
        assert_eq!(rec.r_times, vec![4.0, 7.0]);
        assert_eq!(rec.durations, vec![3.0]);
        let flat = DiffusionPath {
            values: vec![0.0, 0.9, -0.5, 0.99],
            ..path
        };
        assert!(detect_with_threshold(&flat, 1.0).r_times.is_empty());
    }

    #[test]
    fn zero_parameter_threshold_is_one() {
        let s = sinc_spec();
        let th = cycle_threshold(&s, &ParamVector::zeros(1)).unwrap();
        assert!((th - 1.0).abs() < 1e-10);
    }

    #[test]
    fn standalone_cycle_matches_path_detection() {
        let s = sinc_spec();
        let t = ParamVector::zeros(1);
        let key = StreamKey::new(5);
        let out = simulate_cycle(&s, &t, 0.01, 1.0, 1_000_000, key).unwrap();
        assert!(!out.censored);
        let steps = (out.duration / 0.01).round() as u64;
        let mut det = CycleDetector::new(1.0);
        let mut first = None;
        simulate_streaming(&s, &t, 0.0, steps, 0.01, key, |k, _, _, next| {
            if det.observe(k + 1, next) && first.is_none() {
                first = Some(k + 1);
            }
        })
        .unwrap();
        assert_eq!(first, Some(steps));
        let capped = simulate_cycle(&s, &t, 0.01, 1.0, steps - 1, key).unwrap();
        assert!(capped.censored);
    }
}
