//! Monte Carlo experiments that confront simulated estimators with their
//! asymptotic predictions.

mod identity;
mod rate;
mod report;
mod risk;
mod rlt;
mod tail;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use identity::{identity_residuals, run_identity_suite, IdentityResiduals};
pub use rate::run_rate_experiment;
pub use report::{emit_report, ExperimentReport, ReportRow};
pub use risk::{risk_grid, run_risk_experiment};
pub use rlt::run_rlt_experiment;
pub use tail::{run_tail_experiment, simulate_cycles, CycleSample};

use crate::error::{Error, Result};
use crate::limits::Loss;
use crate::model::{DriftBasis, ModelSpec, ParamVector, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Identity,
    Rate,
    Tail,
    Rlt,
    Risk,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Identity => "identity",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Tail => "tail",
            ExperimentKind::Rlt => "rlt",
            ExperimentKind::Risk => "risk",
        }
    }
}

/// Pass thresholds. Each experiment reads only the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative residual of the exact algebraic identities.
    pub identity: f64,
    pub ks_between_horizons: f64,
    pub ks_limit: f64,
    pub ks_calibration: f64,
    /// Minimal fraction of replications whose `J` passes the gate.
    pub min_nonsingular_fraction: f64,
    /// Absolute error of the Hill estimate.
    pub hill_abs: f64,
    /// Relative error of the empirical tail constant.
    pub tail_constant_rel: f64,
    /// Relative error of the terminal naive bias.
    pub rlt_rel: f64,
    /// Required ratio of naive deviation to ML error (medians).
    pub inconsistency_ratio: f64,
    /// Allowed shortfall of the ML sup-risk below the bound, in standard errors.
    pub risk_stderr: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            ks_between_horizons: 0.08,
            ks_limit: 0.10,
            ks_calibration: 0.05,
            min_nonsingular_fraction: 0.9,
            hill_abs: 0.07,
            tail_constant_rel: 0.25,
            rlt_rel: 0.15,
            inconsistency_ratio: 3.0,
            risk_stderr: 3.0,
        }
    }
}

/// Knobs specific to some experiment kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    /// Draws from the limit law per comparison batch.
    pub limit_draws: usize,
    /// Independent life cycles to simulate.
    pub target_cycles: usize,
    /// Order statistics used by the Hill estimator; `⌈√n⌉` when absent.
    pub hill_k: Option<usize>,
    /// Level of the duration quantile at which the tail constant is read.
    pub tail_quantile: f64,
    pub loss: Loss,
    /// Radius of the local parameter grid.
    pub risk_c: f64,
    /// Draws used for the limit risk.
    pub risk_draws: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            limit_draws: 2000,
            target_cycles: 5000,
            hill_k: None,
            tail_quantile: 0.99,
            loss: Loss::TruncatedQuadratic { cap: 4.0 },
            risk_c: 2.0,
            risk_draws: 100_000,
        }
    }
}

/// One experiment. `horizons` means the observation horizons for `identity`,
/// `rate` and `risk` (the last one is used by `risk`), the checkpoints along
/// each path for `rlt`, and the per-cycle time cap (last entry) for `tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub spec: ModelSpec,
    pub theta: ParamVector,
    pub horizons: Vec<u64>,
    pub dt: f64,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: ExperimentOptions,
}

impl ExperimentConfig {
    /// A ready-to-run configuration for each kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let sinc = ModelSpec {
            sigma: 1.0,
            basis: DriftBasis::sinc(),
            x0: 0.0,
        };
        let base = Self {
            kind,
            spec: sinc,
            theta: ParamVector::new(0.0, vec![0.3]),
            horizons: vec![50],
            dt: 1e-2,
            replications: 10,
            master_seed: 1,
            window: None,
            output: None,
            tolerances: Tolerances::default(),
            options: ExperimentOptions::default(),
        };
        match kind {
            ExperimentKind::Identity => base,
            ExperimentKind::Rate => Self {
                horizons: vec![1000, 4000],
                replications: 1000,
                window: Some(Window { lo: -2.0, hi: 2.0 }),
                ..base
            },
            ExperimentKind::Tail => Self {
                theta: ParamVector::zeros(1),
                horizons: vec![100_000],
                dt: 1e-3,
                replications: 1,
                ..base
            },
            ExperimentKind::Rlt => Self {
                theta: ParamVector::new(0.0, vec![0.5]),
                horizons: vec![10, 100, 1000, 10_000],
                replications: 50,
                ..base
            },
            ExperimentKind::Risk => Self {
                horizons: vec![2000],
                replications: 500,
                window: Some(Window { lo: -2.0, hi: 2.0 }),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.theta.check_in_domain(&self.spec)?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must not be empty".into()));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) || self.horizons[0] == 0 {
            return Err(Error::Config(
                "horizons must be positive and strictly increasing".into(),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) || self.dt > self.horizons[0] as f64 {
            return Err(Error::Config(format!(
                "dt must be in (0, first horizon], got {}",
                self.dt
            )));
        }
        if let Some(w) = &self.window {
            if !(w.hi > w.lo) {
                return Err(Error::DegenerateWindow { lo: w.lo, hi: w.hi });
            }
            if !w.contains_interior(self.spec.x0) {
                return Err(Error::WindowExcludesStart {
                    x0: self.spec.x0,
                    lo: w.lo,
                    hi: w.hi,
                });
            }
        }
        match self.kind {
            ExperimentKind::Rate if self.horizons.len() < 2 => {
                Err(Error::Config("the rate experiment needs at least two horizons".into()))
            }
            ExperimentKind::Rlt if self.spec.m() == 0 => {
                Err(Error::Config("the ratio limit experiment needs m >= 1".into()))
            }
            ExperimentKind::Tail if self.options.target_cycles < 2 => {
                Err(Error::Config("target_cycles must be at least 2".into()))
            }
            ExperimentKind::Tail if !(self.options.tail_quantile > 0.0 && self.options.tail_quantile < 1.0) => {
                Err(Error::Config("tail_quantile must lie in (0, 1)".into()))
            }
            ExperimentKind::Rate if self.options.limit_draws == 0 => {
                Err(Error::Config("limit_draws must be at least 1".into()))
            }
            ExperimentKind::Risk if self.options.risk_draws < 2 || !(self.options.risk_c >= 0.0) => {
                Err(Error::Config("risk needs risk_draws >= 2 and risk_c >= 0".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Stream tags separating the experiments' random streams.
mod tags {
    pub const IDENTITY: u64 = 1;
    pub const RATE: u64 = 2;
    pub const LIMIT: u64 = 3;
    pub const TAIL: u64 = 4;
    pub const RLT: u64 = 5;
    pub const RISK: u64 = 6;
}

/// Validates `config` and runs the experiment it names.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let mut report = match config.kind {
        ExperimentKind::Identity => run_identity_suite(config)?,
        ExperimentKind::Rate => run_rate_experiment(config)?,
        ExperimentKind::Tail => run_tail_experiment(config)?,
        ExperimentKind::Rlt => run_rlt_experiment(config)?,
        ExperimentKind::Risk => run_risk_experiment(config)?,
    };
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
