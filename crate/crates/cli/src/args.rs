use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nullrec_core::model::{DriftBasis, ModelSpec, ParamVector, Window};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "nullrec",
    version,
    about = "Simulation, estimation and limit laws for null recurrent diffusions"
)]
pub struct Cli {
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the asymptotic constants of a model as JSON.
    Constants(ConstantsArgs),
    /// Simulate one Euler path and write it as CSV (or its statistics as JSON).
    Simulate(SimulateArgs),
    /// Estimate the drift parameters from a path file or a fresh simulation.
    Estimate(EstimateArgs),
    /// Sample the limit law, or estimate its risk under a bounded loss.
    Limits(LimitsArgs),
    /// Run a Monte Carlo experiment from a JSON config and flag overrides.
    Experiment(ExperimentArgs),
    /// Fast self-test: identity suite and sampler calibrations.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Diffusion coefficient.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Secondary drift basis: none, sinc or fourier-<l>.
    #[arg(long, default_value = "none")]
    pub basis: String,
    /// Coefficient of x/(1+x²); must lie in (-σ²/2, σ²/2).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta1: f64,
    /// Comma separated secondary coefficients (zeros when omitted).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta2: Option<Vec<f64>>,
    /// Starting point.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
}

impl ModelArgs {
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CliError::flag(
                "--sigma",
                format!("must be positive and finite, got {}", self.sigma),
            ));
        }
        if !self.x0.is_finite() {
            return Err(CliError::flag("--x0", "must be finite"));
        }
        let basis = DriftBasis::from_name(&self.basis).map_err(|e| CliError::flag("--basis", e.to_string()))?;
        Ok(ModelSpec::new(self.sigma, basis, self.x0)?)
    }

    /// The parameter, checked against the model's dimension and `Θ₁`.
    pub fn theta(&self, spec: &ModelSpec) -> Result<ParamVector, CliError> {
        let theta2 = self.theta2.clone().unwrap_or_else(|| vec![0.0; spec.m()]);
        if theta2.len() != spec.m() {
            return Err(CliError::flag(
                "--theta2",
                format!(
                    "basis `{}` needs {} values, got {}",
                    spec.basis.name(),
                    spec.m(),
                    theta2.len()
                ),
            ));
        }
        if theta2.iter().any(|v| !v.is_finite()) {
            return Err(CliError::flag("--theta2", "values must be finite"));
        }
        let (lo, hi) = spec.theta1_range();
        if !(self.theta1 > lo && self.theta1 < hi) {
            return Err(CliError::flag(
                "--theta1",
                format!(
                    "{} is outside the null recurrent range ({lo}, {hi}) for --sigma {}",
                    self.theta1, spec.sigma
                ),
            ));
        }
        Ok(ParamVector::new(self.theta1, theta2))
    }
}

/// Parses `lo,hi`.
pub fn parse_window(flag: &str, text: &str) -> Result<Window, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bound = |s: &str| -> Result<f64, CliError> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::flag(flag, format!("bad bound `{s}`")))
    };
    if parts.len() != 2 {
        return Err(CliError::flag(flag, format!("expected `lo,hi`, got `{text}`")));
    }
    Window::new(bound(parts[0])?, bound(parts[1])?).map_err(|e| CliError::flag(flag, e.to_string()))
}

pub fn positive(flag: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::flag(flag, format!("must be positive and finite, got {v}")))
    }
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also report the norming constants at this horizon.
    #[arg(long)]
    pub n: Option<u64>,
    /// Also report the moment matrix over the window `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV file for the path (`t,x`); stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Print the sufficient statistics as JSON instead of the path.
    #[arg(long)]
    pub stats: bool,
    /// Window `lo,hi` for the statistics.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// CSV path file with columns `t,x`; simulated under the model flags when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Horizon of the simulated path.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Step of the simulated path; inferred from the file otherwise.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Window `lo,hi` for the restricted estimator.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct LimitsArgs {
    /// Stable index in (0, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Dimension of the law when no covariance is given (identity).
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// JSON file holding the covariance as an array of rows.
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Use `α(ϑ)` and the rescaled information of this model.
    #[arg(long)]
    pub from_model: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of draws.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimate the risk `E ℓ(Z)` instead of printing draws.
    #[arg(long)]
    pub risk: bool,
    /// truncated-quadratic[:cap], exp-quadratic or constant[:value].
    #[arg(long, default_value = "truncated-quadratic:4")]
    pub loss: String,
    /// CSV file for the draws; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment config; defaults for --kind when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// identity, rate, tail, rlt or risk.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma separated horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<u64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta1: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta2: Option<Vec<f64>>,
    /// Window `lo,hi`, or `none` to drop it.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Report stem; writes `<stem>.json` and `<stem>.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Tolerance override `name=value` (repeatable).
    #[arg(long = "tolerance", value_name = "NAME=VALUE")]
    pub tolerances: Vec<String>,
    /// Option override `name=value` (repeatable), e.g. `target_cycles=20000`.
    #[arg(long = "option", value_name = "NAME=VALUE")]
    pub options: Vec<String>,
    /// Print the merged config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}
