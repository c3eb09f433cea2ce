use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("theta1 = {theta1} is outside the null-recurrent range (-{half}, {half}) for sigma = {sigma}", half = sigma * sigma / 2.0)]
    ParameterDomain { theta1: f64, sigma: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown basis `{0}` (expected `none`, `sinc` or `fourier-<l>`)")]
    UnknownBasis(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimated error {abserr:e}")]
    Quadrature { lo: f64, hi: f64, abserr: f64 },

    #[error("window [{lo}, {hi}] has empty interior")]
    DegenerateWindow { lo: f64, hi: f64 },

    #[error("starting point {x0} is not an interior point of window [{lo}, {hi}]")]
    WindowExcludesStart { x0: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("simulation diverged at step {step} (state {state})")]
    SimulationDiverged { step: u64, state: f64 },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
