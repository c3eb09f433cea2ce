//! Simulation, estimation and limit-law checks for the null recurrent
//! diffusion `dξ = (ϑ₁ f₁ + Σ ϑ₂,ν f₂,ν)(ξ) dt + σ dW` with `f₁(x) = x/(1+x²)`.

pub mod error;
pub mod estimate;
pub mod harness;
pub mod limits;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
