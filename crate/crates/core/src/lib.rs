//! Physics-informed networks for sinusoidal ODE benchmarks, with the tools to
//! watch spectral bias happen: batched derivative jets through an MLP, residual
//! losses and their exact gradients, Adam training with convergence detection,
//! frequency amplitudes by direct DFT, and the empirical neural tangent kernel.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision types the experiments use.

pub mod error;
pub mod loss;
pub mod net;
pub mod ntk;
pub mod problems;
pub mod scalar;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision network parameters.
pub type ParamVector = net::Params<f64>;
/// Double-precision value-plus-three-derivatives jet.
pub type Jet3 = net::Jet<f64>;
/// Double-precision benchmark problem.
pub type Benchmark = problems::Problem<f64>;
