//! Martingale classification of generalized stochastic exponentials of
//! one-dimensional diffusions, with a Monte Carlo cross-check.
//!
//! Given `dY = μ(Y) dt + σ(Y) dW` on an interval `J` and a function `b`, the
//! process `Z = exp(∫ b(Y) dW − ½ ∫ b²(Y) dt)`, continued by zero once `Y`
//! reaches a point where `b²/σ²` fails to be locally integrable, is decided
//! to be one of: not a local martingale, a strict local martingale, a true
//! martingale, or a uniformly integrable martingale.

pub mod classify;
pub mod expr;
pub mod mc;
pub mod quad;
pub mod scalar;

pub use expr::{parse, Expr, Side};
pub use scalar::{ExtendedReal, Scalar};

/// Extended real line over `f64`.
pub type Extended = ExtendedReal<f64>;
