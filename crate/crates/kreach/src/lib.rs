//! Time-bounded safety verification for high-dimensional affine dynamics
//! ẋ = Ax + b. The verifier simulates the projected matrix exponential
//! C·e^{Aδj}·E column-by-column — densely, by adaptive Runge–Kutta, or by
//! Krylov iterations with certified a posteriori error bounds — and decides
//! each time step with a linear program over the initial set and the unsafe
//! set. Counter-examples are concrete initial points, re-validated by an
//! independent integrator.

pub mod benchgen;
pub mod cli;
pub mod dense;
pub mod error;
pub mod krylov;
pub mod lp;
pub mod model;
pub mod sim;
pub mod verifier;

pub use error::{Error, Result};
