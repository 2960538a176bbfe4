//! Physics-informed neural networks for open-quantum-system control.
//!
//! A sine-activated network jointly represents the state trajectory and the
//! control field of a dynamical system `ẋ = A(λ, u(t)) x`. Training minimises
//! the ODE residual plus target and constraint penalties; the discovered
//! control is then checked with an independent RK4 integration and compared
//! against analytic pulse protocols.

pub mod baselines;
pub mod config;
pub mod error;
pub mod io;
pub mod loss;
pub mod neural;
pub mod systems;
pub mod trainer;
pub mod validator;

pub use error::{Error, Result};
