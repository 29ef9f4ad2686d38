//! Stochastic Runge–Kutta schemes of strong order one for Stratonovich SDEs
//! with scalar multiplicative or additive noise, their explicit appurtenant
//! companions, the limit equations of the normalized error, and a Monte Carlo
//! harness for convergence studies.

pub mod experiments;
pub mod integrators;
pub mod limitsde;
pub mod noise;
pub mod problem;
pub mod state;
pub mod tableau;

pub use state::State;
