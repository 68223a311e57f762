//! Optimal-execution lab.
//!
//! Simulates Almgren-Chriss markets whose permanent and temporary impact coefficients are
//! constant, linear in time, or follow correlated square-root mean-reverting processes;
//! trains a Double Deep Q-Learning liquidation agent on them; and compares it against
//! TWAP, the expected-cost-optimal static schedule, and a perturbative stochastic-impact
//! policy.

pub mod ddql;
pub mod error;
pub mod harness;
pub mod market_sim;
pub mod neural;
pub mod strategies;

pub use error::{Error, Result};
