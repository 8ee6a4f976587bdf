//! Oriented Bernoulli percolation on supercritical causal triangulations.
//!
//! The crate covers the half-plane model and the cone model, the peeling
//! exploration of a cluster with its height random walk, exact analytic
//! constants, and reproducible Monte Carlo estimators.

pub mod cone;
pub mod error;
pub mod estimators;
pub mod gw;
pub mod halfplane;
pub mod keyed;
pub mod model;
pub mod peeling;

pub use error::{BudgetExceeded, BudgetKind, ParamError};
pub use model::{AnalyticConstants, ModelParams};
