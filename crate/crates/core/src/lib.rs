//! Adaptive multi-period mean-variance engine.
//!
//! The crate solves for the equilibrium allocation of a dynamic mean-variance
//! investor whose risk aversion follows a stochastic process, in a market whose
//! return moments switch with an observable Markov regime. Around the solver sit
//! the personalization measures, closed-form Sharpe analytics for regime-cycle
//! strategies, and a seeded Monte Carlo wealth simulator.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cycle_analytics;
pub mod error;
pub mod market;
pub mod montecarlo;
pub mod numeric;
pub mod personalization;
pub mod quadrature;
pub mod risk_profile;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use market::MarketParams;
pub use risk_profile::RiskProfileParams;
