//! Exact-arithmetic engine for rank-one transformations built by cutting and
//! stacking.
//!
//! The crate is organised bottom-up:
//!
//! - [`tower`]: schedules, tower geometry, level sets and interval-bounded
//!   correlations `μ(A ∩ TⁿB)`.
//! - [`product`]: cyclic factors, the skew product `F(T,p)`, finite cyclic
//!   approximations and permutation root tests.
//! - [`analyzer`]: rigidity and weak-limit scans over a generated schedule.
//! - [`poisson`]: Monte-Carlo simulation of the Poisson suspension over a
//!   finite window, checked against the exact engine.
//! - [`cli`]: config-driven entry point used by the `rankone` binary.

pub mod analyzer;
pub mod cli;
pub mod error;
pub mod poisson;
pub mod product;
pub mod rational;
pub mod tower;

pub use error::{Error, Result};
pub use rational::Rational;
