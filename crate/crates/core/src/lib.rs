//! Locally differentially private quantile estimation over a discrete domain `[B]`.
//!
//! Every user holds one value in `{1, ..., B}`. The aggregator wants an index
//! `m` whose empirical CDF bracket `[F(m), F(m+1)]` intersects `(q - α, q + α)`
//! while each user's single one-bit report satisfies ε-local differential
//! privacy (or (ε, δ)-shuffle DP). The crate provides:
//!
//! - [`rr`]: binary randomized response, its unbiased inverse, and
//!   Bernstein-style sample-complexity calculators.
//! - [`oracle`]: one-flip-per-user coin oracles (empirical without-replacement,
//!   statistical i.i.d., scripted adversarial) plus the permutation-drift
//!   measurement used to justify treating a shrinking population as a fixed one.
//! - [`naive`]: noisy binary search with batched private estimates per pivot.
//! - [`bayess`]: the adaptive Bayesian screening search (posterior weights over
//!   coin intervals, capacity-optimal query quantile, γ-quantile reduction).
//! - [`hier`]: the non-adaptive b-ary interval-tree baseline with unary-encoding
//!   randomized response per level.
//! - [`shuffle`]: amplification-by-shuffling budget calculator and the
//!   log₂(B)-round shuffled binary search.
//! - [`harness`] / [`datagen`]: reproducible experiment runner with CSV output.
//!
//! Accuracy metrics (`empirical_cdf`, good-coin checks, quantile error) are
//! computed in exact integer arithmetic; only the protocols themselves use
//! floating point.

pub mod bayess;
pub mod dataset;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod hier;
pub mod metrics;
pub mod naive;
pub mod oracle;
pub mod quantile;
pub mod rational;
pub mod rng;
pub mod rr;
pub mod shuffle;
pub mod weights;

pub use dataset::{bucketize, Dataset, QuantileSpec};
pub use error::{Error, Result};
pub use metrics::{evaluate_trial, is_good_coin, true_median_coin, CoinResult, Protocol};
pub use rational::Rational;
pub use rr::RRChannel;
