//! American call option pricing with classical methods and modular neural
//! networks.
//!
//! - [`pricing`]: Black-Scholes, CRR binomial lattice, Barone-Adesi-Whaley.
//! - [`data`]: option-chain and market CSV ingestion, derived market series,
//!   and a seeded synthetic dataset generator.
//! - [`features`]: the engineered feature columns, their six-module
//!   partition, min-max scaling and chronological splitting.
//! - [`nn`]: a small dense-network engine (forward, backprop, Adam, training).
//! - [`zoo`]: builders for the six-branch modular network and the benchmark
//!   feed-forward network.
//! - [`tuning`]: random/grid/greedy hyper-parameter search.
//! - [`eval`]: RMSE / nRMSE and the four-model comparison report.

// `!(x > 0.0)` is used on purpose so NaN fails the guard too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod eval;
pub mod features;
pub mod nn;
pub mod zoo;
pub mod pricing;
pub mod tuning;
