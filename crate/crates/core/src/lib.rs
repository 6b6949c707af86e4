//! Contextual dynamic-pricing simulation laboratory.
//!
//! A seller repeatedly posts a take-it-or-leave-it price for a product
//! described by a context vector; the buyer's hidden valuation is an unknown
//! function of the context plus bounded noise, and the only feedback is the
//! binary sale indicator. This crate provides:
//!
//! - [`env`](mod@env) — simulated markets with exact expected-revenue and
//!   optimal-price oracles for regret accounting;
//! - [`pricing`] — the shared price-elimination machinery: increment grid,
//!   cross-context demand table, reward confidence bounds, survivor sets;
//! - [`linear`] — the VAPE algorithm for linear valuations (ridge-based
//!   valuation approximation gated by an elliptical norm test);
//! - [`nonparam`] — the VAPE algorithm for Hölder-continuous valuations
//!   (covering-based per-cell estimation with a fixed budget per cell);
//! - [`baselines`] — an explore-then-commit baseline for comparison;
//! - [`harness`] — seeded experiment runner, log-log slope fitting and CSV
//!   output;
//! - [`selftest`] — runtime statistical checks exposed to the CLI.

pub mod baselines;
pub mod env;
pub mod harness;
pub mod linalg;
pub mod linear;
pub mod nonparam;
pub mod pricing;
pub mod seed;
pub mod selftest;
pub mod trace;

pub use env::{ContextStream, EnvConfig, EnvError, MarketEnv, NoiseSpec, ValuationModel};
pub use harness::{Algorithm, ExperimentSpec, HarnessError, SummaryRecord};
pub use linear::LinearVapeConfig;
pub use nonparam::NonparamConfig;
pub use pricing::{ConfidenceParams, DemandTable, IncrementGrid, PricingError};
pub use trace::{RoundRecord, RunTrace};
