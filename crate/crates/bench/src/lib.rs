//! Shared fixtures for the benchmarks.

use vape_core::env::{ContextStream, MarketEnv, NoiseSpec, ValuationModel};
use vape_core::linear::{LinearBounds, LinearVapeConfig};
use vape_core::nonparam::{NonparamBounds, NonparamConfig};

/// Three-context linear market with truncated-Gaussian noise, matching the
/// stochastic experiment's constants.
pub fn linear_market() -> MarketEnv {
    let noise = NoiseSpec::truncated_gaussian(0.0, 0.1, -1.0, 1.0).unwrap();
    let valuation = ValuationModel::linear(vec![0.48, 0.6, -0.64], 1.0, 1.0).unwrap();
    let contexts = ContextStream::finite_pool(vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.8, 0.6],
        vec![-0.6, 0.0, 0.8],
    ])
    .unwrap();
    MarketEnv::new(noise, valuation, contexts).unwrap()
}

pub fn linear_config(horizon: u64) -> LinearVapeConfig {
    let env = linear_market();
    LinearVapeConfig::from_horizon(horizon, env.dim(), LinearBounds::from_env(&env, 1.0)).unwrap()
}

/// One-dimensional market for the non-parametric learner.
pub fn line_market() -> MarketEnv {
    let noise = NoiseSpec::uniform(-1.0, 1.0).unwrap();
    let valuation = ValuationModel::linear(vec![1.0], 1.0, 1.0).unwrap();
    let contexts =
        ContextStream::finite_pool(vec![vec![-0.7], vec![-0.1], vec![0.5], vec![0.9]]).unwrap();
    MarketEnv::new(noise, valuation, contexts).unwrap()
}

/// Desk-scale non-parametric schedule whose estimation budget completes
/// within short horizons.
pub fn line_config(horizon: u64) -> NonparamConfig {
    let env = line_market();
    NonparamConfig::new(
        horizon,
        1,
        1.0,
        1.0,
        0.25,
        60.0,
        0.01,
        NonparamBounds::from_env(&env),
    )
    .unwrap()
}
