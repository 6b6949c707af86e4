//! Explore-then-commit baseline.
//!
//! A two-phase strawman: a fixed-length exploration phase estimates the
//! valuation parameter (ridge, uniform prices) and the demand over an
//! increment grid (round-robin at the current estimate), then a commit
//! phase prices greedily against those frozen estimates and never learns
//! again. Phase lengths are set up-front, which is exactly the weakness the
//! two-phase adversarial stream targets: contexts seen only after the
//! boundary get no estimate at all.

use crate::env::{MarketEnv, RegretOracle};
use crate::linear::RidgeState;
use crate::pricing::{DemandTable, IncrementGrid};
use crate::trace::{RoundRecord, RunError, RunTrace, REGRET_SLACK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Schedule of the explore-then-commit baseline: a demand grid of
/// `grid_size ≈ T^(1/4)` nominal increments at `precision = 1/grid_size`,
/// explored for `⌈precision⁻² · grid_size⌉ = grid_size³` rounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EtcConfig {
    pub horizon: u64,
    pub exploration_length: u64,
    pub grid_size: u64,
    pub precision: f64,
}

impl EtcConfig {
    pub fn from_horizon(horizon: u64) -> Self {
        let grid_size = ((horizon as f64).powf(0.25).round() as u64).max(1);
        // precision^-2 * grid_size = grid_size^3 exactly, computed in
        // integers to dodge the float ceil of 1/grid_size roundoff.
        let exploration_length = grid_size.pow(3);
        Self {
            horizon,
            exploration_length,
            grid_size,
            precision: 1.0 / grid_size as f64,
        }
    }
}

/// Run the baseline. Phase 1 alternates valuation rounds (odd: uniform
/// price, ridge update) and demand rounds (even: current estimate plus the
/// next grid increment, round-robin). Phase 2 posts
/// `argmax_k (ĝ + δ_k) D̂_k` over the active set with no further updates.
pub fn etc_run(env: &MarketEnv, config: &EtcConfig, seed: u64) -> Result<RunTrace, RunError> {
    if !env.valuation().is_linear() {
        return Err(RunError::InvalidConfig(
            "explore-then-commit requires a linear-valuation market".into(),
        ));
    }
    let b_y = env.b_y();
    let b_g = env.valuation().b_g();
    let grid = IncrementGrid::build(config.precision, b_y)?;
    let mut table = DemandTable::new(&grid);
    let mut ridge = RidgeState::new(env.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = RegretOracle::new(env);
    let mut trace = RunTrace::with_capacity(config.horizon as usize);
    // round-robin cursor over the full grid, smallest increment first
    let mut cursor: i64 = -grid.k_max();

    for t in 1..=config.horizon {
        let x = env.next_context(t, &mut rng);
        let exploring = t <= config.exploration_length;
        let (price, increment) = if exploring {
            if t % 2 == 1 {
                (rng.random_range(-b_y..=b_y), None)
            } else {
                let k = cursor;
                cursor = if cursor == grid.k_max() {
                    -grid.k_max()
                } else {
                    cursor + 1
                };
                let g_hat = ridge.predict(&x).clamp(-b_g, b_g);
                (g_hat + grid.increment(k), Some(k))
            }
        } else {
            let g_hat = ridge.predict(&x).clamp(-b_g, b_g);
            let active = grid.active_set(g_hat)?;
            let mut best_k = active[0];
            let mut best_v = f64::NEG_INFINITY;
            for &k in &active {
                let v = (g_hat + grid.increment(k)) * table.mean(k);
                if v > best_v {
                    best_v = v;
                    best_k = k;
                }
            }
            (g_hat + grid.increment(best_k), Some(best_k))
        };

        let sold = env.step(&x, price, &mut rng);
        if exploring {
            match increment {
                None => ridge.explore_update(&x, sold, b_y)?,
                Some(k) => table.update(k, sold),
            }
        }

        let regret = oracle.instant_regret(&x, price);
        if regret < -REGRET_SLACK {
            return Err(RunError::NegativeRegret { round: t, regret });
        }
        trace.push(RoundRecord {
            exploring,
            price,
            increment,
            regret,
        });
    }
    Ok(trace)
}
