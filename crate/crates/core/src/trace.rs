//! Per-run traces and the shared run error type.

use crate::linalg::LinalgError;
use crate::pricing::PricingError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Failures while configuring or executing a run.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("exploration budget violated: {count} exploration rounds exceed the bound {bound:.3}")]
    ExplorationBudgetExceeded { count: u64, bound: f64 },
    #[error("covering would need {required} centers, exceeding the cap of {cap}")]
    CoveringTooLarge { required: String, cap: u64 },
    #[error("round {round}: expected regret {regret:.3e} is below the oracle slack")]
    NegativeRegret { round: u64, regret: f64 },
}

/// Tolerance for per-round regret non-negativity: the optimal-price oracle
/// resolves the maximum to well below this slack.
pub const REGRET_SLACK: f64 = 1e-9;

/// One round of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Phase flag: true while approximating the valuation, false while
    /// eliminating prices.
    pub exploring: bool,
    /// Posted price.
    pub price: f64,
    /// Chosen grid increment, when the round eliminated.
    pub increment: Option<i64>,
    /// Expected instantaneous regret against the env oracle.
    pub regret: f64,
}

/// Full per-round record of one run plus its summary statistics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub rounds: Vec<RoundRecord>,
    /// Rounds spent approximating the valuation.
    pub exploration_count: u64,
    /// Sum of the per-round regrets.
    pub cumulative_regret: f64,
}

impl RunTrace {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            rounds: Vec::with_capacity(n),
            exploration_count: 0,
            cumulative_regret: 0.0,
        }
    }

    pub fn push(&mut self, record: RoundRecord) {
        if record.exploring {
            self.exploration_count += 1;
        }
        self.cumulative_regret += record.regret;
        self.rounds.push(record);
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Cumulative regret of the first `t` rounds.
    pub fn regret_prefix(&self, t: usize) -> f64 {
        self.rounds.iter().take(t).map(|r| r.regret).sum()
    }
}
