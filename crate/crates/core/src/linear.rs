//! VAPE for linear valuations.
//!
//! The valuation estimate is a ridge regression on the binary feedback:
//! under a uniform price on `[-b_y, b_y]`, `2 b_y (o - 1/2)` is an unbiased
//! estimate of `g(x) = xᵀθ`, so exploration rounds feed an ordinary ridge
//! design. A round explores exactly when the elliptical norm `||x||_{V⁻¹}`
//! of the incoming context exceeds the threshold `mu`; otherwise the round
//! runs price elimination against the shared demand table. The schedule
//! `(epsilon, mu, alpha)` is derived from the horizon so that the estimate
//! is `epsilon`-accurate whenever elimination runs, while the elliptical
//! potential argument caps the number of exploration rounds at
//! `d ln((T+d)/d) / mu²`.

use crate::env::{MarketEnv, RegretOracle};
use crate::linalg::{self, LinalgError, SquareMatrix};
use crate::pricing::{
    select_increment, ConfidenceParams, DemandTable, IncrementGrid, RewardBounds,
};
use crate::trace::{RoundRecord, RunError, RunTrace, REGRET_SLACK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Problem constants the linear learner is given.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearBounds {
    pub b_x: f64,
    pub b_theta: f64,
    pub b_xi: f64,
    pub b_y: f64,
    pub l_xi: f64,
}

impl LinearBounds {
    pub fn from_env(env: &MarketEnv, b_theta: f64) -> Self {
        Self {
            b_x: env.contexts().b_x(),
            b_theta,
            b_xi: env.noise().b_xi(),
            b_y: env.b_y(),
            l_xi: env.noise().l_xi(),
        }
    }

    /// Bound on `|g(x)|`.
    pub fn b_g(&self) -> f64 {
        self.b_x * self.b_theta
    }

    fn validate(&self) -> Result<(), RunError> {
        for (name, v) in [
            ("b_x", self.b_x),
            ("b_theta", self.b_theta),
            ("b_xi", self.b_xi),
            ("b_y", self.b_y),
            ("l_xi", self.l_xi),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(RunError::InvalidConfig(format!(
                    "bound {name} must be positive and finite, got {v}"
                )));
            }
        }
        if (self.b_y - (self.b_x * self.b_theta + self.b_xi)).abs() > 1e-9 {
            return Err(RunError::InvalidConfig(format!(
                "b_y = {} must equal b_x * b_theta + b_xi = {}",
                self.b_y,
                self.b_x * self.b_theta + self.b_xi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearVapeConfig {
    pub horizon: u64,
    pub dim: usize,
    pub epsilon: f64,
    pub mu: f64,
    pub alpha: f64,
    pub bounds: LinearBounds,
}

impl LinearVapeConfig {
    pub fn new(
        horizon: u64,
        dim: usize,
        epsilon: f64,
        mu: f64,
        alpha: f64,
        bounds: LinearBounds,
    ) -> Result<Self, RunError> {
        bounds.validate()?;
        if dim == 0 {
            return Err(RunError::InvalidConfig("dimension must be >= 1".into()));
        }
        for (name, v) in [("epsilon", epsilon), ("mu", mu)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(RunError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(RunError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            horizon,
            dim,
            epsilon,
            mu,
            alpha,
            bounds,
        })
    }

    /// Horizon-tuned schedule: `epsilon = (d² ln(T)² / T)^(1/3)`,
    /// `alpha = T⁻⁴`, and
    /// `mu = epsilon / (b_y √(d ln((1 + b_x² T)/alpha)) + b_theta)`.
    pub fn from_horizon(horizon: u64, dim: usize, bounds: LinearBounds) -> Result<Self, RunError> {
        if horizon < 2 {
            return Err(RunError::InvalidConfig(format!(
                "horizon must be >= 2 for the schedule, got {horizon}"
            )));
        }
        let t = horizon as f64;
        let d = dim as f64;
        let epsilon = (d * d * t.ln().powi(2) / t).cbrt();
        let alpha = t.powi(-4);
        let log_term = ((1.0 + bounds.b_x * bounds.b_x * t) / alpha).ln();
        let mu = epsilon / (bounds.b_y * (d * log_term).sqrt() + bounds.b_theta);
        Self::new(horizon, dim, epsilon, mu, alpha, bounds)
    }

    /// Upper bound on exploration rounds: `d ln((T+d)/d) / mu²`.
    pub fn exploration_budget(&self) -> f64 {
        let t = self.horizon as f64;
        let d = self.dim as f64;
        d * ((t + d) / d).ln() / (self.mu * self.mu)
    }
}

/// Ridge regression state over the exploration rounds.
#[derive(Debug, Clone)]
pub struct RidgeState {
    v: SquareMatrix,
    b: Vec<f64>,
    theta_hat: Vec<f64>,
    exploration_count: u64,
}

impl RidgeState {
    pub fn new(dim: usize) -> Self {
        Self {
            v: SquareMatrix::identity(dim),
            b: vec![0.0; dim],
            theta_hat: vec![0.0; dim],
            exploration_count: 0,
        }
    }

    pub fn design(&self) -> &SquareMatrix {
        &self.v
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn exploration_count(&self) -> u64 {
        self.exploration_count
    }

    /// `||x||_{V⁻¹} = √(xᵀ V⁻¹ x)` via a symmetric solve; `V` stays
    /// positive-definite by the `+I` initialization, so failure here is an
    /// internal error.
    pub fn elliptical_norm(&self, x: &[f64]) -> Result<f64, LinalgError> {
        Ok(self.v.cholesky()?.inv_quad_form(x).max(0.0).sqrt())
    }

    /// Exploration-round update: `V += x xᵀ`, `b += 2 b_y (o - 1/2) x`,
    /// then `theta_hat` is recomputed by a fresh solve.
    pub fn explore_update(&mut self, x: &[f64], sold: bool, b_y: f64) -> Result<(), LinalgError> {
        let y = 2.0 * b_y * (if sold { 1.0 } else { 0.0 } - 0.5);
        self.v.add_outer(x);
        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += y * xi;
        }
        self.theta_hat = self.v.solve_spd(&self.b)?;
        self.exploration_count += 1;
        Ok(())
    }

    /// Valuation estimate `xᵀ theta_hat` (unclamped).
    pub fn predict(&self, x: &[f64]) -> f64 {
        linalg::dot(&self.theta_hat, x)
    }

    /// Residual `max_i |(V theta_hat - b)_i|` of the ridge identity.
    pub fn identity_residual(&self) -> f64 {
        self.v
            .mul_vec(&self.theta_hat)
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One round's decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub price: f64,
    pub exploring: bool,
    pub increment: Option<i64>,
}

/// The linear-valuation learner: ridge state plus the shared elimination
/// machinery. One instance per run.
pub struct LinearVape {
    config: LinearVapeConfig,
    grid: IncrementGrid,
    table: DemandTable,
    params: ConfidenceParams,
    ridge: RidgeState,
}

impl LinearVape {
    pub fn new(config: LinearVapeConfig) -> Result<Self, RunError> {
        let grid = IncrementGrid::build(config.epsilon, config.bounds.b_y)?;
        let table = DemandTable::new(&grid);
        let params = ConfidenceParams::new(
            config.alpha,
            config.bounds.l_xi,
            config.epsilon,
            config.bounds.b_y,
        )?;
        let ridge = RidgeState::new(config.dim);
        Ok(Self {
            config,
            grid,
            table,
            params,
            ridge,
        })
    }

    pub fn config(&self) -> &LinearVapeConfig {
        &self.config
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn table(&self) -> &DemandTable {
        &self.table
    }

    pub fn grid(&self) -> &IncrementGrid {
        &self.grid
    }

    /// Decide the round's price. Exploration posts a uniform price (one RNG
    /// draw); elimination prices the least-played surviving increment at the
    /// clamped estimate.
    pub fn act<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Decision, RunError> {
        let norm = self.ridge.elliptical_norm(x)?;
        if norm > self.config.mu {
            let b_y = self.config.bounds.b_y;
            return Ok(Decision {
                price: rng.random_range(-b_y..=b_y),
                exploring: true,
                increment: None,
            });
        }
        let b_g = self.config.bounds.b_g();
        let g_hat = self.ridge.predict(x).clamp(-b_g, b_g);
        let active = self.grid.active_set(g_hat)?;
        let bounds = RewardBounds::compute(&self.table, &active, g_hat, &self.params);
        let surviving = bounds.surviving_set();
        let k = select_increment(&surviving, &self.table);
        Ok(Decision {
            price: g_hat + self.grid.increment(k),
            exploring: false,
            increment: Some(k),
        })
    }

    /// Record the sale outcome for a decision made this round.
    pub fn observe(&mut self, x: &[f64], decision: &Decision, sold: bool) -> Result<(), RunError> {
        if decision.exploring {
            self.ridge.explore_update(x, sold, self.config.bounds.b_y)?;
        } else if let Some(k) = decision.increment {
            self.table.update(k, sold);
        }
        Ok(())
    }
}

/// Execute a full seeded run against the market, recording the expected
/// instantaneous regret of every round. Verifies the exploration budget at
/// termination; a violation signals an implementation bug.
pub fn run(env: &MarketEnv, config: &LinearVapeConfig, seed: u64) -> Result<RunTrace, RunError> {
    if !env.valuation().is_linear() {
        return Err(RunError::InvalidConfig(
            "the linear learner requires a linear-valuation market".into(),
        ));
    }
    let mut learner = LinearVape::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = RegretOracle::new(env);
    let mut trace = RunTrace::with_capacity(config.horizon as usize);

    for t in 1..=config.horizon {
        let x = env.next_context(t, &mut rng);
        let decision = learner.act(&x, &mut rng)?;
        let sold = env.step(&x, decision.price, &mut rng);
        learner.observe(&x, &decision, sold)?;
        let regret = oracle.instant_regret(&x, decision.price);
        if regret < -REGRET_SLACK {
            return Err(RunError::NegativeRegret { round: t, regret });
        }
        trace.push(RoundRecord {
            exploring: decision.exploring,
            price: decision.price,
            increment: decision.increment,
            regret,
        });
    }

    let budget = config.exploration_budget();
    if (trace.exploration_count as f64) > budget {
        return Err(RunError::ExplorationBudgetExceeded {
            count: trace.exploration_count,
            bound: budget,
        });
    }
    Ok(trace)
}
