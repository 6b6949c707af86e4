//! VAPE for non-parametric (Hölder-continuous) valuations.
//!
//! Contexts are rounded to the nearest center of a covering of the context
//! ball, and the valuation is estimated per center: the first `⌈tau⌉`
//! visits of a cell post uniform prices and average the unbiased estimates
//! `2 b_y (o - 1/2)`; afterwards the cell's estimate feeds the same shared
//! price-elimination machinery as the linear learner. The covering radius
//! `(epsilon / 3 l_g)^(1/beta)` makes the rounding error at most
//! `epsilon / 3`, and `tau` makes the per-cell estimation error at most
//! `2 epsilon / 3` with high probability, so elimination always runs
//! against an `epsilon`-accurate estimate.

use crate::env::{MarketEnv, RegretOracle};
use crate::linalg;
use crate::pricing::{
    select_increment, ConfidenceParams, DemandTable, IncrementGrid, RewardBounds,
};
use crate::trace::{RoundRecord, RunError, RunTrace, REGRET_SLACK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default cap on covering cardinality; configurations requiring more
/// centers are rejected with the required count.
pub const DEFAULT_CENTER_CAP: u64 = 10_000_000;

/// A finite set of centers such that every admissible context is within
/// `radius` of some center. Built as an axis-aligned lattice with spacing
/// `2 radius / sqrt(d)` (cell half-diagonal = radius), keeping points
/// within `b_x + radius` of the origin. A true minimal covering is NP-hard;
/// the lattice count stays under the `(2 b_x / radius + 1)^d` bound the
/// analysis uses.
#[derive(Debug, Clone)]
pub struct Covering {
    centers: Vec<Vec<f64>>,
    radius: f64,
    b_x: f64,
}

impl Covering {
    pub fn build(b_x: f64, dim: usize, radius: f64) -> Result<Self, RunError> {
        Self::build_with_cap(b_x, dim, radius, DEFAULT_CENTER_CAP)
    }

    pub fn build_with_cap(b_x: f64, dim: usize, radius: f64, cap: u64) -> Result<Self, RunError> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(RunError::InvalidConfig(format!(
                "covering radius must be positive, got {radius}"
            )));
        }
        if dim == 0 || !b_x.is_finite() || b_x <= 0.0 {
            return Err(RunError::InvalidConfig(format!(
                "covering needs dim >= 1 and b_x > 0, got dim {dim}, b_x {b_x}"
            )));
        }
        let spacing = 2.0 * radius / (dim as f64).sqrt();
        let j_max = (b_x / spacing).ceil() as i64;
        let per_axis = 2 * j_max as u64 + 1;
        let required = (0..dim).try_fold(1u64, |acc, _| acc.checked_mul(per_axis));
        match required {
            Some(n) if n <= cap => {}
            _ => {
                return Err(RunError::CoveringTooLarge {
                    required: required
                        .map(|n| n.to_string())
                        .unwrap_or_else(|| format!("more than {}", u64::MAX)),
                    cap,
                });
            }
        }

        let keep_within = b_x + radius;
        let mut centers = Vec::new();
        let mut index = vec![-j_max; dim];
        'outer: loop {
            let c: Vec<f64> = index.iter().map(|&j| j as f64 * spacing).collect();
            if linalg::norm(&c) <= keep_within {
                centers.push(c);
            }
            for axis in (0..dim).rev() {
                if index[axis] < j_max {
                    index[axis] += 1;
                    continue 'outer;
                }
                index[axis] = -j_max;
            }
            break;
        }
        Ok(Self {
            centers,
            radius,
            b_x,
        })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Cardinality bound `(2 b_x / radius + 1)^d` the construction must
    /// respect.
    pub fn cardinality_bound(b_x: f64, dim: usize, radius: f64) -> f64 {
        (2.0 * b_x / radius + 1.0).powi(dim as i32)
    }

    /// Index of the nearest center (Euclidean); ties resolve to the
    /// smallest index. For `||x|| ≤ b_x` the distance is at most `radius`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best_d2 {
                best = i;
                best_d2 = d2;
            }
        }
        best
    }

    /// Distance from `x` to its nearest center.
    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        let c = &self.centers[self.nearest(x)];
        c.iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Sampling check of the covering property on `samples` random points
    /// of the ball: every point must be within `radius` of some center.
    pub fn covers_sample<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> bool {
        let dim = self.centers[0].len();
        let mut checked = 0;
        while checked < samples {
            let x: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-self.b_x..=self.b_x))
                .collect();
            if linalg::norm(&x) > self.b_x {
                continue;
            }
            checked += 1;
            if self.nearest_distance(&x) > self.radius + 1e-9 {
                return false;
            }
        }
        true
    }
}

/// Per-cell estimation state, allocated on first visit.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CellState {
    /// Visits during the cell's estimation phase.
    pub count: u64,
    /// Running mean of `2 b_y (o - 1/2)` over those visits.
    pub mean_estimate: f64,
}

impl CellState {
    /// Estimation-round update, incremental form of
    /// `(2 b_y / count) Σ (o_s - 1/2)`.
    pub fn update(&mut self, sold: bool, b_y: f64) {
        let y = 2.0 * b_y * (if sold { 1.0 } else { 0.0 } - 0.5);
        let n = self.count as f64;
        self.mean_estimate = (n * self.mean_estimate + y) / (n + 1.0);
        self.count += 1;
    }
}

/// Problem constants the non-parametric learner is given.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NonparamBounds {
    pub b_x: f64,
    pub b_g: f64,
    pub b_xi: f64,
    pub b_y: f64,
    pub l_xi: f64,
}

impl NonparamBounds {
    pub fn from_env(env: &MarketEnv) -> Self {
        Self {
            b_x: env.contexts().b_x(),
            b_g: env.valuation().b_g(),
            b_xi: env.noise().b_xi(),
            b_y: env.b_y(),
            l_xi: env.noise().l_xi(),
        }
    }

    fn validate(&self) -> Result<(), RunError> {
        for (name, v) in [
            ("b_x", self.b_x),
            ("b_g", self.b_g),
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
        if (self.b_y - (self.b_g + self.b_xi)).abs() > 1e-9 {
            return Err(RunError::InvalidConfig(format!(
                "b_y = {} must equal b_g + b_xi = {}",
                self.b_y,
                self.b_g + self.b_xi
            )));
        }
        Ok(())
    }
}

/// Per-cell estimation budget `18 b_y² ln(2 n_centers / alpha) / epsilon²`,
/// evaluated with the realized covering cardinality.
pub fn estimation_budget(b_y: f64, n_centers: usize, alpha: f64, epsilon: f64) -> f64 {
    18.0 * b_y * b_y * (2.0 * n_centers as f64 / alpha).ln() / (epsilon * epsilon)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonparamConfig {
    pub horizon: u64,
    pub dim: usize,
    pub beta: f64,
    pub l_g: f64,
    pub epsilon: f64,
    /// Per-cell estimation budget; cells explore while `count < ⌈tau⌉`.
    pub tau: f64,
    pub alpha: f64,
    pub bounds: NonparamBounds,
}

impl NonparamConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: u64,
        dim: usize,
        beta: f64,
        l_g: f64,
        epsilon: f64,
        tau: f64,
        alpha: f64,
        bounds: NonparamBounds,
    ) -> Result<Self, RunError> {
        bounds.validate()?;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(RunError::InvalidConfig(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        if !(l_g.is_finite() && l_g > 0.0 && epsilon.is_finite() && epsilon > 0.0) {
            return Err(RunError::InvalidConfig(format!(
                "l_g and epsilon must be positive, got l_g {l_g}, epsilon {epsilon}"
            )));
        }
        if !(tau.is_finite() && tau >= 1.0) {
            return Err(RunError::InvalidConfig(format!(
                "estimation budget tau must be >= 1, got {tau}"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(RunError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            horizon,
            dim,
            beta,
            l_g,
            epsilon,
            tau,
            alpha,
            bounds,
        })
    }

    /// Horizon-tuned schedule: `epsilon = (T / ln T)^(-beta/(d+3beta))`,
    /// `alpha = T⁻⁴`, and `tau` from [`estimation_budget`] with the realized
    /// covering cardinality (never the theoretical bound).
    pub fn from_horizon(
        horizon: u64,
        dim: usize,
        beta: f64,
        l_g: f64,
        bounds: NonparamBounds,
    ) -> Result<Self, RunError> {
        if horizon < 2 {
            return Err(RunError::InvalidConfig(format!(
                "horizon must be >= 2 for the schedule, got {horizon}"
            )));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(RunError::InvalidConfig(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        let t = horizon as f64;
        let epsilon = (t / t.ln()).powf(-beta / (dim as f64 + 3.0 * beta));
        let alpha = t.powi(-4);
        let radius = Self::covering_radius_for(epsilon, l_g, beta);
        let covering = Covering::build(bounds.b_x, dim, radius)?;
        let tau = estimation_budget(bounds.b_y, covering.len(), alpha, epsilon);
        Self::new(horizon, dim, beta, l_g, epsilon, tau, alpha, bounds)
    }

    /// Covering radius `(epsilon / 3 l_g)^(1/beta)`.
    pub fn covering_radius(&self) -> f64 {
        Self::covering_radius_for(self.epsilon, self.l_g, self.beta)
    }

    fn covering_radius_for(epsilon: f64, l_g: f64, beta: f64) -> f64 {
        (epsilon / (3.0 * l_g)).powf(1.0 / beta)
    }

    pub fn build_covering(&self) -> Result<Covering, RunError> {
        Covering::build(self.bounds.b_x, self.dim, self.covering_radius())
    }

    /// Exploration rounds can never exceed `n_centers * (tau + 1)`.
    pub fn exploration_budget(&self, n_centers: usize) -> f64 {
        n_centers as f64 * (self.tau + 1.0)
    }
}

/// One round's decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub price: f64,
    pub exploring: bool,
    pub increment: Option<i64>,
    pub cell: usize,
}

/// The non-parametric learner: covering plus lazily allocated cell states
/// plus the shared elimination machinery. One instance per run.
pub struct NonparamVape {
    config: NonparamConfig,
    covering: Covering,
    cells: HashMap<usize, CellState>,
    grid: IncrementGrid,
    table: DemandTable,
    params: ConfidenceParams,
    exploration_count: u64,
    tau_ceil: u64,
}

impl NonparamVape {
    pub fn new(config: NonparamConfig) -> Result<Self, RunError> {
        let covering = config.build_covering()?;
        let grid = IncrementGrid::build(config.epsilon, config.bounds.b_y)?;
        let table = DemandTable::new(&grid);
        let params = ConfidenceParams::new(
            config.alpha,
            config.bounds.l_xi,
            config.epsilon,
            config.bounds.b_y,
        )?;
        let tau_ceil = config.tau.ceil() as u64;
        Ok(Self {
            config,
            covering,
            cells: HashMap::new(),
            grid,
            table,
            params,
            exploration_count: 0,
            tau_ceil,
        })
    }

    pub fn covering(&self) -> &Covering {
        &self.covering
    }

    pub fn table(&self) -> &DemandTable {
        &self.table
    }

    pub fn cell(&self, idx: usize) -> Option<&CellState> {
        self.cells.get(&idx)
    }

    pub fn exploration_count(&self) -> u64 {
        self.exploration_count
    }

    pub fn act<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Decision, RunError> {
        let cell = self.covering.nearest(x);
        let state = self.cells.get(&cell).copied().unwrap_or_default();
        if state.count < self.tau_ceil {
            let b_y = self.config.bounds.b_y;
            return Ok(Decision {
                price: rng.random_range(-b_y..=b_y),
                exploring: true,
                increment: None,
                cell,
            });
        }
        let b_g = self.config.bounds.b_g;
        let g_hat = state.mean_estimate.clamp(-b_g, b_g);
        let active = self.grid.active_set(g_hat)?;
        let bounds = RewardBounds::compute(&self.table, &active, g_hat, &self.params);
        let surviving = bounds.surviving_set();
        let k = select_increment(&surviving, &self.table);
        Ok(Decision {
            price: g_hat + self.grid.increment(k),
            exploring: false,
            increment: Some(k),
            cell,
        })
    }

    pub fn observe(&mut self, decision: &Decision, sold: bool) {
        if decision.exploring {
            self.cells
                .entry(decision.cell)
                .or_default()
                .update(sold, self.config.bounds.b_y);
            self.exploration_count += 1;
        } else if let Some(k) = decision.increment {
            self.table.update(k, sold);
        }
    }
}

/// Execute a full seeded run. Accepts any market whose valuation satisfies
/// the Hölder assumption, which includes linear ones. Verifies the
/// exploration budget `n_centers * (tau + 1)` at termination.
pub fn run(env: &MarketEnv, config: &NonparamConfig, seed: u64) -> Result<RunTrace, RunError> {
    let mut learner = NonparamVape::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = RegretOracle::new(env);
    let mut trace = RunTrace::with_capacity(config.horizon as usize);

    for t in 1..=config.horizon {
        let x = env.next_context(t, &mut rng);
        let decision = learner.act(&x, &mut rng)?;
        let sold = env.step(&x, decision.price, &mut rng);
        learner.observe(&decision, sold);
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

    let budget = config.exploration_budget(learner.covering().len());
    if (trace.exploration_count as f64) > budget {
        return Err(RunError::ExplorationBudgetExceeded {
            count: trace.exploration_count,
            bound: budget,
        });
    }
    Ok(trace)
}
