//! Shared price-elimination machinery.
//!
//! Prices are posted as `ĝ + kε` for increments `kε` on a symmetric grid.
//! One demand table is shared across all contexts: every round that plays
//! increment `k` refines the demand estimate `D̂_k` regardless of the
//! context, which is what lets a single elimination process serve every
//! valuation level. Increments are compared through reward confidence
//! bounds; increments whose upper bound falls below the best lower bound
//! are eliminated, and the survivor with the fewest plays is posted next.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("grid step must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("price bound must be positive, got {0}")]
    InvalidBound(f64),
    #[error("failure probability must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error(
        "active set is empty for g_hat = {g_hat}; the estimate was not clamped to [-b_g, b_g]"
    )]
    EmptyActiveSet { g_hat: f64 },
}

/// Symmetric increment grid `{kε : k ∈ [-K, K]}` with `K = ⌈(b_y + 1)/ε⌉`,
/// wide enough that every price in `[0, b_y]` is within `ε` of an active
/// increment for any clamped valuation estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementGrid {
    epsilon: f64,
    k_max: i64,
    b_y: f64,
}

impl IncrementGrid {
    pub fn build(epsilon: f64, b_y: f64) -> Result<Self, PricingError> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(PricingError::InvalidEpsilon(epsilon));
        }
        if !b_y.is_finite() || b_y <= 0.0 {
            return Err(PricingError::InvalidBound(b_y));
        }
        let k_max = ((b_y + 1.0) / epsilon).ceil() as i64;
        Ok(Self {
            epsilon,
            k_max,
            b_y,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn b_y(&self) -> f64 {
        self.b_y
    }

    pub fn len(&self) -> usize {
        (2 * self.k_max + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The price increment `kε`.
    pub fn increment(&self, k: i64) -> f64 {
        k as f64 * self.epsilon
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        -self.k_max..=self.k_max
    }

    /// Increments whose price `ĝ + kε` lands in `[0, b_y]`, in ascending
    /// order. Errors when empty, which signals an unclamped estimate.
    pub fn active_set(&self, g_hat: f64) -> Result<Vec<i64>, PricingError> {
        let active: Vec<i64> = self
            .indices()
            .filter(|&k| {
                let price = g_hat + self.increment(k);
                (0.0..=self.b_y).contains(&price)
            })
            .collect();
        if active.is_empty() {
            return Err(PricingError::EmptyActiveSet { g_hat });
        }
        Ok(active)
    }
}

/// Per-increment play counts and running demand means, shared across all
/// contexts. Owned by exactly one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandTable {
    k_max: i64,
    counts: Vec<u64>,
    means: Vec<f64>,
}

impl DemandTable {
    pub fn new(grid: &IncrementGrid) -> Self {
        let n = grid.len();
        Self {
            k_max: grid.k_max(),
            counts: vec![0; n],
            means: vec![0.0; n],
        }
    }

    #[inline]
    fn idx(&self, k: i64) -> usize {
        debug_assert!(k.abs() <= self.k_max, "increment {k} outside grid");
        (k + self.k_max) as usize
    }

    pub fn count(&self, k: i64) -> u64 {
        self.counts[self.idx(k)]
    }

    /// Empirical mean of the sale outcomes recorded at `k`; 0 when unplayed.
    pub fn mean(&self, k: i64) -> f64 {
        self.means[self.idx(k)]
    }

    /// Total plays across all increments (= elimination rounds so far).
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Running-mean update: `D̂ ← (N·D̂ + o)/(N + 1)`, `N ← N + 1`.
    pub fn update(&mut self, k: i64, sold: bool) {
        let i = self.idx(k);
        let n = self.counts[i] as f64;
        let o = if sold { 1.0 } else { 0.0 };
        self.means[i] = (n * self.means[i] + o) / (n + 1.0);
        self.counts[i] += 1;
    }
}

/// Parameters of the demand/reward confidence intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceParams {
    alpha: f64,
    l_xi: f64,
    epsilon: f64,
    b_y: f64,
    /// Cached `ln(1/alpha)`.
    log_inv_alpha: f64,
}

impl ConfidenceParams {
    pub fn new(alpha: f64, l_xi: f64, epsilon: f64, b_y: f64) -> Result<Self, PricingError> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(PricingError::InvalidAlpha(alpha));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(PricingError::InvalidEpsilon(epsilon));
        }
        Ok(Self {
            alpha,
            l_xi,
            epsilon,
            b_y,
            log_inv_alpha: -alpha.ln(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn l_xi(&self) -> f64 {
        self.l_xi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn b_y(&self) -> f64 {
        self.b_y
    }

    pub fn log_inv_alpha(&self) -> f64 {
        self.log_inv_alpha
    }

    /// Demand half-width `√(2 ln(1/α) / n)`; infinite for unplayed arms.
    pub fn demand_width(&self, n: u64) -> f64 {
        if n == 0 {
            f64::INFINITY
        } else {
            (2.0 * self.log_inv_alpha / n as f64).sqrt()
        }
    }
}

/// Reward confidence interval for increment `k` at estimate `ĝ`:
/// `(ĝ + kε) · (D̂_k ∓ (√(2 ln(1/α)/N_k) + 2 L_ξ ε))`. Unplayed increments
/// get `(-∞, +∞)` so they can never be eliminated and win the play-count
/// argmin.
pub fn reward_bounds(
    table: &DemandTable,
    k: i64,
    g_hat: f64,
    params: &ConfidenceParams,
) -> (f64, f64) {
    let n = table.count(k);
    if n == 0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let price = g_hat + k as f64 * params.epsilon;
    let width = params.demand_width(n) + 2.0 * params.l_xi * params.epsilon;
    let mean = table.mean(k);
    (price * (mean - width), price * (mean + width))
}

/// Confidence intervals for every active increment, ordered by `k`.
#[derive(Debug, Clone)]
pub struct RewardBounds {
    entries: Vec<(i64, f64, f64)>,
}

impl RewardBounds {
    pub fn compute(
        table: &DemandTable,
        active: &[i64],
        g_hat: f64,
        params: &ConfidenceParams,
    ) -> Self {
        let entries = active
            .iter()
            .map(|&k| {
                let (lcb, ucb) = reward_bounds(table, k, g_hat, params);
                (k, lcb, ucb)
            })
            .collect();
        Self { entries }
    }

    #[cfg(test)]
    fn from_entries(entries: Vec<(i64, f64, f64)>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[(i64, f64, f64)] {
        &self.entries
    }

    /// Successive-elimination survivors: increments whose upper bound
    /// reaches the best lower bound. Never empty (the lcb argmax survives).
    pub fn surviving_set(&self) -> Vec<i64> {
        let max_lcb = self
            .entries
            .iter()
            .map(|&(_, lcb, _)| lcb)
            .fold(f64::NEG_INFINITY, f64::max);
        self.entries
            .iter()
            .filter(|&&(_, _, ucb)| ucb >= max_lcb)
            .map(|&(k, _, _)| k)
            .collect()
    }
}

/// Round-robin selection: the surviving increment with the fewest plays,
/// ties broken by the smallest index.
pub fn select_increment(surviving: &[i64], table: &DemandTable) -> i64 {
    debug_assert!(!surviving.is_empty());
    let mut best = surviving[0];
    let mut best_n = table.count(best);
    for &k in &surviving[1..] {
        let n = table.count(k);
        if n < best_n {
            best = k;
            best_n = n;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape_examples() {
        let g = IncrementGrid::build(0.5, 2.0).unwrap();
        assert_eq!(g.k_max(), 6);
        assert_eq!(g.len(), 13);
        assert_eq!(g.increment(-6), -3.0);
        assert_eq!(g.increment(6), 3.0);

        let g = IncrementGrid::build(1.0, 0.5).unwrap();
        assert_eq!(g.k_max(), 2);
        let ks: Vec<i64> = g.indices().collect();
        assert_eq!(ks, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn bad_grid_parameters_rejected() {
        assert!(IncrementGrid::build(0.0, 2.0).is_err());
        assert!(IncrementGrid::build(-0.1, 2.0).is_err());
        assert!(IncrementGrid::build(0.5, 0.0).is_err());
    }

    #[test]
    fn active_set_examples() {
        let g = IncrementGrid::build(0.5, 2.0).unwrap();
        assert_eq!(g.active_set(0.0).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(g.active_set(2.0).unwrap(), vec![-4, -3, -2, -1, 0]);
        assert_eq!(g.active_set(0.3).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn unclamped_estimate_empties_active_set() {
        let g = IncrementGrid::build(0.5, 2.0).unwrap();
        // way outside [-b_g, b_g]: no price lands in [0, b_y]
        let err = g.active_set(100.0).unwrap_err();
        assert!(matches!(err, PricingError::EmptyActiveSet { .. }));
    }

    /// Grid coverage: for clamped estimates and any target price there is an
    /// active increment within eps.
    #[test]
    fn active_set_covers_price_range() {
        let b_y = 2.0;
        let b_g = 1.0;
        for eps in [0.5, 0.21, 0.07] {
            let g = IncrementGrid::build(eps, b_y).unwrap();
            let mut g_hat = -b_g;
            while g_hat <= b_g {
                let active = g.active_set(g_hat).unwrap();
                let mut p = 0.0;
                while p <= b_y {
                    let best = active
                        .iter()
                        .map(|&k| (g_hat + g.increment(k) - p).abs())
                        .fold(f64::INFINITY, f64::min);
                    assert!(
                        best <= eps + 1e-12,
                        "eps {eps}, g_hat {g_hat}, p {p}: nearest active price off by {best}"
                    );
                    p += 0.0173;
                }
                g_hat += 0.0191;
            }
        }
    }

    #[test]
    fn demand_update_examples() {
        let g = IncrementGrid::build(0.5, 2.0).unwrap();
        let mut t = DemandTable::new(&g);
        t.update(1, true);
        assert_eq!(t.count(1), 1);
        assert_eq!(t.mean(1), 1.0);

        let mut t = DemandTable::new(&g);
        t.update(0, true);
        t.update(0, false);
        t.update(0, false);
        assert!((t.mean(0) - 1.0 / 3.0).abs() < 1e-15);
        t.update(0, false);
        assert_eq!(t.mean(0), 0.25);
        assert_eq!(t.count(0), 4);

        let mut t = DemandTable::new(&g);
        for o in [true, false, true, true] {
            t.update(2, o);
        }
        assert_eq!(t.mean(2), 0.75);
        assert_eq!(t.count(2), 4);
        assert_eq!(t.total_count(), 4);
    }

    /// Running mean equals the batch mean on arbitrary replayed sequences.
    #[test]
    fn running_mean_equals_batch_mean() {
        use proptest::prelude::*;
        proptest!(|(obs in proptest::collection::vec(any::<bool>(), 1..400))| {
            let g = IncrementGrid::build(0.5, 2.0).unwrap();
            let mut t = DemandTable::new(&g);
            for &o in &obs {
                t.update(3, o);
            }
            let batch = obs.iter().filter(|&&o| o).count() as f64 / obs.len() as f64;
            prop_assert!((t.mean(3) - batch).abs() < 1e-12);
            prop_assert_eq!(t.count(3), obs.len() as u64);
        });
    }

    #[test]
    fn reward_bounds_formula() {
        let g = IncrementGrid::build(0.1, 2.0).unwrap();
        let mut t = DemandTable::new(&g);
        // 50 plays at k = 2 with mean 0.4
        for i in 0..50 {
            t.update(2, i < 20);
        }
        assert_eq!(t.mean(2), 0.4);
        let params = ConfidenceParams::new(0.01, 0.5, 0.1, 2.0).unwrap();
        let (lcb, ucb) = reward_bounds(&t, 2, 0.5, &params);
        // price 0.7, width = sqrt(2 ln 100 / 50) + 2*0.5*0.1
        let width = (2.0 * (100.0f64).ln() / 50.0).sqrt() + 0.1;
        assert!((ucb - 0.7 * (0.4 + width)).abs() < 1e-15);
        assert!((lcb - 0.7 * (0.4 - width)).abs() < 1e-15);
        // frozen from direct evaluation of the formula
        assert!((ucb - 0.650_435_243_680_508_5).abs() < 1e-12);
        assert!(lcb <= ucb);
    }

    #[test]
    fn unplayed_increment_has_infinite_bounds() {
        let g = IncrementGrid::build(0.1, 2.0).unwrap();
        let t = DemandTable::new(&g);
        let params = ConfidenceParams::new(0.01, 0.5, 0.1, 2.0).unwrap();
        let (lcb, ucb) = reward_bounds(&t, 3, 0.5, &params);
        assert_eq!(lcb, f64::NEG_INFINITY);
        assert_eq!(ucb, f64::INFINITY);
    }

    #[test]
    fn width_collapses_at_certainty() {
        let g = IncrementGrid::build(0.1, 2.0).unwrap();
        let mut t = DemandTable::new(&g);
        let i = t.idx(2);
        t.counts[i] = 1_000_000_000_000;
        t.means[i] = 1.0;
        let params = ConfidenceParams::new(0.01, 0.0, 0.1, 2.0).unwrap();
        let (lcb, ucb) = reward_bounds(&t, 2, 0.5, &params);
        let price = 0.7;
        assert!((ucb - price).abs() < 1e-5);
        assert!((ucb - lcb).abs() < 1e-5);
    }

    #[test]
    fn surviving_set_examples() {
        // all infinite-width: everything survives
        let b = RewardBounds::from_entries(vec![
            (-1, f64::NEG_INFINITY, f64::INFINITY),
            (0, f64::NEG_INFINITY, f64::INFINITY),
            (1, f64::NEG_INFINITY, f64::INFINITY),
        ]);
        assert_eq!(b.surviving_set(), vec![-1, 0, 1]);

        // strict domination
        let b = RewardBounds::from_entries(vec![(1, 0.5, 0.6), (2, 0.1, 0.45)]);
        assert_eq!(b.surviving_set(), vec![1]);

        // overlap keeps both
        let b = RewardBounds::from_entries(vec![(1, 0.5, 0.6), (2, 0.1, 0.55)]);
        assert_eq!(b.surviving_set(), vec![1, 2]);
    }

    /// If every true reward sits inside its interval, the best increment
    /// survives.
    #[test]
    fn survivor_set_keeps_true_argmax() {
        use proptest::prelude::*;
        proptest!(|(rewards in proptest::collection::vec(0.0..1.0f64, 2..20),
                    widths in proptest::collection::vec(0.0..0.5f64, 2..20))| {
            let n = rewards.len().min(widths.len());
            let entries: Vec<(i64, f64, f64)> = (0..n)
                .map(|i| (i as i64, rewards[i] - widths[i], rewards[i] + widths[i]))
                .collect();
            let best = (0..n)
                .max_by(|&a, &b| rewards[a].partial_cmp(&rewards[b]).unwrap())
                .unwrap() as i64;
            let surviving = RewardBounds::from_entries(entries).surviving_set();
            prop_assert!(surviving.contains(&best));
            prop_assert!(!surviving.is_empty());
        });
    }

    #[test]
    fn selection_examples() {
        let g = IncrementGrid::build(0.5, 2.0).unwrap();
        let mut t = DemandTable::new(&g);
        for _ in 0..3 {
            t.update(-1, true);
        }
        t.update(0, true);
        for _ in 0..5 {
            t.update(2, true);
        }
        assert_eq!(select_increment(&[-1, 0, 2], &t), 0);

        // all equal counts: smallest index
        let t2 = DemandTable::new(&g);
        assert_eq!(select_increment(&[-2, 0, 3], &t2), -2);

        // unplayed first
        let mut t3 = DemandTable::new(&g);
        for _ in 0..7 {
            t3.update(2, false);
        }
        assert_eq!(select_increment(&[1, 2], &t3), 1);
    }

    #[test]
    fn selection_is_deterministic() {
        let g = IncrementGrid::build(0.5, 2.0).unwrap();
        let mut t = DemandTable::new(&g);
        t.update(1, true);
        t.update(2, false);
        let s = vec![-1, 1, 2, 3];
        let first = select_increment(&s, &t);
        for _ in 0..10 {
            assert_eq!(select_increment(&s, &t), first);
        }
    }
}
