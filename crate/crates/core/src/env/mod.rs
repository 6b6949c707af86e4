//! Simulated posted-price markets.
//!
//! A market couples a hidden valuation function, a bounded noise law and a
//! context stream. Each round the market reveals a context `x_t`, the buyer
//! forms the hidden valuation `y_t = g(x_t) + ξ_t`, and a posted price `p`
//! sells iff `p ≤ y_t`. Because the noise c.d.f. is known in closed form,
//! the market also exposes exact expected-revenue and optimal-price oracles,
//! which the harness uses for regret accounting; learners never see them.

mod config;
mod context;
mod noise;
mod valuation;

pub use config::{ContextConfig, EnvConfig, NamedSwitch, SwitchRule, ValuationConfig};
pub use context::{ContextStream, StreamKind};
pub use noise::{NoiseKind, NoiseSpec};
pub use valuation::{TestFunction, ValuationKind, ValuationModel};

use rand::Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),
    #[error("invalid valuation model: {0}")]
    InvalidValuation(String),
    #[error("invalid context stream: {0}")]
    InvalidStream(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot read env config {path}: {source}")]
    ConfigIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse env config {path}: {source}")]
    ConfigParse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Grid resolution of the optimal-price oracle. Keeps the oracle's value
/// error below `b_y * l_xi * 1e-4` before refinement.
pub const ORACLE_RESOLUTION: f64 = 1e-4;

/// The ground-truth market; immutable after construction and safe to share
/// read-only across concurrent runs.
#[derive(Debug, Clone)]
pub struct MarketEnv {
    noise: NoiseSpec,
    valuation: ValuationModel,
    contexts: ContextStream,
    b_y: f64,
}

impl MarketEnv {
    pub fn new(
        noise: NoiseSpec,
        valuation: ValuationModel,
        contexts: ContextStream,
    ) -> Result<Self, EnvError> {
        if let ValuationKind::Linear { theta, .. } = valuation.kind() {
            if theta.len() != contexts.dim() {
                return Err(EnvError::DimensionMismatch(format!(
                    "theta has dimension {}, contexts have dimension {}",
                    theta.len(),
                    contexts.dim()
                )));
            }
        }
        let b_y = valuation.b_g() + noise.b_xi();
        Ok(Self {
            noise,
            valuation,
            contexts,
            b_y,
        })
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn valuation(&self) -> &ValuationModel {
        &self.valuation
    }

    pub fn contexts(&self) -> &ContextStream {
        &self.contexts
    }

    /// Almost-sure bound on the realized valuation: `b_y = b_g + b_xi`.
    pub fn b_y(&self) -> f64 {
        self.b_y
    }

    pub fn dim(&self) -> usize {
        self.contexts.dim()
    }

    /// Hidden expected valuation of a context.
    pub fn g(&self, x: &[f64]) -> f64 {
        self.valuation.evaluate(x)
    }

    /// Exact expected revenue `π(x, p) = p * D(p - g(x))`.
    pub fn expected_revenue(&self, x: &[f64], p: f64) -> f64 {
        p * self.noise.demand(p - self.g(x))
    }

    /// Argmax and max of the expected revenue over `p ∈ [0, b_y]`: grid
    /// search at [`ORACLE_RESOLUTION`] followed by a ternary-search
    /// refinement of the bracketing interval.
    pub fn optimal_price(&self, x: &[f64]) -> (f64, f64) {
        let g = self.g(x);
        self.optimal_price_for_g(g)
    }

    fn optimal_price_for_g(&self, g: f64) -> (f64, f64) {
        let revenue = |p: f64| p * self.noise.demand(p - g);
        let hi = self.b_y;
        let steps = (hi / ORACLE_RESOLUTION).floor() as usize;
        let mut best_p = 0.0;
        let mut best_v = revenue(0.0);
        for i in 1..=steps {
            let p = i as f64 * ORACLE_RESOLUTION;
            let v = revenue(p);
            if v > best_v {
                best_v = v;
                best_p = p;
            }
        }
        let v_end = revenue(hi);
        if v_end > best_v {
            best_v = v_end;
            best_p = hi;
        }

        // Ternary refinement of the bracket around the grid argmax.
        let mut lo_b = (best_p - ORACLE_RESOLUTION).max(0.0);
        let mut hi_b = (best_p + ORACLE_RESOLUTION).min(hi);
        for _ in 0..200 {
            let m1 = lo_b + (hi_b - lo_b) / 3.0;
            let m2 = hi_b - (hi_b - lo_b) / 3.0;
            if revenue(m1) < revenue(m2) {
                lo_b = m1;
            } else {
                hi_b = m2;
            }
        }
        let p_ref = 0.5 * (lo_b + hi_b);
        let v_ref = revenue(p_ref);
        if v_ref > best_v {
            (p_ref, v_ref)
        } else {
            (best_p, best_v)
        }
    }

    /// One market round: draws the noise and returns the sale indicator
    /// `1{p ≤ g(x) + ξ}`. Consumes exactly one noise draw.
    pub fn step<R: Rng + ?Sized>(&self, x: &[f64], p: f64, rng: &mut R) -> bool {
        let xi = self.noise.sample(rng);
        p <= self.g(x) + xi
    }

    /// Context for round `t` (1-based).
    pub fn next_context<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> Vec<f64> {
        self.contexts.next_context(t, rng)
    }
}

/// Memoized optimal-price oracle. The optimal price depends on the context
/// only through `g(x)`, so results are cached per valuation level; streams
/// that revisit contexts pay for one grid search per distinct level.
pub struct RegretOracle<'a> {
    env: &'a MarketEnv,
    cache: HashMap<u64, (f64, f64)>,
}

impl<'a> RegretOracle<'a> {
    pub fn new(env: &'a MarketEnv) -> Self {
        Self {
            env,
            cache: HashMap::new(),
        }
    }

    /// `(p*, π*)` for the context's valuation level.
    pub fn optimal(&mut self, x: &[f64]) -> (f64, f64) {
        let g = self.env.g(x);
        *self
            .cache
            .entry(g.to_bits())
            .or_insert_with(|| self.env.optimal_price_for_g(g))
    }

    /// Expected instantaneous regret `π*(x) - π(x, p)` of posting `p`.
    pub fn instant_regret(&mut self, x: &[f64], p: f64) -> f64 {
        let (_, pi_star) = self.optimal(x);
        pi_star - self.env.expected_revenue(x, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_env(g_level: f64) -> MarketEnv {
        let noise = NoiseSpec::uniform(-1.0, 1.0).unwrap();
        let valuation = ValuationModel::linear(vec![g_level], 1.0, 1.0).unwrap();
        let contexts = ContextStream::finite_pool(vec![vec![1.0]]).unwrap();
        MarketEnv::new(noise, valuation, contexts).unwrap()
    }

    #[test]
    fn expected_revenue_closed_form() {
        let env = uniform_env(0.5);
        // D(0.25) = (1 - 0.25) / 2 = 0.375
        assert!((env.expected_revenue(&[1.0], 0.75) - 0.28125).abs() < 1e-15);
        assert_eq!(env.expected_revenue(&[1.0], 0.0), 0.0);
        // price beyond g + b_xi sells with probability 0
        assert_eq!(env.expected_revenue(&[1.0], 0.5 + 1.0 + 0.1), 0.0);
    }

    #[test]
    fn optimal_price_quadratic_case() {
        // Uniform(-1,1) noise, g = 0.5: pi(p) = p (1.5 - p) / 2 peaks at 0.75.
        let env = uniform_env(0.5);
        let (p, v) = env.optimal_price(&[1.0]);
        assert!((p - 0.75).abs() < 1e-4, "p* = {p}");
        assert!((v - 0.28125).abs() < 1e-6, "pi* = {v}");
    }

    #[test]
    fn optimal_price_clamped_to_b_y() {
        let env = uniform_env(1.0); // b_y = 2, g = 1
        let (p, _) = env.optimal_price(&[1.0]);
        assert!(p <= env.b_y());
    }

    /// Oracle vs an independent dense brute-force scan on random markets.
    #[test]
    fn optimal_price_matches_dense_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for i in 0..100 {
            let g_level = rng.random_range(-0.9..0.9);
            let env = if i % 2 == 0 {
                uniform_env(g_level)
            } else {
                let noise = NoiseSpec::truncated_gaussian(0.0, 0.1, -1.0, 1.0).unwrap();
                let valuation = ValuationModel::linear(vec![g_level], 1.0, 1.0).unwrap();
                let contexts = ContextStream::finite_pool(vec![vec![1.0]]).unwrap();
                MarketEnv::new(noise, valuation, contexts).unwrap()
            };
            let (_, v) = env.optimal_price(&[1.0]);
            // brute-force oracle at resolution 1e-6
            let n = (env.b_y() / 1e-6) as usize;
            let mut brute = f64::NEG_INFINITY;
            for j in 0..=n {
                let p = j as f64 * 1e-6;
                brute = brute.max(env.expected_revenue(&[1.0], p));
            }
            assert!(
                (v - brute).abs() < 1e-5,
                "oracle {v} vs brute {brute} at g = {g_level}"
            );
            assert!(v >= brute - 1e-9, "oracle must not undercut the scan");
        }
    }

    #[test]
    fn step_extreme_prices() {
        let env = uniform_env(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            assert!(env.step(&[1.0], -env.b_y() - 1.0, &mut rng));
            assert!(!env.step(&[1.0], env.b_y() + 1.0, &mut rng));
        }
    }

    /// Monte-Carlo sale frequency vs the closed-form demand.
    #[test]
    fn step_frequency_matches_demand() {
        let env = uniform_env(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12_345);
        let n = 1_000_000;
        let mut sales = 0u64;
        for _ in 0..n {
            if env.step(&[1.0], 0.0, &mut rng) {
                sales += 1;
            }
        }
        let freq = sales as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.002, "frequency {freq}");
    }

    /// pi(x, .) is (b_y * l_xi)-Lipschitz on [0, b_y].
    #[test]
    fn revenue_lipschitz_in_price() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for env in [uniform_env(0.4), {
            let noise = NoiseSpec::truncated_gaussian(0.0, 0.1, -1.0, 1.0).unwrap();
            let valuation = ValuationModel::linear(vec![0.4], 1.0, 1.0).unwrap();
            let contexts = ContextStream::finite_pool(vec![vec![1.0]]).unwrap();
            MarketEnv::new(noise, valuation, contexts).unwrap()
        }] {
            let lip = env.b_y() * env.noise().l_xi();
            for _ in 0..10_000 {
                let p1 = rng.random_range(0.0..env.b_y());
                let p2 = rng.random_range(0.0..env.b_y());
                let gap =
                    (env.expected_revenue(&[1.0], p1) - env.expected_revenue(&[1.0], p2)).abs();
                assert!(gap <= lip * (p1 - p2).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn oracle_cache_is_consistent() {
        let env = uniform_env(0.5);
        let mut oracle = RegretOracle::new(&env);
        let direct = env.optimal_price(&[1.0]);
        assert_eq!(oracle.optimal(&[1.0]), direct);
        assert_eq!(oracle.optimal(&[1.0]), direct);
        let r = oracle.instant_regret(&[1.0], 0.75);
        assert!(r.abs() < 1e-6);
        assert!(oracle.instant_regret(&[1.0], 0.2) > 0.0);
    }
}
