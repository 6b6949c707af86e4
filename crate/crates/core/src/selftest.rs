//! Runtime statistical checks behind the `selftest` CLI subcommand.
//!
//! Each check exercises one probabilistic guarantee the algorithms rely on
//! (estimator unbiasedness, demand confidence coverage, reward
//! Lipschitzness, covering soundness, the adapted Hoeffding inequality)
//! with seeded Monte-Carlo simulations, and reports pass/fail with a
//! diagnostic detail string. The acceptance suite runs the same checks at
//! the same sizes.

use crate::env::{ContextStream, MarketEnv, NoiseSpec, ValuationModel};
use crate::nonparam::Covering;
use crate::pricing::{
    select_increment, ConfidenceParams, DemandTable, IncrementGrid, RewardBounds,
};
use crate::seed::splitmix64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// All checks at their reference sizes.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        unbiasedness_check(10, 1_000_000, seed),
        confidence_coverage_check(50, 1e-4, seed),
        lipschitz_check(10_000, seed),
        covering_soundness_check(20, 10_000, seed),
        martingale_check(10_000, 100, 0.01, seed),
    ]
}

fn single_context_env(noise: NoiseSpec, g_level: f64) -> MarketEnv {
    let valuation = ValuationModel::linear(vec![g_level], 1.0, 1.0).unwrap();
    let contexts = ContextStream::finite_pool(vec![vec![1.0]]).unwrap();
    MarketEnv::new(noise, valuation, contexts).unwrap()
}

/// Monte-Carlo mean of `2 b_y (o - 1/2)` under uniform prices must match
/// `g(x)` within `4 (2 b_y) / sqrt(n)` for every sampled market.
pub fn unbiasedness_check(pairs: usize, draws: u64, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x1));
    let mut worst = 0.0f64;
    let mut passed = true;
    for i in 0..pairs {
        let g_level = rng.random_range(-0.9..0.9);
        let noise = if i % 2 == 0 {
            NoiseSpec::uniform(-1.0, 1.0).unwrap()
        } else {
            NoiseSpec::truncated_gaussian(0.0, 0.1, -1.0, 1.0).unwrap()
        };
        let env = single_context_env(noise, g_level);
        let b_y = env.b_y();
        let x = [1.0];
        let mut sum = 0.0;
        for _ in 0..draws {
            let p = rng.random_range(-b_y..=b_y);
            let o = if env.step(&x, p, &mut rng) { 1.0 } else { 0.0 };
            sum += 2.0 * b_y * (o - 0.5);
        }
        let mean = sum / draws as f64;
        let tol = 4.0 * (2.0 * b_y) / (draws as f64).sqrt();
        let ratio = (mean - g_level).abs() / tol;
        worst = worst.max(ratio);
        if ratio > 1.0 {
            passed = false;
        }
    }
    CheckResult::new(
        "unbiasedness",
        passed,
        format!("{pairs} markets x {draws} draws, worst |mean - g| at {worst:.3} of tolerance"),
    )
}

/// With the exact valuation injected, the true demand `D(k eps)` must lie
/// inside `D̂_k ± sqrt(2 ln(1/alpha) / N_k)` on at least 99% of
/// `(increment, checkpoint)` pairs across seeded elimination-only runs.
pub fn confidence_coverage_check(seeds: u64, alpha: f64, seed: u64) -> CheckResult {
    let noise = NoiseSpec::uniform(-1.0, 1.0).unwrap();
    let pool = vec![vec![1.0], vec![0.4], vec![-0.6]];
    let valuation = ValuationModel::linear(vec![1.0], 1.0, 1.0).unwrap();
    let contexts = ContextStream::finite_pool(pool).unwrap();
    let env = MarketEnv::new(noise, valuation, contexts).unwrap();
    let epsilon = 0.25;
    let rounds = 2_000u64;
    let checkpoint_every = 50;

    let grid = IncrementGrid::build(epsilon, env.b_y()).unwrap();
    let params = ConfidenceParams::new(alpha, env.noise().l_xi(), epsilon, env.b_y()).unwrap();
    let mut covered = 0u64;
    let mut total = 0u64;
    for s in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x2) ^ s);
        let mut table = DemandTable::new(&grid);
        for t in 1..=rounds {
            let x = env.next_context(t, &mut rng);
            let g_exact = env.g(&x);
            let active = grid.active_set(g_exact).unwrap();
            let bounds = RewardBounds::compute(&table, &active, g_exact, &params);
            let k = select_increment(&bounds.surviving_set(), &table);
            let price = g_exact + grid.increment(k);
            let sold = env.step(&x, price, &mut rng);
            table.update(k, sold);

            if t % checkpoint_every == 0 {
                for k in grid.indices() {
                    let n = table.count(k);
                    if n == 0 {
                        continue;
                    }
                    total += 1;
                    let truth = env.noise().demand(grid.increment(k));
                    if (table.mean(k) - truth).abs() <= params.demand_width(n) {
                        covered += 1;
                    }
                }
            }
        }
    }
    let coverage = covered as f64 / total as f64;
    CheckResult::new(
        "confidence_coverage",
        coverage >= 0.99,
        format!("{covered}/{total} checkpoints covered ({:.4})", coverage),
    )
}

/// `|pi(x, p) - pi(x, p')| <= b_y l_xi |p - p'|` with 1e-12 slack on random
/// price pairs, for every implemented noise law; zero violations allowed.
pub fn lipschitz_check(pairs: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x3));
    let mut violations = 0u64;
    let mut worst_excess = 0.0f64;
    for noise in [
        NoiseSpec::uniform(-1.0, 1.0).unwrap(),
        NoiseSpec::truncated_gaussian(0.0, 0.1, -1.0, 1.0).unwrap(),
    ] {
        let env = single_context_env(noise, 0.4);
        let lip = env.b_y() * env.noise().l_xi();
        let x = [1.0];
        for _ in 0..pairs {
            let p1 = rng.random_range(0.0..env.b_y());
            let p2 = rng.random_range(0.0..env.b_y());
            let gap = (env.expected_revenue(&x, p1) - env.expected_revenue(&x, p2)).abs();
            let excess = gap - lip * (p1 - p2).abs();
            worst_excess = worst_excess.max(excess);
            if excess > 1e-12 {
                violations += 1;
            }
        }
    }
    CheckResult::new(
        "reward_lipschitz",
        violations == 0,
        format!("{violations} violations, worst excess {worst_excess:.2e}"),
    )
}

/// Random covering configurations must pass the sampled covering property
/// and stay under the `(2 b_x / radius + 1)^d` cardinality bound.
pub fn covering_soundness_check(configs: usize, samples: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x4));
    let mut passed = true;
    let mut detail = String::new();
    for i in 0..configs {
        let b_x = rng.random_range(0.5..2.0);
        let dim = rng.random_range(1..=3usize);
        let radius = b_x * rng.random_range(0.06..0.8);
        let covering = match Covering::build(b_x, dim, radius) {
            Ok(c) => c,
            Err(e) => {
                passed = false;
                detail = format!("config {i} failed to build: {e}");
                break;
            }
        };
        let bound = Covering::cardinality_bound(b_x, dim, radius);
        if (covering.len() as f64) > bound {
            passed = false;
            detail = format!(
                "config {i} (b_x {b_x:.3}, d {dim}, r {radius:.3}): {} centers > bound {bound:.1}",
                covering.len()
            );
            break;
        }
        if !covering.covers_sample(samples, &mut rng) {
            passed = false;
            detail = format!("config {i} (b_x {b_x:.3}, d {dim}, r {radius:.3}): coverage hole");
            break;
        }
    }
    if passed {
        detail = format!("{configs} random configurations covered and within bound");
    }
    CheckResult::new("covering_soundness", passed, detail)
}

/// Adapted-sequence Hoeffding bound: simulate sequences with predictable
/// inclusion indicators and bounded centered increments in `[m, M]`; the
/// frequency of `|mu_hat| > (M - m) sqrt(ln(1/alpha) / (2 N))` with
/// `N >= 1` must stay within `2 t alpha * 1.5`, and within `2 alpha * 1.5`
/// at every fixed inclusion count.
pub fn martingale_check(sequences: u64, rounds: u64, alpha: f64, seed: u64) -> CheckResult {
    let (m, big_m) = (-1.0f64, 1.0f64);
    let mut exceed_total = 0u64;
    let mut exceed_by_count = vec![0u64; rounds as usize + 1];
    let mut seen_by_count = vec![0u64; rounds as usize + 1];
    for s in 0..sequences {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5) ^ s);
        let mut n = 0u64;
        let mut sum = 0.0f64;
        for _ in 1..=rounds {
            // predictable inclusion: decided from the past only
            let mu_prev = if n > 0 { sum / n as f64 } else { 0.0 };
            let include = n < 10 || mu_prev >= 0.0;
            let y: f64 = rng.random_range(m..=big_m);
            if include {
                sum += y;
                n += 1;
            }
        }
        if n >= 1 {
            let mu_hat = sum / n as f64;
            let width = (big_m - m) * ((1.0 / alpha).ln() / (2.0 * n as f64)).sqrt();
            seen_by_count[n as usize] += 1;
            if mu_hat.abs() > width {
                exceed_total += 1;
                exceed_by_count[n as usize] += 1;
            }
        }
    }
    let freq = exceed_total as f64 / sequences as f64;
    let bound = 2.0 * rounds as f64 * alpha * 1.5;
    let per_count_bound = 2.0 * alpha * 1.5;
    let worst_per_count = exceed_by_count
        .iter()
        .map(|&c| c as f64 / sequences as f64)
        .fold(0.0f64, f64::max);
    let passed = freq <= bound && worst_per_count <= per_count_bound;
    CheckResult::new(
        "martingale_hoeffding",
        passed,
        format!(
            "exceed frequency {freq:.5} (bound {bound}), worst fixed-count frequency \
             {worst_per_count:.5} (bound {per_count_bound})"
        ),
    )
}
