//! JSON environment configuration.
//!
//! An environment file describes the noise law, the valuation model and the
//! context stream. Components may either be spelled out explicitly or
//! declared as seeded generators (`normalized_gaussian` theta,
//! `gaussian_pool` contexts, `adversarial_orthogonal_pair`); generated parts
//! are materialized once per experiment from the experiment base seed, so
//! every `(horizon, repetition)` run of one experiment shares the same
//! market.
//!
//! ```json
//! {
//!   "noise": { "kind": "truncated_gaussian",
//!              "mean": 0.0, "variance": 0.1, "lo": -1.0, "hi": 1.0 },
//!   "valuation": { "variant": "linear_normalized_gaussian", "dim": 3 },
//!   "contexts": { "variant": "gaussian_pool", "dim": 3, "size": 5 }
//! }
//! ```

use super::{
    ContextStream, EnvError, MarketEnv, NoiseKind, NoiseSpec, TestFunction, ValuationModel,
};
use crate::linalg;
use crate::seed::derive_env_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ValuationConfig {
    Linear {
        theta: Vec<f64>,
        /// Bound on `||theta||`; defaults to the exact norm.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_theta: Option<f64>,
    },
    /// Linear valuation with theta drawn standard normal and normalized
    /// (`b_theta` = 1), materialized from the experiment seed.
    LinearNormalizedGaussian { dim: usize },
    Nonparametric {
        #[serde(flatten)]
        fn_id: TestFunction,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedSwitch {
    /// Switch exactly when the explore-then-commit baseline enters its
    /// commit phase for the run's horizon.
    EtcPhaseBoundary,
}

/// When the adversarial stream switches contexts: a fixed round index or a
/// named, horizon-dependent rule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SwitchRule {
    Round(u64),
    Named(NamedSwitch),
}

impl SwitchRule {
    fn resolve(self, horizon: u64) -> u64 {
        match self {
            SwitchRule::Round(r) => r,
            SwitchRule::Named(NamedSwitch::EtcPhaseBoundary) => {
                crate::baselines::EtcConfig::from_horizon(horizon).exploration_length + 1
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ContextConfig {
    FinitePoolUniform {
        pool: Vec<Vec<f64>>,
    },
    /// Pool of `size` standard-Gaussian-then-normalized vectors in `R^dim`,
    /// materialized from the experiment seed.
    GaussianPool {
        dim: usize,
        size: usize,
    },
    /// Pool of `size` points drawn uniformly from the ball of radius `b_x`,
    /// materialized from the experiment seed.
    UniformBallPool {
        dim: usize,
        size: usize,
        b_x: f64,
    },
    IidSphere {
        dim: usize,
        b_x: f64,
    },
    AdversarialTwoPhase {
        first: Vec<f64>,
        second: Vec<f64>,
        switch_round: SwitchRule,
    },
    /// Two orthogonal contexts in `R^3`: a normalized seeded sample of the
    /// form `[x, 0, z]` first, the axis vector `[0, 1, 0]` second.
    AdversarialOrthogonalPair {
        switch_round: SwitchRule,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub noise: NoiseKind,
    pub valuation: ValuationConfig,
    pub contexts: ContextConfig,
}

impl EnvConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::ConfigIo {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| EnvError::ConfigParse {
            path: path.display().to_string(),
            source,
        })
    }

    /// Build the market. Generated components draw from a ChaCha stream
    /// keyed by the experiment base seed; `horizon` only resolves named
    /// switch rules.
    pub fn materialize(&self, base_seed: u64, horizon: u64) -> Result<MarketEnv, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_env_seed(base_seed));
        let noise = NoiseSpec::from_kind(self.noise.clone())?;

        let contexts = match &self.contexts {
            ContextConfig::FinitePoolUniform { pool } => ContextStream::finite_pool(pool.clone())?,
            ContextConfig::GaussianPool { dim, size } => {
                let pool = (0..*size)
                    .map(|_| normalized_gaussian(&mut rng, *dim))
                    .collect::<Result<_, _>>()?;
                ContextStream::finite_pool(pool)?
            }
            ContextConfig::UniformBallPool { dim, size, b_x } => {
                if *dim == 0 || !b_x.is_finite() || *b_x <= 0.0 {
                    return Err(EnvError::InvalidStream(
                        "uniform ball pool needs dim >= 1 and b_x > 0".into(),
                    ));
                }
                let mut pool = Vec::with_capacity(*size);
                while pool.len() < *size {
                    let x: Vec<f64> = (0..*dim).map(|_| rng.random_range(-*b_x..=*b_x)).collect();
                    if linalg::norm(&x) <= *b_x {
                        pool.push(x);
                    }
                }
                ContextStream::finite_pool(pool)?
            }
            ContextConfig::IidSphere { dim, b_x } => ContextStream::iid_sphere(*dim, *b_x)?,
            ContextConfig::AdversarialTwoPhase {
                first,
                second,
                switch_round,
            } => ContextStream::adversarial_two_phase(
                first.clone(),
                second.clone(),
                switch_round.resolve(horizon),
            )?,
            ContextConfig::AdversarialOrthogonalPair { switch_round } => {
                let mut first = normalized_gaussian(&mut rng, 3)?;
                first[1] = 0.0;
                let n = linalg::norm(&first);
                if n < 1e-9 {
                    first = vec![1.0, 0.0, 0.0];
                } else {
                    first.iter_mut().for_each(|v| *v /= n);
                }
                ContextStream::adversarial_two_phase(
                    first,
                    vec![0.0, 1.0, 0.0],
                    switch_round.resolve(horizon),
                )?
            }
        };

        let valuation = match &self.valuation {
            ValuationConfig::Linear { theta, b_theta } => {
                let b_theta = b_theta.unwrap_or_else(|| linalg::norm(theta));
                ValuationModel::linear(theta.clone(), b_theta, contexts.b_x())?
            }
            ValuationConfig::LinearNormalizedGaussian { dim } => {
                let theta = normalized_gaussian(&mut rng, *dim)?;
                ValuationModel::linear(theta, 1.0, contexts.b_x())?
            }
            ValuationConfig::Nonparametric { fn_id } => ValuationModel::nonparametric(*fn_id)?,
        };

        MarketEnv::new(noise, valuation, contexts)
    }
}

fn normalized_gaussian<R: Rng>(rng: &mut R, dim: usize) -> Result<Vec<f64>, EnvError> {
    if dim == 0 {
        return Err(EnvError::InvalidStream("dimension must be positive".into()));
    }
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::norm(&x);
        if n > 1e-12 {
            return Ok(x.into_iter().map(|v| v / n).collect());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stochastic_config() -> EnvConfig {
        serde_json::from_str(
            r#"{
                "noise": { "kind": "truncated_gaussian",
                           "mean": 0.0, "variance": 0.1, "lo": -1.0, "hi": 1.0 },
                "valuation": { "variant": "linear_normalized_gaussian", "dim": 3 },
                "contexts": { "variant": "gaussian_pool", "dim": 3, "size": 5 }
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn materialize_is_deterministic_in_seed() {
        let cfg = stochastic_config();
        let a = cfg.materialize(7, 1_000).unwrap();
        let b = cfg.materialize(7, 128_000).unwrap();
        let c = cfg.materialize(8, 1_000).unwrap();
        assert_eq!(a.g(&[1.0, 0.0, 0.0]), b.g(&[1.0, 0.0, 0.0]));
        assert_ne!(a.g(&[1.0, 0.0, 0.0]), c.g(&[1.0, 0.0, 0.0]));
        assert!((a.b_y() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn adversarial_pair_is_orthogonal() {
        let cfg: EnvConfig = serde_json::from_str(
            r#"{
                "noise": { "kind": "truncated_gaussian",
                           "mean": 0.0, "variance": 0.1, "lo": -1.0, "hi": 1.0 },
                "valuation": { "variant": "linear", "theta": [0.3, 0.3, 0.3] },
                "contexts": { "variant": "adversarial_orthogonal_pair",
                              "switch_round": "etc_phase_boundary" }
            }"#,
        )
        .unwrap();
        let env = cfg.materialize(3, 1_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = env.next_context(1, &mut rng);
        let second = env.next_context(1_000_000, &mut rng);
        assert_eq!(second, vec![0.0, 1.0, 0.0]);
        assert!(linalg::dot(&first, &second).abs() < 1e-15);
        assert!((linalg::norm(&first) - 1.0).abs() < 1e-12);
        // theta fixed: g(second) = 0.3
        assert!((env.g(&second) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn switch_rule_roundtrip() {
        let fixed: SwitchRule = serde_json::from_str("216").unwrap();
        assert!(matches!(fixed, SwitchRule::Round(216)));
        let named: SwitchRule = serde_json::from_str("\"etc_phase_boundary\"").unwrap();
        assert!(matches!(named, SwitchRule::Named(_)));
    }

    #[test]
    fn nonparametric_config_roundtrip() {
        let cfg: EnvConfig = serde_json::from_str(
            r#"{
                "noise": { "kind": "uniform", "lo": -1.0, "hi": 1.0 },
                "valuation": { "variant": "nonparametric", "fn_id": "cos_radial",
                               "amplitude": 1.0, "scale": 1.0 },
                "contexts": { "variant": "iid_sphere", "dim": 2, "b_x": 1.0 }
            }"#,
        )
        .unwrap();
        let env = cfg.materialize(0, 100).unwrap();
        assert!((env.b_y() - 2.0).abs() < 1e-12);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: EnvConfig = serde_json::from_str(&text).unwrap();
        let env2 = back.materialize(0, 100).unwrap();
        assert_eq!(env.g(&[0.5, 0.0]), env2.g(&[0.5, 0.0]));
    }

    #[test]
    fn missing_file_is_reported_with_path() {
        let err = EnvConfig::load("/nonexistent/env.json").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/env.json"));
    }
}
