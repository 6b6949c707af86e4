//! Context streams: how the market reveals a context each round.

use super::EnvError;
use crate::linalg;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum StreamKind {
    /// Each round draws one vector uniformly from a fixed pool.
    FinitePoolUniform { pool: Vec<Vec<f64>> },
    /// Each round draws uniformly on the sphere of radius `b_x`.
    IidSphere { dim: usize, b_x: f64 },
    /// Emits `first` for rounds `t < switch_round`, `second` afterwards.
    AdversarialTwoPhase {
        first: Vec<f64>,
        second: Vec<f64>,
        switch_round: u64,
    },
}

/// A stream of context vectors with `||x|| ≤ b_x` for every emitted context.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "StreamKind", into = "StreamKind")]
pub struct ContextStream {
    kind: StreamKind,
    b_x: f64,
    dim: usize,
}

impl ContextStream {
    pub fn finite_pool(pool: Vec<Vec<f64>>) -> Result<Self, EnvError> {
        if pool.is_empty() {
            return Err(EnvError::InvalidStream("context pool is empty".into()));
        }
        let dim = pool[0].len();
        if dim == 0 || pool.iter().any(|x| x.len() != dim) {
            return Err(EnvError::InvalidStream(
                "context pool vectors must share a positive dimension".into(),
            ));
        }
        let b_x = pool.iter().map(|x| linalg::norm(x)).fold(0.0f64, f64::max);
        Ok(Self {
            kind: StreamKind::FinitePoolUniform { pool },
            b_x,
            dim,
        })
    }

    pub fn iid_sphere(dim: usize, b_x: f64) -> Result<Self, EnvError> {
        if dim == 0 || !b_x.is_finite() || b_x <= 0.0 {
            return Err(EnvError::InvalidStream(format!(
                "sphere stream needs dim >= 1 and b_x > 0, got dim {dim}, b_x {b_x}"
            )));
        }
        Ok(Self {
            kind: StreamKind::IidSphere { dim, b_x },
            b_x,
            dim,
        })
    }

    pub fn adversarial_two_phase(
        first: Vec<f64>,
        second: Vec<f64>,
        switch_round: u64,
    ) -> Result<Self, EnvError> {
        if first.is_empty() || first.len() != second.len() {
            return Err(EnvError::InvalidStream(
                "adversarial contexts must share a positive dimension".into(),
            ));
        }
        let b_x = linalg::norm(&first).max(linalg::norm(&second));
        let dim = first.len();
        Ok(Self {
            kind: StreamKind::AdversarialTwoPhase {
                first,
                second,
                switch_round,
            },
            b_x,
            dim,
        })
    }

    pub fn from_kind(kind: StreamKind) -> Result<Self, EnvError> {
        match kind {
            StreamKind::FinitePoolUniform { pool } => Self::finite_pool(pool),
            StreamKind::IidSphere { dim, b_x } => Self::iid_sphere(dim, b_x),
            StreamKind::AdversarialTwoPhase {
                first,
                second,
                switch_round,
            } => Self::adversarial_two_phase(first, second, switch_round),
        }
    }

    pub fn kind(&self) -> &StreamKind {
        &self.kind
    }

    pub fn b_x(&self) -> f64 {
        self.b_x
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Context for round `t` (1-based).
    pub fn next_context<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            StreamKind::FinitePoolUniform { pool } => pool[rng.random_range(0..pool.len())].clone(),
            StreamKind::IidSphere { dim, b_x } => {
                // Normalized Gaussian direction scaled to the sphere radius.
                loop {
                    let x: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                    let n = linalg::norm(&x);
                    if n > 1e-12 {
                        return x.iter().map(|v| v / n * b_x).collect();
                    }
                }
            }
            StreamKind::AdversarialTwoPhase {
                first,
                second,
                switch_round,
            } => {
                if t < *switch_round {
                    first.clone()
                } else {
                    second.clone()
                }
            }
        }
    }
}

impl TryFrom<StreamKind> for ContextStream {
    type Error = EnvError;
    fn try_from(kind: StreamKind) -> Result<Self, EnvError> {
        Self::from_kind(kind)
    }
}

impl From<ContextStream> for StreamKind {
    fn from(s: ContextStream) -> StreamKind {
        s.kind
    }
}
