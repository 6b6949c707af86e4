//! Expected-valuation models: the hidden function `g` mapping a context to
//! the buyer's expected valuation.

use super::EnvError;
use crate::linalg;
use serde::{Deserialize, Serialize};

/// Named non-parametric test functions with analytically known Hölder
/// constants. There is no canonical non-parametric valuation, so the lab
/// fixes a small set of smooth radial shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn_id", rename_all = "snake_case")]
pub enum TestFunction {
    /// `g(x) = amplitude * cos(pi * ||x||^2 / scale^2)`, Lipschitz with
    /// constant `2 * pi * amplitude / scale` on the ball of radius `scale`.
    CosRadial { amplitude: f64, scale: f64 },
    /// `g(x) = amplitude * (||x|| / scale)^beta`, (amplitude/scale^beta,
    /// beta)-Hölder.
    PowerRadial {
        amplitude: f64,
        scale: f64,
        beta: f64,
    },
}

impl TestFunction {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let r = linalg::norm(x);
        match *self {
            TestFunction::CosRadial { amplitude, scale } => {
                amplitude * (std::f64::consts::PI * r * r / (scale * scale)).cos()
            }
            TestFunction::PowerRadial {
                amplitude,
                scale,
                beta,
            } => amplitude * (r / scale).powf(beta),
        }
    }

    /// Hölder exponent of the function.
    pub fn beta(&self) -> f64 {
        match *self {
            TestFunction::CosRadial { .. } => 1.0,
            TestFunction::PowerRadial { beta, .. } => beta,
        }
    }

    /// Hölder constant, valid on the ball of radius `scale`.
    pub fn holder_constant(&self) -> f64 {
        match *self {
            TestFunction::CosRadial { amplitude, scale } => {
                2.0 * std::f64::consts::PI * amplitude / scale
            }
            TestFunction::PowerRadial {
                amplitude,
                scale,
                beta,
            } => amplitude / scale.powf(beta),
        }
    }

    /// Bound on `|g|` over the ball of radius `scale`.
    pub fn amplitude(&self) -> f64 {
        match *self {
            TestFunction::CosRadial { amplitude, .. } => amplitude,
            TestFunction::PowerRadial { amplitude, .. } => amplitude,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ValuationKind {
    /// `g(x) = xᵀθ` with `||θ|| ≤ b_theta`.
    Linear { theta: Vec<f64>, b_theta: f64 },
    /// Hölder-continuous `g` given by a named test function.
    Nonparametric {
        #[serde(flatten)]
        fn_id: TestFunction,
        l_g: f64,
        beta: f64,
    },
}

/// The hidden expected-valuation function together with its bound `b_g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValuationModel {
    kind: ValuationKind,
    b_g: f64,
}

impl ValuationModel {
    /// Linear valuation `g(x) = xᵀθ`. `b_theta` must dominate `||θ||`;
    /// `b_g = b_x * b_theta`.
    pub fn linear(theta: Vec<f64>, b_theta: f64, b_x: f64) -> Result<Self, EnvError> {
        if theta.is_empty() {
            return Err(EnvError::InvalidValuation("theta must be non-empty".into()));
        }
        let norm = linalg::norm(&theta);
        if norm > b_theta + 1e-12 {
            return Err(EnvError::InvalidValuation(format!(
                "||theta|| = {norm} exceeds the bound b_theta = {b_theta}"
            )));
        }
        Ok(Self {
            kind: ValuationKind::Linear { theta, b_theta },
            b_g: b_x * b_theta,
        })
    }

    /// Non-parametric valuation from a named test function; the Hölder
    /// parameters are derived from the function itself.
    pub fn nonparametric(fn_id: TestFunction) -> Result<Self, EnvError> {
        let beta = fn_id.beta();
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(EnvError::InvalidValuation(format!(
                "Hölder exponent must lie in (0, 1], got {beta}"
            )));
        }
        Ok(Self {
            b_g: fn_id.amplitude(),
            kind: ValuationKind::Nonparametric {
                l_g: fn_id.holder_constant(),
                beta,
                fn_id,
            },
        })
    }

    pub fn from_kind(kind: ValuationKind, b_x: f64) -> Result<Self, EnvError> {
        match kind {
            ValuationKind::Linear { theta, b_theta } => Self::linear(theta, b_theta, b_x),
            ValuationKind::Nonparametric { fn_id, .. } => Self::nonparametric(fn_id),
        }
    }

    pub fn kind(&self) -> &ValuationKind {
        &self.kind
    }

    /// Bound on `|g(x)|` over admissible contexts.
    pub fn b_g(&self) -> f64 {
        self.b_g
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, ValuationKind::Linear { .. })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ValuationKind::Linear { theta, .. } => linalg::dot(theta, x),
            ValuationKind::Nonparametric { fn_id, .. } => fn_id.evaluate(x),
        }
    }

    /// Hölder parameters `(l_g, beta)`; linear models are `(||θ||, 1)`-Hölder.
    pub fn holder(&self) -> (f64, f64) {
        match &self.kind {
            ValuationKind::Linear { theta, .. } => (linalg::norm(theta), 1.0),
            ValuationKind::Nonparametric { l_g, beta, .. } => (*l_g, *beta),
        }
    }
}
