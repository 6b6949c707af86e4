//! Bounded noise laws with exact c.d.f. and demand access.
//!
//! Two laws are supported: uniform on a symmetric interval, and a Gaussian
//! truncated to a symmetric interval around its (zero) mean. Both are
//! centered, bounded by `b_xi`, and have an `l_xi`-Lipschitz c.d.f.; the
//! Lipschitz constant is the supremum of the density, derived in closed
//! form per law. Sampling is by inverse transform so each draw consumes
//! exactly one uniform variate.

use super::EnvError;
use rand::Rng;
use serde::{Deserialize, Serialize};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Uniform {
        lo: f64,
        hi: f64,
    },
    TruncatedGaussian {
        mean: f64,
        variance: f64,
        lo: f64,
        hi: f64,
    },
}

/// A centered bounded noise law: `|ξ| ≤ b_xi` a.s. and the c.d.f. is
/// `l_xi`-Lipschitz.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "NoiseKind", into = "NoiseKind")]
pub struct NoiseSpec {
    kind: NoiseKind,
    b_xi: f64,
    l_xi: f64,
    /// Truncated-gaussian cache: (sigma, Phi(lo/sigma), truncated mass).
    #[serde(skip)]
    tg: Option<(f64, f64, f64)>,
}

impl NoiseSpec {
    /// Uniform law on `[lo, hi]` with `lo = -hi` (zero mean).
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, EnvError> {
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(EnvError::InvalidNoise(format!(
                "uniform support [{lo}, {hi}] is not a proper interval"
            )));
        }
        if (lo + hi).abs() > 1e-12 {
            return Err(EnvError::InvalidNoise(format!(
                "uniform support [{lo}, {hi}] is not symmetric about zero"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Uniform { lo, hi },
            b_xi: hi,
            l_xi: 1.0 / (hi - lo),
            tg: None,
        })
    }

    /// Gaussian with the given variance, truncated to `[lo, hi]`. The
    /// truncation must be symmetric about the Gaussian mean and the mean
    /// must be zero, so the law is centered.
    pub fn truncated_gaussian(
        mean: f64,
        variance: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Self, EnvError> {
        if !variance.is_finite() || variance <= 0.0 {
            return Err(EnvError::InvalidNoise(format!(
                "variance must be positive, got {variance}"
            )));
        }
        if lo >= hi {
            return Err(EnvError::InvalidNoise(format!(
                "truncation [{lo}, {hi}] is not a proper interval"
            )));
        }
        if mean.abs() > 1e-12 || ((lo - mean) + (hi - mean)).abs() > 1e-12 {
            return Err(EnvError::InvalidNoise(format!(
                "truncation [{lo}, {hi}] must be symmetric about a zero mean, got mean {mean}"
            )));
        }
        let sigma = variance.sqrt();
        let phi_lo = std_normal_cdf(lo / sigma);
        let phi_hi = std_normal_cdf(hi / sigma);
        let mass = phi_hi - phi_lo;
        if mass <= 0.0 {
            return Err(EnvError::InvalidNoise(
                "truncation interval carries no probability mass".into(),
            ));
        }
        // Density peaks at the mean: f(0) = 1/(sigma * sqrt(2*pi) * mass).
        let l_xi = 1.0 / (sigma * SQRT_2PI * mass);
        Ok(Self {
            kind: NoiseKind::TruncatedGaussian {
                mean,
                variance,
                lo,
                hi,
            },
            b_xi: hi,
            l_xi,
            tg: Some((sigma, phi_lo, mass)),
        })
    }

    pub fn from_kind(kind: NoiseKind) -> Result<Self, EnvError> {
        match kind {
            NoiseKind::Uniform { lo, hi } => Self::uniform(lo, hi),
            NoiseKind::TruncatedGaussian {
                mean,
                variance,
                lo,
                hi,
            } => Self::truncated_gaussian(mean, variance, lo, hi),
        }
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    /// Almost-sure bound on `|ξ|`.
    pub fn b_xi(&self) -> f64 {
        self.b_xi
    }

    /// Lipschitz constant of the c.d.f.
    pub fn l_xi(&self) -> f64 {
        self.l_xi
    }

    /// Exact c.d.f. `F(x) = P(ξ ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            NoiseKind::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            NoiseKind::TruncatedGaussian { mean, lo, hi, .. } => {
                if x <= *lo {
                    return 0.0;
                }
                if x >= *hi {
                    return 1.0;
                }
                let (sigma, phi_lo, mass) = self.tg.expect("cache set at construction");
                (((std_normal_cdf((x - mean) / sigma)) - phi_lo) / mass).clamp(0.0, 1.0)
            }
        }
    }

    /// Demand function `D(δ) = P(ξ ≥ δ) = 1 - F(δ)`: the sale probability
    /// when the posted price sits `δ` above the expected valuation.
    pub fn demand(&self, delta: f64) -> f64 {
        1.0 - self.cdf(delta)
    }

    /// One draw of ξ by inverse transform (one uniform variate consumed).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match &self.kind {
            NoiseKind::Uniform { lo, hi } => lo + u * (hi - lo),
            NoiseKind::TruncatedGaussian { mean, lo, hi, .. } => {
                let (sigma, phi_lo, mass) = self.tg.expect("cache set at construction");
                let z = std_normal_quantile(phi_lo + u * mass);
                (mean + sigma * z).clamp(*lo, *hi)
            }
        }
    }
}

impl TryFrom<NoiseKind> for NoiseSpec {
    type Error = EnvError;
    fn try_from(kind: NoiseKind) -> Result<Self, EnvError> {
        Self::from_kind(kind)
    }
}

impl From<NoiseSpec> for NoiseKind {
    fn from(spec: NoiseSpec) -> NoiseKind {
        spec.kind
    }
}

/// Standard normal c.d.f. via the error function.
pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / SQRT_2))
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal quantile: Acklam's rational approximation polished by
/// two Newton steps against the erf-based c.d.f. (absolute error well below
/// 1e-13 on (1e-300, 1 - 1e-16)).
pub(crate) fn std_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        let err = std_normal_cdf(x) - p;
        let pdf = std_normal_pdf(x);
        if pdf > 0.0 {
            x -= err / pdf;
        }
    }
    x
}
