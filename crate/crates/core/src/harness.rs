//! Experiment harness: seeded repetitions over horizon grids, regret
//! aggregation, log-log slope fitting and CSV persistence.
//!
//! Runs are independent work items executed on a worker pool of
//! configurable size; each run owns its learner state and RNG, and results
//! are ordered by `(horizon, repetition)` regardless of completion order,
//! so any `--parallel` width produces the same records as a sequential
//! execution.

use crate::baselines::{self, EtcConfig};
use crate::env::{EnvConfig, EnvError, MarketEnv, ValuationKind};
use crate::linear::{self, LinearBounds, LinearVapeConfig};
use crate::nonparam::{self, NonparamBounds, NonparamConfig};
use crate::seed::derive_run_seed;
use crate::trace::{RunError, RunTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("run (T = {horizon}, rep = {repetition}, seed = {seed}) failed: {source}")]
    Run {
        horizon: u64,
        repetition: u64,
        seed: u64,
        #[source]
        source: RunError,
    },
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("slope fit: {0}")]
    SlopeFit(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {reason}")]
    CsvParse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    VapeLinear,
    VapeNonparam,
    Etc,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Algorithm::VapeLinear => "vape_linear",
            Algorithm::VapeNonparam => "vape_nonparam",
            Algorithm::Etc => "etc",
        };
        f.write_str(name)
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vape_linear" => Ok(Algorithm::VapeLinear),
            "vape_nonparam" => Ok(Algorithm::VapeNonparam),
            "etc" => Ok(Algorithm::Etc),
            other => Err(format!(
                "unknown algorithm '{other}' (expected vape_linear, vape_nonparam or etc)"
            )),
        }
    }
}

/// A full experiment: one algorithm, one environment, a horizon grid and
/// seeded repetitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    pub env_config: PathBuf,
    pub horizons: Vec<u64>,
    pub repetitions: u64,
    pub base_seed: u64,
    pub output_path: PathBuf,
    /// Worker pool width; 1 = sequential.
    #[serde(default = "default_parallel")]
    pub parallel: usize,
}

fn default_parallel() -> usize {
    1
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.horizons.is_empty() {
            return Err(HarnessError::InvalidSpec("no horizons given".into()));
        }
        if !self.horizons.windows(2).all(|w| w[0] < w[1]) {
            return Err(HarnessError::InvalidSpec(format!(
                "horizons must be strictly increasing, got {:?}",
                self.horizons
            )));
        }
        if self.repetitions < 1 {
            return Err(HarnessError::InvalidSpec("repetitions must be >= 1".into()));
        }
        Ok(())
    }
}

/// One `(horizon, repetition)` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub algorithm: Algorithm,
    pub horizon: u64,
    pub repetition: u64,
    pub seed: u64,
    pub regret: f64,
    pub exploration_rounds: u64,
    pub seconds: f64,
}

/// Build the algorithm configuration the schedule prescribes for `horizon`
/// and execute one seeded run.
pub fn run_algorithm(
    algorithm: Algorithm,
    env: &MarketEnv,
    horizon: u64,
    seed: u64,
) -> Result<RunTrace, RunError> {
    match algorithm {
        Algorithm::VapeLinear => {
            let b_theta = match env.valuation().kind() {
                ValuationKind::Linear { b_theta, .. } => *b_theta,
                _ => {
                    return Err(RunError::InvalidConfig(
                        "vape_linear requires a linear-valuation environment".into(),
                    ))
                }
            };
            let bounds = LinearBounds::from_env(env, b_theta);
            let config = LinearVapeConfig::from_horizon(horizon, env.dim(), bounds)?;
            linear::run(env, &config, seed)
        }
        Algorithm::VapeNonparam => {
            let (l_g, beta) = env.valuation().holder();
            let bounds = NonparamBounds::from_env(env);
            let config = NonparamConfig::from_horizon(horizon, env.dim(), beta, l_g, bounds)?;
            nonparam::run(env, &config, seed)
        }
        Algorithm::Etc => {
            let config = EtcConfig::from_horizon(horizon);
            baselines::etc_run(env, &config, seed)
        }
    }
}

/// Execute every `(horizon, repetition)` pair of the spec. Deterministic:
/// the same spec produces identical records up to the wall-clock column.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<SummaryRecord>, HarnessError> {
    let env_config = EnvConfig::load(&spec.env_config)?;
    run_experiment_with_env(spec, &env_config)
}

/// Same as [`run_experiment`] but with an already-parsed env config.
pub fn run_experiment_with_env(
    spec: &ExperimentSpec,
    env_config: &EnvConfig,
) -> Result<Vec<SummaryRecord>, HarnessError> {
    spec.validate()?;
    let mut items = Vec::new();
    for &horizon in &spec.horizons {
        for repetition in 0..spec.repetitions {
            items.push((horizon, repetition));
        }
    }

    let run_one = |&(horizon, repetition): &(u64, u64)| -> Result<SummaryRecord, HarnessError> {
        let seed = derive_run_seed(spec.base_seed, horizon, repetition);
        let wrap = |source: RunError| HarnessError::Run {
            horizon,
            repetition,
            seed,
            source,
        };
        let env = env_config.materialize(spec.base_seed, horizon)?;
        let started = Instant::now();
        let trace = run_algorithm(spec.algorithm, &env, horizon, seed).map_err(wrap)?;
        Ok(SummaryRecord {
            algorithm: spec.algorithm,
            horizon,
            repetition,
            seed,
            regret: trace.cumulative_regret,
            exploration_rounds: trace.exploration_count,
            seconds: started.elapsed().as_secs_f64(),
        })
    };

    let mut records = if spec.parallel <= 1 {
        items.iter().map(run_one).collect::<Result<Vec<_>, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.parallel)
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?;
        pool.install(|| items.par_iter().map(run_one).collect::<Result<Vec<_>, _>>())?
    };
    records.sort_by_key(|r| (r.horizon, r.repetition));
    Ok(records)
}

/// Ordinary least squares of `ln(regret)` on `ln(T)`; returns
/// `(slope, intercept)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64), HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::SlopeFit(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    for &(t, r) in points {
        if !(t > 0.0 && r > 0.0) {
            return Err(HarnessError::SlopeFit(format!(
                "points must be positive, got ({t}, {r})"
            )));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, r)| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::SlopeFit("all horizons identical".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Mean regret per horizon, ordered by horizon.
pub fn mean_regret_by_horizon(records: &[SummaryRecord]) -> Vec<(u64, f64)> {
    let mut horizons: Vec<u64> = records.iter().map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    horizons
        .into_iter()
        .map(|t| {
            let regrets: Vec<f64> = records
                .iter()
                .filter(|r| r.horizon == t)
                .map(|r| r.regret)
                .collect();
            (t, regrets.iter().sum::<f64>() / regrets.len() as f64)
        })
        .collect()
}

/// Six-significant-digit decimal representation used for regret columns.
fn format_sig6(x: f64) -> String {
    format!("{x:.5e}")
}

const CSV_HEADER: &str = "algorithm,T,repetition,seed,regret,exploration_rounds,seconds";

/// Write one row per record under the fixed header. Regrets carry six
/// significant digits; the file is newline-terminated UTF-8.
pub fn emit_csv(records: &[SummaryRecord], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io_err = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3}\n",
            r.algorithm,
            r.horizon,
            r.repetition,
            r.seed,
            format_sig6(r.regret),
            r.exploration_rounds,
            r.seconds
        ));
    }
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(())
}

/// Read back a summary CSV produced by [`emit_csv`].
pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRecord>, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        other => {
            return Err(HarnessError::CsvParse {
                path: path.display().to_string(),
                line: 1,
                reason: format!("unexpected header {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parse = |reason: String| HarnessError::CsvParse {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse(format!("expected 7 fields, got {}", fields.len())));
        }
        records.push(SummaryRecord {
            algorithm: Algorithm::from_str(fields[0]).map_err(&parse)?,
            horizon: fields[1].parse().map_err(|e| parse(format!("T: {e}")))?,
            repetition: fields[2]
                .parse()
                .map_err(|e| parse(format!("repetition: {e}")))?,
            seed: fields[3].parse().map_err(|e| parse(format!("seed: {e}")))?,
            regret: fields[4]
                .parse()
                .map_err(|e| parse(format!("regret: {e}")))?,
            exploration_rounds: fields[5]
                .parse()
                .map_err(|e| parse(format!("exploration_rounds: {e}")))?,
            seconds: fields[6]
                .parse()
                .map_err(|e| parse(format!("seconds: {e}")))?,
        });
    }
    Ok(records)
}

/// Per-horizon aggregate row of the curve file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub horizon: u64,
    pub mean_regret: f64,
    pub stderr: f64,
    pub theory_ref: f64,
}

/// Aggregate per-horizon curve data: mean regret, standard error across
/// repetitions, and the reference curve `C T^(2/3) (ln T)^(2/3)` with `C`
/// anchored at the smallest horizon.
pub fn curve_points(records: &[SummaryRecord]) -> Vec<CurvePoint> {
    let means = mean_regret_by_horizon(records);
    let theory_shape = |t: f64| t.powf(2.0 / 3.0) * t.ln().powf(2.0 / 3.0);
    let c = means
        .first()
        .map(|&(t, m)| m / theory_shape(t as f64))
        .unwrap_or(0.0);
    means
        .into_iter()
        .map(|(t, mean)| {
            let regrets: Vec<f64> = records
                .iter()
                .filter(|r| r.horizon == t)
                .map(|r| r.regret)
                .collect();
            let n = regrets.len() as f64;
            let stderr = if regrets.len() < 2 {
                0.0
            } else {
                let var = regrets.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            };
            CurvePoint {
                horizon: t,
                mean_regret: mean,
                stderr,
                theory_ref: c * theory_shape(t as f64),
            }
        })
        .collect()
}

/// Write the per-horizon aggregation: `T,mean_regret,stderr,theory_ref`.
pub fn emit_curve_csv(
    records: &[SummaryRecord],
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io_err = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = String::from("T,mean_regret,stderr,theory_ref\n");
    for p in curve_points(records) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.horizon,
            format_sig6(p.mean_regret),
            format_sig6(p.stderr),
            format_sig6(p.theory_ref)
        ));
    }
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(())
}
