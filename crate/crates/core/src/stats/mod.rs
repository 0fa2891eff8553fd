//! Monte Carlo harness and the statistical checks built on it.
//!
//! Every replicate is a pure function of `(config, master seed, replicate
//! index)`. Replicates run in parallel and are folded in index order, so every
//! estimate is bit-stable regardless of the thread count.

mod checks;
mod config;
mod geometry;
mod observe;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::forest::{build, Forest};
use crate::ppp::sample;

pub use checks::*;
pub use config::*;
pub use geometry::*;
pub use observe::*;

/// One-sided 99% normal quantile.
pub const Z99: f64 = 2.326_347_874_040_841;

/// Width of the equality bands, in combined standard errors.
pub const BAND: f64 = 3.0;

/// A Monte Carlo mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// Replicates (or samples) entering the mean.
    pub n: usize,
    /// Share of replicates excluded because they were censored.
    pub censored_fraction: f64,
}

impl Estimate {
    /// Sample mean with `std_error = sd / √n`.
    pub fn from_samples(values: &[f64], censored: usize) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Estimation("no uncensored samples".into()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Ok(Self { mean, std_error: (var / n as f64).sqrt(), n, censored_fraction: censored as f64 / (n + censored) as f64 })
    }

    /// Ratio of sums `Σ s_i / Σ c_i` with the delta-method standard error
    /// `sqrt(Σ (s_i - R c_i)² / (M (M-1) c̄²))`.
    pub fn ratio_of_sums(pairs: &[(f64, f64)], censored: usize) -> Result<Self> {
        let m = pairs.len();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if m == 0 || !(total > 0.0) {
            return Err(Error::Estimation("ratio of sums over an empty denominator".into()));
        }
        let ratio = pairs.iter().map(|p| p.0).sum::<f64>() / total;
        let mean_den = total / m as f64;
        let se = if m > 1 {
            let ss: f64 = pairs.iter().map(|(s, c)| (s - ratio * c).powi(2)).sum();
            (ss / (m as f64 * (m - 1) as f64)).sqrt() / mean_den
        } else {
            0.0
        };
        Ok(Self { mean: ratio, std_error: se, n: m, censored_fraction: censored as f64 / (m + censored) as f64 })
    }

    pub fn relative_error(&self) -> f64 {
        self.std_error / self.mean.abs()
    }

    /// `|a - b| / sqrt(se_a² + se_b²)`.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let se = self.std_error.hypot(other.std_error);
        if se == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean).abs() / se
        }
    }

    /// `1 / mean` with first-order error propagation.
    pub fn reciprocal(&self) -> Self {
        Self { mean: 1.0 / self.mean, std_error: self.std_error / (self.mean * self.mean), ..*self }
    }
}

/// Upper end of the one-sided Clopper–Pearson interval at `level`.
pub fn binomial_upper(successes: usize, trials: usize, level: f64) -> Result<f64> {
    if trials == 0 || successes > trials {
        return Err(Error::Estimation(format!("binomial bound needs 0 ≤ k ≤ n, n > 0 (k={successes}, n={trials})")));
    }
    if successes == trials {
        return Ok(1.0);
    }
    let beta = Beta::new(successes as f64 + 1.0, (trials - successes) as f64)
        .map_err(|e| Error::Estimation(e.to_string()))?;
    Ok(beta.inverse_cdf(level))
}

/// Seed of replicate `r`: the first word of ChaCha8 stream `r` keyed by the master seed.
pub fn replicate_seed(master: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(r as u64);
    rng.next_u64()
}

/// Sample and build replicate `r`.
pub fn replicate_forest(config: &ExperimentConfig, r: usize) -> Result<Forest<f64>> {
    let window = config.window.to_sample_window()?;
    Ok(build(sample::<f64>(config.dim, &window, config.lambda, replicate_seed(config.seed, r))?))
}

/// Run `observe_one` on every replicate in parallel; results come back in
/// replicate order.
pub fn run_replicates<O, F>(config: &ExperimentConfig, observe_one: F) -> Result<Vec<O>>
where
    O: Send,
    F: Fn(usize, &Forest<f64>) -> Result<O> + Sync,
{
    config.validate()?;
    (0..config.replicates)
        .into_par_iter()
        .map(|r| observe_one(r, &replicate_forest(config, r)?))
        .collect()
}

/// Run `job` on a pool of `threads` workers (`None`: rayon's default).
pub fn with_threads<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(job))
}
