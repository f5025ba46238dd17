//! Bias-corrected and accelerated bootstrap intervals.
//!
//! Bias `z0` comes from where the point estimate falls in the bootstrap
//! distribution (ties count half), acceleration from jackknife skewness.
//! Each resample draws from its own RNG derived from `(seed, index)`, so
//! the result does not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: String,
    pub resamples: usize,
}

impl ConfidenceInterval {
    pub fn degenerate(point: f64, cfg: &BootstrapConfig) -> Self {
        ConfidenceInterval {
            point,
            lo: point,
            hi: point,
            level: cfg.level,
            method: "BCa".into(),
            resamples: cfg.resamples,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Linear interpolation between order statistics, as numpy's default.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// BCa interval for `statistic` over `items`.
pub fn bca_interval<T, F>(items: &[T], statistic: F, cfg: &BootstrapConfig) -> Result<ConfidenceInterval>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    let n = items.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least 2 values, got {n}"
        )));
    }
    if cfg.resamples < 2 || !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs >= 2 resamples and a level in (0, 1), got {} and {}",
            cfg.resamples, cfg.level
        )));
    }
    let point = statistic(items);

    let mut boot: Vec<f64> = (0..cfg.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(cfg.seed, &format!("bootstrap/{b}"));
            let sample: Vec<T> = (0..n).map(|_| items[rng.gen_range(0..n)].clone()).collect();
            statistic(&sample)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    if boot[0] == boot[boot.len() - 1] && boot[0] == point {
        return Ok(ConfidenceInterval::degenerate(point, cfg));
    }

    let b = boot.len() as f64;
    let below = boot.iter().filter(|&&x| x < point).count() as f64;
    let at_or_below = boot.iter().filter(|&&x| x <= point).count() as f64;
    // keep z0 finite when the point estimate sits outside the distribution
    let frac = ((below + at_or_below) / (2.0 * b)).clamp(0.5 / b, 1.0 - 0.5 / b);
    let normal = Normal::standard();
    let z0 = normal.inverse_cdf(frac);

    let jack: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rest: Vec<T> = Vec::with_capacity(n - 1);
            rest.extend_from_slice(&items[..i]);
            rest.extend_from_slice(&items[i + 1..]);
            statistic(&rest)
        })
        .collect();
    let jmean = jack.iter().sum::<f64>() / n as f64;
    let (num, den) = jack.iter().fold((0.0, 0.0), |(num, den), &j| {
        let d = jmean - j;
        (num + d * d * d, den + d * d)
    });
    let accel = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };

    let alpha = (1.0 - cfg.level) / 2.0;
    let adjusted = |q: f64| {
        let z = normal.inverse_cdf(q);
        let shifted = z0 + (z0 + z) / (1.0 - accel * (z0 + z));
        normal.cdf(shifted)
    };
    let lo = quantile(&boot, adjusted(alpha)).min(point);
    let hi = quantile(&boot, adjusted(1.0 - alpha)).max(point);
    Ok(ConfidenceInterval {
        point,
        lo,
        hi,
        level: cfg.level,
        method: "BCa".into(),
        resamples: cfg.resamples,
    })
}

/// BCa interval of the mean.
pub fn bca_mean(values: &[f64], cfg: &BootstrapConfig) -> Result<ConfidenceInterval> {
    bca_interval(values, |xs| xs.iter().sum::<f64>() / xs.len() as f64, cfg)
}
