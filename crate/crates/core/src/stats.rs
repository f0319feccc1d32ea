//! Accumulators and the log2-log2 rate fit.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least two points with positive error, got {usable}")]
    TooFewPoints { usable: usize },
    #[error("step sizes and errors differ in length ({deltas} vs {errors})")]
    LengthMismatch { deltas: usize, errors: usize },
}

/// Running mean and variance (Welford), mergeable with Chan's update.
/// Merging in a fixed order gives bit-reproducible results.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            libm::sqrt(self.variance() / self.count as f64)
        }
    }
}

/// Ordinary least squares fit of `log2(error)` against `log2(delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log2 units.
    pub residual: f64,
    pub used: usize,
    /// Points dropped because their error was not positive.
    pub excluded: usize,
}

pub fn fit_rate(deltas: &[f64], errors: &[f64]) -> Result<RateFit, StatsError> {
    if deltas.len() != errors.len() {
        return Err(StatsError::LengthMismatch {
            deltas: deltas.len(),
            errors: errors.len(),
        });
    }
    let points: Vec<(f64, f64)> = deltas
        .iter()
        .zip(errors)
        .filter(|(d, e)| **d > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(d, e)| (libm::log2(*d), libm::log2(*e)))
        .collect();
    let n = points.len();
    if n < 2 {
        return Err(StatsError::TooFewPoints { usable: n });
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(StatsError::TooFewPoints { usable: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: libm::sqrt(ss / nf),
        used: n,
        excluded: deltas.len() - n,
    })
}

/// Slopes between consecutive rungs: `log2(e_k / e_{k+1}) / log2(d_k / d_{k+1})`.
/// `NaN` where either error is not positive.
pub fn per_rung_rates(deltas: &[f64], errors: &[f64]) -> Vec<f64> {
    deltas
        .windows(2)
        .zip(errors.windows(2))
        .map(|(d, e)| {
            if e[0] > 0.0 && e[1] > 0.0 {
                libm::log2(e[0] / e[1]) / libm::log2(d[0] / d[1])
            } else {
                f64::NAN
            }
        })
        .collect()
}
