//! Streaming, mergeable first and second moments (Welford / Chan et al.).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Count, mean and sum of squared deviations of a stream of reals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let mut acc = Self::new();
        for v in samples {
            acc.push(v);
        }
        acc
    }

    pub fn push(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        Self {
            n,
            mean: self.mean + delta * nb / n as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n as f64,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance `m2 / (n - 1)`.
    pub fn variance(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::Undefined(format!("variance of {} sample(s)", self.n)));
        }
        Ok(self.m2 / (self.n - 1) as f64)
    }

    pub fn std_err(&self) -> Result<f64> {
        Ok((self.variance()? / self.n as f64).sqrt())
    }

    /// Normal-approximation interval `mean +- z * se`.
    pub fn mean_ci(&self, z: f64) -> Result<(f64, f64)> {
        let se = self.std_err()?;
        Ok((self.mean - z * se, self.mean + z * se))
    }

    /// Interval for the variance using the relative standard error `sqrt(2 / (n - 1))`.
    pub fn variance_ci(&self, z: f64) -> Result<(f64, f64)> {
        let v = self.variance()?;
        let rel = (2.0 / (self.n - 1) as f64).sqrt();
        Ok((v * (1.0 - z * rel), v * (1.0 + z * rel)))
    }
}

/// Moments of a paired series, including the co-moment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairedAccumulator {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    co_moment: f64,
}

impl PairedAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.co_moment += dx * (y - self.mean_y);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let (na, nb, nf) = (self.n as f64, other.n as f64, n as f64);
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        Self {
            n,
            mean_x: self.mean_x + dx * nb / nf,
            mean_y: self.mean_y + dy * nb / nf,
            m2_x: self.m2_x + other.m2_x + dx * dx * na * nb / nf,
            m2_y: self.m2_y + other.m2_y + dy * dy * na * nb / nf,
            co_moment: self.co_moment + other.co_moment + dx * dy * na * nb / nf,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn x(&self) -> MomentAccumulator {
        MomentAccumulator { n: self.n, mean: self.mean_x, m2: self.m2_x }
    }

    pub fn y(&self) -> MomentAccumulator {
        MomentAccumulator { n: self.n, mean: self.mean_y, m2: self.m2_y }
    }

    pub fn covariance(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::Undefined(format!("covariance of {} pair(s)", self.n)));
        }
        Ok(self.co_moment / (self.n - 1) as f64)
    }

    pub fn correlation(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::Undefined(format!("correlation of {} pair(s)", self.n)));
        }
        if self.m2_x == 0.0 || self.m2_y == 0.0 {
            return Err(Error::Undefined("correlation of a constant series".into()));
        }
        Ok((self.co_moment / (self.m2_x * self.m2_y).sqrt()).clamp(-1.0, 1.0))
    }
}
