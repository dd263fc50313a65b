//! Goodness-of-fit and dependence tests used to audit simulation output.
//!
//! All tests are deterministic functions of their inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::moments::{MomentAccumulator, PairedAccumulator};
use crate::error::{Error, Result};

/// Significance level used throughout the laboratory.
pub const DEFAULT_ALPHA: f64 = 0.01;

pub const KS_MIN_SAMPLES: usize = 30;
pub const COUNT_TEST_MIN_SAMPLES: usize = 100;
pub const NORMALITY_MIN_SAMPLES: usize = 500;

/// Outcome of one hypothesis test; serialises as one JSON row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub params: BTreeMap<String, f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub alpha: f64,
    pub passed: bool,
}

impl TestReport {
    pub fn new(test: &str, statistic: f64, p_value: f64, n: usize, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test: test.to_owned(),
            params: BTreeMap::new(),
            statistic,
            p_value,
            n,
            alpha,
            passed: p_value > alpha,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_owned(), value);
        self
    }

    /// Re-evaluates the verdict at a different level.
    pub fn at_level(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.passed = self.p_value > alpha;
        self
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_normal_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    2.0 * std_normal().cdf(-z.abs())
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Small-argument series (Jacobi theta transform) converges quickly here.
        let c = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let a = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            sum += (a * j * j).exp();
        }
        (1.0 - c * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov-Smirnov statistic `D_n` against `cdf`; sorts `xs`.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic p-value with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let en = (n as f64).sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

/// KS test of inter-point gaps against Exponential(`rate`).
pub fn ks_exponential(gaps: &[f64], rate: f64) -> Result<TestReport> {
    if !(rate > 0.0) {
        return Err(Error::Parameter(format!("exponential rate must be > 0, got {rate}")));
    }
    if gaps.len() < KS_MIN_SAMPLES {
        return Err(Error::Contract(format!(
            "KS test needs at least {KS_MIN_SAMPLES} gaps, got {}",
            gaps.len()
        )));
    }
    if let Some(g) = gaps.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::Data(format!("gap {g} is not positive")));
    }
    let mut xs = gaps.to_vec();
    let d = ks_statistic(&mut xs, |x| 1.0 - (-rate * x).exp());
    Ok(TestReport::new("ks_exponential", d, ks_p_value(d, xs.len()), xs.len(), DEFAULT_ALPHA)
        .with_param("rate", rate))
}

fn count_moments(counts: &[f64]) -> Result<MomentAccumulator> {
    if counts.len() < COUNT_TEST_MIN_SAMPLES {
        return Err(Error::Contract(format!(
            "need at least {COUNT_TEST_MIN_SAMPLES} replicas, got {}",
            counts.len()
        )));
    }
    Ok(MomentAccumulator::from_samples(counts.iter().copied()))
}

/// Variance-to-mean ratio of counts, referred to chi-square with `n - 1`
/// degrees of freedom (two-sided).
pub fn dispersion_index(counts: &[f64]) -> Result<TestReport> {
    let acc = count_moments(counts)?;
    let var = acc.variance()?;
    if var == 0.0 || acc.mean() <= 0.0 {
        return Err(Error::Undefined("dispersion of constant or nonpositive counts".into()));
    }
    let index = var / acc.mean();
    let dof = (counts.len() - 1) as f64;
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    let cdf = chi.cdf(dof * index);
    let p = 2.0 * cdf.min(1.0 - cdf);
    Ok(TestReport::new("dispersion_index", index, p, counts.len(), DEFAULT_ALPHA))
}

/// Pearson correlation with a Fisher-z two-sided p-value.
pub fn cross_correlation(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.len() != b.len() {
        return Err(Error::Data(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < COUNT_TEST_MIN_SAMPLES {
        return Err(Error::Contract(format!(
            "need at least {COUNT_TEST_MIN_SAMPLES} replicas, got {}",
            a.len()
        )));
    }
    let mut acc = PairedAccumulator::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.push(x, y);
    }
    let r = acc.correlation()?;
    let z = r.atanh() * ((a.len() - 3) as f64).sqrt();
    let p = if r.abs() >= 1.0 { 0.0 } else { two_sided_normal_p(z) };
    Ok(TestReport::new("cross_correlation", r, p, a.len(), DEFAULT_ALPHA))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub anderson_darling: TestReport,
    /// Plain KS with estimated parameters; conservative, reported for reference.
    pub kolmogorov_smirnov: TestReport,
}

/// Anderson-Darling p-value for the composite normal hypothesis, from the
/// modified statistic `A*^2` (D'Agostino & Stephens).
pub fn anderson_darling_normal_p(a_star: f64) -> f64 {
    let a = a_star;
    let p = if a >= 100.0 {
        0.0
    } else if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    p.clamp(0.0, 1.0)
}

/// Tests normality with mean and variance estimated from the sample.
pub fn normality_test(samples: &[f64]) -> Result<NormalityReport> {
    let n = samples.len();
    if n < NORMALITY_MIN_SAMPLES {
        return Err(Error::Contract(format!(
            "normality test needs at least {NORMALITY_MIN_SAMPLES} samples, got {n}"
        )));
    }
    let acc = MomentAccumulator::from_samples(samples.iter().copied());
    let var = acc.variance()?;
    if !(var > 0.0) {
        return Err(Error::Undefined("normality of a constant sample".into()));
    }
    let (mean, sd) = (acc.mean(), var.sqrt());
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let cdf: Vec<f64> = xs
        .iter()
        .map(|&x| normal_cdf((x - mean) / sd).clamp(1e-300, 1.0 - 1e-16))
        .collect();
    let mut s = 0.0;
    for i in 0..n {
        let w = (2 * i + 1) as f64;
        s += w * (cdf[i].ln() + (1.0 - cdf[n - 1 - i]).ln());
    }
    let a2 = -nf - s / nf;
    let a_star = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let ad = TestReport::new(
        "anderson_darling_normal",
        a_star,
        anderson_darling_normal_p(a_star),
        n,
        DEFAULT_ALPHA,
    );

    let d = ks_statistic(&mut xs, |x| normal_cdf((x - mean) / sd));
    let ks = TestReport::new("ks_normal", d, ks_p_value(d, n), n, DEFAULT_ALPHA);
    Ok(NormalityReport {
        anderson_darling: ad,
        kolmogorov_smirnov: ks,
    })
}
