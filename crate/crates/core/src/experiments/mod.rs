//! Named, reproducible Monte Carlo experiments.
//!
//! Every replica draws from its own stream, derived from the master seed and
//! the label `(experiment, replica, role)`. Replicas run on the rayon pool
//! but results are collected and reduced in replica order, so outputs do not
//! depend on the number of worker threads.

mod oracle;
mod selftest;
mod shock;
mod stationary;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randgen::StreamKey;
use crate::shock_coupling::check_shock_regime;
use crate::stats::{MomentAccumulator, TestReport};

pub use selftest::{selftest, SelftestReport};

/// Largest corrupted fraction tolerated before a run is declared failed.
pub const MAX_CORRUPTED_FRACTION: f64 = 1e-3;

/// Width of the Monte Carlo acceptance bands, in standard errors.
pub const BAND_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    MeanVarZ,
    FluxMoments,
    BurkeTest,
    LppCheck,
    Ulam,
    IdentityA47,
    CltDependence,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::MeanVarZ,
        ExperimentName::FluxMoments,
        ExperimentName::BurkeTest,
        ExperimentName::LppCheck,
        ExperimentName::Ulam,
        ExperimentName::IdentityA47,
        ExperimentName::CltDependence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::MeanVarZ => "mean_var_z",
            ExperimentName::FluxMoments => "flux_moments",
            ExperimentName::BurkeTest => "burke_test",
            ExperimentName::LppCheck => "lpp_check",
            ExperimentName::Ulam => "ulam",
            ExperimentName::IdentityA47 => "identity_a47",
            ExperimentName::CltDependence => "clt_dependence",
        }
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    /// Source intensity of the stationary run in `burke_test`.
    pub gamma: Option<f64>,
    pub t: Option<f64>,
    /// Box width, or the observation point for `identity_a47`.
    pub x: Option<f64>,
    /// Number of uniform points for `ulam`.
    pub points: Option<usize>,
    pub replicas: usize,
    pub master_seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(name: ExperimentName, replicas: usize, master_seed: u64) -> Self {
        Self {
            name,
            lambda: None,
            rho: None,
            gamma: None,
            t: None,
            x: None,
            points: None,
            replicas,
            master_seed,
            out_dir: None,
        }
    }

    pub fn with_lambda_rho(mut self, lambda: f64, rho: f64) -> Self {
        self.lambda = Some(lambda);
        self.rho = Some(rho);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_x(mut self, x: f64) -> Self {
        self.x = Some(x);
        self
    }

    pub fn with_points(mut self, n: usize) -> Self {
        self.points = Some(n);
        self
    }

    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }

    fn require(&self, field: &str, v: Option<f64>) -> Result<f64> {
        let v = v.ok_or_else(|| Error::Config(format!("{} needs --{field}", self.name)))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("{field} must be finite and > 0, got {v}")));
        }
        Ok(v)
    }

    fn shock_params(&self) -> Result<(f64, f64)> {
        let lambda = self.require("lambda", self.lambda)?;
        let rho = self.require("rho", self.rho)?;
        check_shock_regime(lambda, rho).map_err(|e| Error::Config(e.to_string()))?;
        Ok((lambda, rho))
    }

    /// Checks the invariants of the named experiment without sampling.
    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be positive".into()));
        }
        match self.name {
            ExperimentName::MeanVarZ | ExperimentName::CltDependence => {
                self.shock_params()?;
                self.require("t", self.t)?;
                if let Some(x) = self.x {
                    self.require("x", Some(x))?;
                }
            }
            ExperimentName::IdentityA47 => {
                self.shock_params()?;
                self.require("t", self.t)?;
                self.require("x", self.x)?;
            }
            ExperimentName::FluxMoments => {
                self.shock_params()?;
                self.require("t", self.t)?;
                self.require("x", self.x)?;
            }
            ExperimentName::BurkeTest => {
                self.require("gamma", self.gamma)?;
                self.require("t", self.t)?;
                self.require("x", self.x)?;
            }
            ExperimentName::LppCheck => {
                let lambda = self.require("lambda", self.lambda)?;
                let rho = self.require("rho", self.rho)?;
                let t = self.require("t", self.t)?;
                let x = self.require("x", self.x)?;
                if lambda * x > oracle::LPP_MAX_BOUNDARY_MEAN || rho * t > oracle::LPP_MAX_BOUNDARY_MEAN {
                    return Err(Error::Config(format!(
                        "lpp_check needs lambda * x and rho * t <= {}",
                        oracle::LPP_MAX_BOUNDARY_MEAN
                    )));
                }
            }
            ExperimentName::Ulam => match self.points {
                Some(n) if n > 0 => {}
                _ => return Err(Error::Config("ulam needs --points >= 1".into())),
            },
        }
        Ok(())
    }

    fn key(&self) -> StreamKey {
        StreamKey::new(self.master_seed)
    }
}

/// `D = 2 (rho - 1/lambda) / (lambda - 1/rho)^2`.
pub fn diffusion_constant(lambda: f64, rho: f64) -> f64 {
    2.0 * (rho - 1.0 / lambda) / (lambda - 1.0 / rho).powi(2)
}

/// Smallest box width for a second-class run to horizon `t`:
/// `(rho/lambda) t + 10 sqrt(D t) + 5/lambda`.
pub fn margin_width(lambda: f64, rho: f64, t: f64) -> f64 {
    rho / lambda * t + 10.0 * (diffusion_constant(lambda, rho) * t).sqrt() + 5.0 / lambda
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub std_err: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n: u64,
}

impl Estimate {
    pub fn plain(name: &str, value: f64, n: u64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            std_err: None,
            ci_low: None,
            ci_high: None,
            n,
        }
    }

    /// Sample mean with a 95% normal interval.
    pub fn mean(name: &str, acc: &MomentAccumulator) -> Self {
        let se = acc.std_err().ok();
        let ci = acc.mean_ci(1.96).ok();
        Self {
            name: name.to_owned(),
            value: acc.mean(),
            std_err: se,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
            n: acc.count(),
        }
    }

    /// Sample variance with a 95% normal-theory interval.
    pub fn variance(name: &str, acc: &MomentAccumulator) -> Self {
        let v = acc.variance().unwrap_or(f64::NAN);
        let ci = acc.variance_ci(1.96).ok();
        Self {
            name: name.to_owned(),
            value: v,
            std_err: ci.map(|c| (c.1 - c.0) / (2.0 * 1.96)),
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
            n: acc.count(),
        }
    }
}

/// One pass/fail decision: `lower <= observed <= upper` (open ends allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub observed: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Verdict {
    pub fn within(name: &str, observed: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let ok = observed.is_finite()
            && lower.is_none_or(|l| observed >= l)
            && upper.is_none_or(|u| observed <= u);
        Self {
            name: name.to_owned(),
            observed,
            lower,
            upper,
            passed: ok,
        }
    }

    /// Strict upper bound `observed < upper`.
    pub fn below(name: &str, observed: f64, upper: f64) -> Self {
        Self {
            name: name.to_owned(),
            observed,
            lower: None,
            upper: Some(upper),
            passed: observed < upper,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.to_owned(),
            observed: if ok { 1.0 } else { 0.0 },
            lower: Some(1.0),
            upper: Some(1.0),
            passed: ok,
        }
    }

    pub fn from_test(report: &TestReport) -> Self {
        Self {
            name: report.test.clone(),
            observed: report.p_value,
            lower: Some(report.alpha),
            upper: None,
            passed: report.passed,
        }
    }
}

fn mean_band(name: &str, acc: &MomentAccumulator, target: f64, target_var: f64) -> Verdict {
    let half = BAND_SIGMAS * (target_var / acc.count() as f64).sqrt();
    Verdict::within(name, acc.mean(), Some(target - half), Some(target + half))
}

fn variance_band(name: &str, acc: &MomentAccumulator, target_var: f64) -> Verdict {
    let n = acc.count() as f64;
    let half = BAND_SIGMAS * target_var * (2.0 / (n - 1.0)).sqrt();
    let observed = acc.variance().unwrap_or(f64::NAN);
    Verdict::within(name, observed, Some(target_var - half), Some(target_var + half))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub params: BTreeMap<String, f64>,
    pub estimates: Vec<Estimate>,
    pub tests: Vec<TestReport>,
    pub paper_targets: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    /// Reported for interpretation only; never part of a verdict.
    pub diagnostics: BTreeMap<String, f64>,
}

impl Summary {
    fn new(name: ExperimentName) -> Self {
        Self {
            experiment: name.as_str().to_owned(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    fn param(&mut self, k: &str, v: f64) {
        self.params.insert(k.to_owned(), v);
    }

    fn target(&mut self, k: &str, v: f64) {
        self.paper_targets.insert(k.to_owned(), v);
    }

    fn diagnostic(&mut self, k: &str, v: f64) {
        self.diagnostics.insert(k.to_owned(), v);
    }
}

/// A raw per-replica table held in memory as CSV text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub file_name: String,
    pub csv: String,
}

impl RawTable {
    fn new(file_name: String, header: &[&str]) -> Self {
        let mut csv = header.join(",");
        csv.push('\n');
        Self { file_name, csv }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.csv, "{}", fields.join(","));
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub seed_labels: Vec<String>,
    pub replicas: usize,
    pub corrupted: usize,
    pub conservation_violations: usize,
    pub wall_clock_secs: f64,
    pub results: Summary,
    pub passed: bool,
    pub files: Vec<String>,
}

/// Result of one experiment before persistence.
pub(crate) struct Outcome {
    summary: Summary,
    tables: Vec<RawTable>,
    seed_labels: Vec<String>,
    corrupted: usize,
    conservation_violations: usize,
}

/// Full run including the in-memory raw tables.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub manifest: RunManifest,
    pub tables: Vec<RawTable>,
}

/// Validates `config`, runs the experiment, writes raw CSV, summary JSON and
/// manifest JSON to `config.out_dir` (if set) and returns the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    run_experiment_full(config).map(|r| r.manifest)
}

pub fn run_experiment_full(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let started = Instant::now();
    let out = match config.name {
        ExperimentName::MeanVarZ => shock::mean_var_z(config)?,
        ExperimentName::IdentityA47 => shock::identity_a47(config)?,
        ExperimentName::CltDependence => shock::clt_dependence(config)?,
        ExperimentName::FluxMoments => stationary::flux_moments(config)?,
        ExperimentName::BurkeTest => stationary::burke_test(config)?,
        ExperimentName::LppCheck => oracle::lpp_check(config)?,
        ExperimentName::Ulam => oracle::ulam(config)?,
    };
    let mut files: Vec<String> = out.tables.iter().map(|t| t.file_name.clone()).collect();
    let stem = config.name.as_str();
    files.push(format!("{stem}_summary.json"));
    files.push(format!("{stem}_manifest.json"));
    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed_labels: out.seed_labels,
        replicas: config.replicas,
        corrupted: out.corrupted,
        conservation_violations: out.conservation_violations,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        passed: out.summary.passed(),
        results: out.summary,
        files,
    };
    if let Some(dir) = &config.out_dir {
        persist(dir, &manifest, &out.tables)?;
    }
    Ok(ExperimentRun {
        manifest,
        tables: out.tables,
    })
}

fn persist(dir: &Path, manifest: &RunManifest, tables: &[RawTable]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in tables {
        fs::write(dir.join(&t.file_name), &t.csv)?;
    }
    let stem = manifest.config.name.as_str();
    fs::write(
        dir.join(format!("{stem}_summary.json")),
        serde_json::to_string_pretty(&manifest.results)?,
    )?;
    fs::write(
        dir.join(format!("{stem}_manifest.json")),
        serde_json::to_string_pretty(manifest)?,
    )?;
    Ok(())
}

/// Runs `f` for replicas `0..n` in parallel, returning results in index order.
fn replicate<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n as u64).into_par_iter().map(f).collect()
}

fn corruption_verdict(summary: &mut Summary, corrupted: usize, total: usize) {
    let frac = corrupted as f64 / total as f64;
    summary.estimates.push(Estimate::plain("corrupted_fraction", frac, total as u64));
    summary.verdicts.push(Verdict::below("corrupted_fraction", frac, MAX_CORRUPTED_FRACTION));
}

fn conservation_verdict(summary: &mut Summary, violations: usize) {
    summary.verdicts.push(Verdict::within(
        "conservation_violations",
        violations as f64,
        None,
        Some(0.0),
    ));
}
