//! Ensemble check of `int_0^x P(Z(t) > z) dz = (rho/lambda) int_0^t P(Z(u) <= x) du`.
//!
//! The left side equals `E[min(Z(t), x)]`. Because `Z` is nondecreasing, the
//! time it spends at or below `x` during `[0, t]` is `min(t, first passage
//! above x)`, read exactly off the jump record. Both sides come from the same
//! paths, so the paired per-path difference gives the standard error.

use serde::{Deserialize, Serialize};

use super::gof::{two_sided_normal_p, TestReport};
use super::moments::MomentAccumulator;
use crate::error::{Error, Result};
use crate::shock_coupling::ZPath;

/// `|z| < 3` expressed as a two-sided level.
pub fn three_sigma_alpha() -> f64 {
    two_sided_normal_p(3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub left: f64,
    pub right: f64,
    pub std_err: f64,
    pub z: f64,
    pub report: TestReport,
}

fn check_paths(paths: &[ZPath], t: f64) -> Result<()> {
    if paths.is_empty() {
        return Err(Error::Undefined("identity check on an empty ensemble".into()));
    }
    if let Some(k) = paths.iter().position(|p| p.corrupted_by(t)) {
        return Err(Error::Contract(format!("path {k} is corrupted before t = {t}")));
    }
    if let Some(k) = paths.iter().position(|p| p.horizon < t) {
        return Err(Error::Contract(format!("path {k} ends before t = {t}")));
    }
    Ok(())
}

pub fn identity_a47_check(
    paths: &[ZPath],
    x: f64,
    t: f64,
    lambda: f64,
    rho: f64,
) -> Result<IdentityReport> {
    check_paths(paths, t)?;
    let ratio = rho / lambda;
    let mut left = MomentAccumulator::new();
    let mut right = MomentAccumulator::new();
    let mut diff = MomentAccumulator::new();
    for p in paths {
        let l = p.z_at(t)?.min(x);
        let r = ratio * p.time_at_or_below(x, t);
        left.push(l);
        right.push(r);
        diff.push(l - r);
    }
    let (std_err, z) = match diff.std_err() {
        Ok(se) if se > 0.0 => (se, diff.mean() / se),
        // All differences identical: exact agreement only if they vanish.
        _ if diff.mean() == 0.0 => (0.0, 0.0),
        _ => (0.0, f64::INFINITY.copysign(diff.mean())),
    };
    let report = TestReport::new(
        "identity_a47",
        z,
        two_sided_normal_p(z),
        paths.len(),
        three_sigma_alpha(),
    )
    .with_param("x", x)
    .with_param("t", t)
    .with_param("lambda", lambda)
    .with_param("rho", rho);
    Ok(IdentityReport {
        left: left.mean(),
        right: right.mean(),
        std_err,
        z,
        report,
    })
}

/// Right side by the trapezoid rule on a uniform grid of `steps` intervals;
/// kept as a cross-check of the exact integral.
pub fn identity_a47_right_grid(
    paths: &[ZPath],
    x: f64,
    t: f64,
    lambda: f64,
    rho: f64,
    steps: usize,
) -> Result<f64> {
    check_paths(paths, t)?;
    if steps == 0 {
        return Err(Error::Parameter("grid needs at least one step".into()));
    }
    let h = t / steps as f64;
    let frac = |u: f64| -> Result<f64> {
        let mut below = 0usize;
        for p in paths {
            if p.z_at(u)? <= x {
                below += 1;
            }
        }
        Ok(below as f64 / paths.len() as f64)
    };
    let mut sum = 0.5 * (frac(0.0)? + frac(t)?);
    for k in 1..steps {
        sum += frac(k as f64 * h)?;
    }
    Ok(rho / lambda * sum * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(jumps: &[(f64, f64)], horizon: f64) -> ZPath {
        let mut p = ZPath::new(horizon);
        p.jumps = jumps.to_vec();
        p
    }

    #[test]
    fn zero_horizon_gives_zero_sides() {
        let paths = vec![path(&[], 0.0), path(&[], 0.0)];
        let r = identity_a47_check(&paths, 4.0, 0.0, 2.0, 1.0).unwrap();
        assert_eq!((r.left, r.right, r.z), (0.0, 0.0, 0.0));
        assert!(r.report.passed);
    }

    #[test]
    fn hand_computed_sides() {
        // Path 1: Z = 0 until 1, then 3 (above x = 2) at time 2.
        // Path 2: Z = 1 from time 0.5 on.
        let paths = vec![path(&[(1.0, 1.5), (2.0, 3.0)], 4.0), path(&[(0.5, 1.0)], 4.0)];
        let r = identity_a47_check(&paths, 2.0, 4.0, 2.0, 1.0).unwrap();
        assert!((r.left - (2.0 + 1.0) / 2.0).abs() < 1e-12);
        assert!((r.right - 0.5 * (2.0 + 4.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_converges_to_exact_integral() {
        let paths = vec![path(&[(1.0, 1.5), (2.0, 3.0)], 4.0), path(&[(0.5, 1.0), (3.3, 2.5)], 4.0)];
        let exact = identity_a47_check(&paths, 2.0, 4.0, 2.0, 1.0).unwrap().right;
        let coarse = identity_a47_right_grid(&paths, 2.0, 4.0, 2.0, 1.0, 10).unwrap();
        let fine = identity_a47_right_grid(&paths, 2.0, 4.0, 2.0, 1.0, 10_000).unwrap();
        assert!((fine - exact).abs() < 1e-3);
        assert!((fine - exact).abs() <= (coarse - exact).abs());
    }

    #[test]
    fn corrupted_paths_rejected() {
        let mut p = path(&[], 4.0);
        p.corrupted = true;
        p.corruption_time = Some(1.0);
        assert!(matches!(
            identity_a47_check(&[p], 2.0, 4.0, 2.0, 1.0),
            Err(Error::Contract(_))
        ));
    }
}
