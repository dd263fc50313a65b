//! Experiments on stationary processes: the flux between two coupled
//! stationary systems and the Burke property of the outputs.

use super::*;
use crate::had_engine::{run, BoxParams};
use crate::randgen::{derive_stream, poisson_1d, poisson_2d};
use crate::shock_coupling::{make_coupled_boundaries, run_flux};
use crate::stats::{cross_correlation, dispersion_index, ks_exponential};

/// Dispersion indices must fall in `1 +- DISPERSION_TOLERANCE`.
pub const DISPERSION_TOLERANCE: f64 = 0.1;

/// Correlation bound is `CORRELATION_SIGMAS / sqrt(n)`.
pub const CORRELATION_SIGMAS: f64 = 4.0;

pub(super) fn flux_moments(config: &ExperimentConfig) -> Result<Outcome> {
    let (lambda, rho) = config.shock_params()?;
    let t = config.t.expect("validated");
    let x = config.x.expect("validated");
    let bounds = BoxParams::new(x, t)?;
    let root = config.key();
    let name = config.name.as_str();
    let rows = replicate(config.replicas, |r| {
        let key = root.child(name, r, "noise");
        let mut rng = derive_stream(&key);
        let bq = make_coupled_boundaries(lambda, rho, bounds, &mut rng)?;
        let bulk = poisson_2d(1.0, x, t, &mut rng)?;
        Ok((key.path(), run_flux(&bq, &bulk, bounds)?))
    })?;

    let mut xi = MomentAccumulator::new();
    let mut violations = 0;
    let mut table = RawTable::new(
        format!("{name}_raw.csv"),
        &["replica", "xi", "N_sigma", "W_sigma", "N_eta", "W_eta"],
    );
    for (k, (_, f)) in rows.iter().enumerate() {
        xi.push(f.xi as f64);
        if !(f.sigma.conservation_holds() && f.eta.conservation_holds()) {
            violations += 1;
        }
        table.row(&[
            k.to_string(),
            f.xi.to_string(),
            f.sigma.final_positions.len().to_string(),
            f.sigma.sink_events.to_string(),
            f.eta.final_positions.len().to_string(),
            f.eta.sink_events.to_string(),
        ]);
    }

    let mean_target = (lambda - 1.0 / rho) * x - (rho - 1.0 / lambda) * t;
    let var_target = (lambda - 1.0 / rho) * x + (rho - 1.0 / lambda) * t;
    let mut summary = Summary::new(config.name);
    for (k, v) in [("lambda", lambda), ("rho", rho), ("t", t), ("x", x)] {
        summary.param(k, v);
    }
    summary.target("xi_mean", mean_target);
    summary.target("xi_variance", var_target);
    summary.estimates.push(Estimate::mean("xi_mean", &xi));
    summary.estimates.push(Estimate::variance("xi_variance", &xi));
    if xi.count() < 2 {
        return Err(Error::Undefined("flux_moments needs at least two replicas".into()));
    }
    summary.verdicts.push(mean_band("xi_mean", &xi, mean_target, var_target));
    summary.verdicts.push(variance_band("xi_variance", &xi, var_target));
    conservation_verdict(&mut summary, violations);

    Ok(Outcome {
        summary,
        tables: vec![table],
        seed_labels: rows.into_iter().map(|(l, _)| l).collect(),
        corrupted: 0,
        conservation_violations: violations,
    })
}

/// First `k` gaps from the origin, or all of them if fewer exist. Using only
/// the first half (in expectation) of the points keeps the truncation at the
/// box edge from biasing the gap law.
fn leading_gaps(points: &crate::randgen::PointSet1D, k: usize) -> Vec<f64> {
    let mut g = points.gaps_from_origin();
    g.truncate(k);
    g
}

pub(super) fn burke_test(config: &ExperimentConfig) -> Result<Outcome> {
    let gamma = config.require("gamma", config.gamma)?;
    let t = config.t.expect("validated");
    let x = config.x.expect("validated");
    let bounds = BoxParams::new(x, t)?;
    let root = config.key();
    let name = config.name.as_str();
    let rows = replicate(config.replicas, |r| {
        let key = root.child(name, r, "noise");
        let mut rng = derive_stream(&key);
        let sources = poisson_1d(gamma, x, &mut rng)?;
        let sinks = poisson_1d(1.0 / gamma, t, &mut rng)?;
        let bulk = poisson_2d(1.0, x, t, &mut rng)?;
        Ok((key.path(), run(&sources, &sinks, &bulk, bounds, false)?))
    })?;

    let k_n = (gamma * x / 2.0).floor() as usize;
    let k_e = (t / gamma / 2.0).floor() as usize;
    let mut n_counts = Vec::with_capacity(rows.len());
    let mut e_counts = Vec::with_capacity(rows.len());
    let mut n_gaps = Vec::new();
    let mut e_gaps = Vec::new();
    let mut violations = 0;
    let mut table = RawTable::new(
        format!("{name}_raw.csv"),
        &["replica", "seed_label", "N_count", "E_count", "W_events", "C"],
    );
    for (k, (label, o)) in rows.iter().enumerate() {
        if !o.conservation_holds() {
            violations += 1;
        }
        n_counts.push(o.final_positions.len() as f64);
        e_counts.push(o.entries.len() as f64);
        n_gaps.extend(leading_gaps(&o.final_positions, k_n));
        e_gaps.extend(leading_gaps(&o.entries, k_e));
        table.row(&[
            k.to_string(),
            label.clone(),
            o.final_positions.len().to_string(),
            o.entries.len().to_string(),
            o.sink_events.to_string(),
            o.created.to_string(),
        ]);
    }

    let mut summary = Summary::new(config.name);
    for (k, v) in [("gamma", gamma), ("t", t), ("x", x)] {
        summary.param(k, v);
    }
    summary.target("n_count_mean", gamma * x);
    summary.target("e_count_mean", t / gamma);
    summary.target("dispersion_index", 1.0);
    summary.estimates.push(Estimate::mean(
        "n_count_mean",
        &MomentAccumulator::from_samples(n_counts.iter().copied()),
    ));
    summary.estimates.push(Estimate::mean(
        "e_count_mean",
        &MomentAccumulator::from_samples(e_counts.iter().copied()),
    ));

    let tol = (Some(1.0 - DISPERSION_TOLERANCE), Some(1.0 + DISPERSION_TOLERANCE));
    for (label, counts) in [("n", &n_counts), ("e", &e_counts)] {
        let mut rep = dispersion_index(counts)?;
        rep.test = format!("dispersion_index_{label}");
        summary.verdicts.push(Verdict::within(&rep.test, rep.statistic, tol.0, tol.1));
        summary.tests.push(rep);
    }
    for (label, gaps, rate) in [("n", &n_gaps, gamma), ("e", &e_gaps, 1.0 / gamma)] {
        let mut rep = ks_exponential(gaps, rate)?;
        rep.test = format!("ks_exponential_gaps_{label}");
        summary.verdicts.push(Verdict::from_test(&rep));
        summary.tests.push(rep);
    }
    let corr = cross_correlation(&n_counts, &e_counts)?;
    let bound = CORRELATION_SIGMAS / (rows.len() as f64).sqrt();
    summary.verdicts.push(Verdict::below("cross_correlation_abs", corr.statistic.abs(), bound));
    summary.tests.push(corr);
    conservation_verdict(&mut summary, violations);

    Ok(Outcome {
        summary,
        tables: vec![table],
        seed_labels: rows.into_iter().map(|(l, _)| l).collect(),
        corrupted: 0,
        conservation_violations: violations,
    })
}
