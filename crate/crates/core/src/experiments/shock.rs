//! Experiments on the second-class particle in the shock regime.

use super::*;
use crate::had_engine::BoxParams;
use crate::randgen::{derive_stream, poisson_1d, poisson_2d, PlanarPoints, PointSet1D};
use crate::shock_coupling::{
    n_functional, n_functional_rates, run_second_class, CheckMode, CouplingOptions,
    SecondClassVariant, ZPath,
};
use crate::stats::{identity_a47_check, normality_test, PairedAccumulator};

/// Full configuration comparisons happen every this many events.
const CHECK_EVERY: u32 = 1024;

/// Horizon multipliers of the `clt_dependence` ladder.
pub(super) const LADDER: [f64; 3] = [1.0, 4.0, 16.0];

/// Admissible range of `Cov(Z, N) / (D t)` at the top rung.
pub(super) const COV_RATIO_BAND: (f64, f64) = (0.8, 1.2);

struct Boundary {
    sources: PointSet1D,
    sinks: PointSet1D,
    bulk: PlanarPoints,
}

fn draw(key: &StreamKey, lambda: f64, rho: f64, bounds: BoxParams) -> Result<Boundary> {
    let mut rng = derive_stream(key);
    Ok(Boundary {
        sources: poisson_1d(lambda, bounds.width, &mut rng)?,
        sinks: poisson_1d(rho, bounds.horizon, &mut rng)?,
        bulk: poisson_2d(1.0, bounds.width, bounds.horizon, &mut rng)?,
    })
}

struct ZRow {
    label: String,
    z: Option<f64>,
    n: f64,
    created_a: usize,
    created_b: usize,
    conserved: bool,
    source_window: usize,
    sink_window: usize,
    path: ZPath,
}

fn z_replica(
    key: &StreamKey,
    lambda: f64,
    rho: f64,
    t: f64,
    bounds: BoxParams,
    variant: SecondClassVariant,
) -> Result<ZRow> {
    let b = draw(key, lambda, rho, bounds)?;
    let options = CouplingOptions {
        variant,
        check: CheckMode::Sampled(CHECK_EVERY),
    };
    let run = run_second_class(&b.sources, &b.sinks, &b.bulk, bounds, options)?;
    let z = if run.path.corrupted_by(t) {
        None
    } else {
        Some(run.path.z_at(t)?)
    };
    let (rs, rw) = n_functional_rates(lambda, rho)?;
    Ok(ZRow {
        label: key.path(),
        z,
        n: n_functional(&b.sources, &b.sinks, lambda, rho, t)?,
        created_a: run.outcome_a.created,
        created_b: run.outcome_b.created,
        conserved: run.outcome_a.conservation_holds() && run.outcome_b.conservation_holds(),
        source_window: b.sources.count_up_to(t * rs),
        sink_window: b.sinks.count_up_to(t * rw),
        path: run.path,
    })
}

fn z_table(file_name: String, rows: &[ZRow]) -> RawTable {
    let mut table = RawTable::new(
        file_name,
        &["replica", "seed_label", "Z_t", "N_t_functional", "corrupted", "C_A", "C_B"],
    );
    for (k, r) in rows.iter().enumerate() {
        table.row(&[
            k.to_string(),
            r.label.clone(),
            fmt_opt(r.z),
            r.n.to_string(),
            u8::from(r.z.is_none()).to_string(),
            r.created_a.to_string(),
            r.created_b.to_string(),
        ]);
    }
    table
}

/// Moments of one ensemble of `(Z, N)` pairs, corrupted replicas excluded.
struct ZStats {
    z: MomentAccumulator,
    n: MomentAccumulator,
    zn: PairedAccumulator,
    sq: MomentAccumulator,
    z_source: PairedAccumulator,
    z_sink: PairedAccumulator,
    corrupted: usize,
    violations: usize,
}

impl ZStats {
    fn collect(rows: &[ZRow]) -> Self {
        let mut s = ZStats {
            z: MomentAccumulator::new(),
            n: MomentAccumulator::new(),
            zn: PairedAccumulator::new(),
            sq: MomentAccumulator::new(),
            z_source: PairedAccumulator::new(),
            z_sink: PairedAccumulator::new(),
            corrupted: 0,
            violations: 0,
        };
        for r in rows {
            if !r.conserved {
                s.violations += 1;
            }
            let Some(z) = r.z else {
                s.corrupted += 1;
                continue;
            };
            s.z.push(z);
            s.n.push(r.n);
            s.zn.push(z, r.n);
            s.sq.push((z - r.n).powi(2));
            s.z_source.push(z, r.source_window as f64);
            s.z_sink.push(z, r.sink_window as f64);
        }
        s
    }

    fn require_samples(&self, what: &str) -> Result<()> {
        if self.z.count() < 2 {
            return Err(Error::Undefined(format!(
                "{what}: fewer than two uncorrupted replicas"
            )));
        }
        Ok(())
    }
}

fn shock_box(config: &ExperimentConfig, lambda: f64, rho: f64, t: f64) -> Result<BoxParams> {
    let width = margin_width(lambda, rho, t).max(config.x.unwrap_or(0.0));
    BoxParams::new(width, t)
}

pub(super) fn mean_var_z(config: &ExperimentConfig) -> Result<Outcome> {
    let (lambda, rho) = config.shock_params()?;
    let t = config.t.expect("validated");
    let bounds = shock_box(config, lambda, rho, t)?;
    let root = config.key();
    let name = config.name.as_str();
    let rows = replicate(config.replicas, |r| {
        z_replica(&root.child(name, r, "noise"), lambda, rho, t, bounds, SecondClassVariant::ExtraAtOrigin)
    })?;
    let st = ZStats::collect(&rows);
    st.require_samples(name)?;

    let d = diffusion_constant(lambda, rho);
    let (mean_target, var_target) = (rho / lambda * t, d * t);
    let mut summary = Summary::new(config.name);
    for (k, v) in [("lambda", lambda), ("rho", rho), ("t", t), ("box_width", bounds.width), ("D", d)] {
        summary.param(k, v);
    }
    summary.target("z_mean", mean_target);
    summary.target("z_variance", var_target);
    summary.target("n_mean", mean_target);
    summary.target("n_variance", var_target);
    summary.estimates.push(Estimate::mean("z_mean", &st.z));
    summary.estimates.push(Estimate::variance("z_variance", &st.z));
    summary.estimates.push(Estimate::mean("n_mean", &st.n));
    summary.estimates.push(Estimate::variance("n_variance", &st.n));
    summary.verdicts.push(mean_band("z_mean", &st.z, mean_target, var_target));
    summary.verdicts.push(variance_band("z_variance", &st.z, var_target));
    summary.verdicts.push(mean_band("n_mean", &st.n, mean_target, var_target));
    summary.verdicts.push(variance_band("n_variance", &st.n, var_target));
    corruption_verdict(&mut summary, st.corrupted, rows.len());
    conservation_verdict(&mut summary, st.violations);
    dependence_diagnostics(&mut summary, &st, lambda, rho, t, "");

    Ok(Outcome {
        summary,
        tables: vec![z_table(format!("{name}_raw.csv"), &rows)],
        seed_labels: rows.iter().map(|r| r.label.clone()).collect(),
        corrupted: st.corrupted,
        conservation_violations: st.violations,
    })
}

/// Covariances of `Z` with each boundary window, scaled by
/// `(lambda - 1/rho) / t`, next to the covariance with `N` itself.
fn dependence_diagnostics(summary: &mut Summary, st: &ZStats, lambda: f64, rho: f64, t: f64, suffix: &str) {
    let d = diffusion_constant(lambda, rho);
    let scale = (lambda - 1.0 / rho) / t;
    if let (Ok(cn), Ok(cs), Ok(cw)) = (st.zn.covariance(), st.z_source.covariance(), st.z_sink.covariance()) {
        summary.diagnostic(&format!("cov_z_n_over_dt{suffix}"), cn / (d * t));
        summary.diagnostic(&format!("cov_z_source_window_scaled{suffix}"), cs * scale);
        summary.diagnostic(&format!("cov_z_sink_window_scaled{suffix}"), cw * scale);
    }
    summary.diagnostic(&format!("mean_sq_z_minus_n_over_dt{suffix}"), st.sq.mean() / (d * t));
}

pub(super) fn identity_a47(config: &ExperimentConfig) -> Result<Outcome> {
    let (lambda, rho) = config.shock_params()?;
    let t = config.t.expect("validated");
    let x = config.x.expect("validated");
    // Here x is the observation point; the box follows the margin rule.
    let bounds = BoxParams::new(margin_width(lambda, rho, t).max(x), t)?;
    let root = config.key();
    let name = config.name.as_str();
    let rows = replicate(config.replicas, |r| {
        let key = root.child(name, r, "noise");
        let a = z_replica(&key, lambda, rho, t, bounds, SecondClassVariant::ExtraAtOrigin)?;
        let b = z_replica(&key, lambda, rho, t, bounds, SecondClassVariant::RemoveFirstSource)?;
        Ok((a, b))
    })?;
    let violations = rows.iter().filter(|(a, b)| !(a.conserved && b.conserved)).count();
    let corrupted = rows.iter().filter(|(a, _)| a.path.corrupted_by(t)).count();
    let paths: Vec<ZPath> = rows
        .iter()
        .filter(|(a, _)| !a.path.corrupted_by(t))
        .map(|(a, _)| a.path.clone())
        .collect();
    let report = identity_a47_check(&paths, x, t, lambda, rho)?;

    let mut summary = Summary::new(config.name);
    for (k, v) in [("lambda", lambda), ("rho", rho), ("t", t), ("x", x), ("box_width", bounds.width)] {
        summary.param(k, v);
    }
    summary.target("left_minus_right", 0.0);
    summary.estimates.push(Estimate::plain("left", report.left, paths.len() as u64));
    summary.estimates.push(Estimate::plain("right", report.right, paths.len() as u64));
    summary.estimates.push(Estimate {
        name: "left_minus_right".into(),
        value: report.left - report.right,
        std_err: Some(report.std_err),
        ci_low: Some(report.left - report.right - 1.96 * report.std_err),
        ci_high: Some(report.left - report.right + 1.96 * report.std_err),
        n: paths.len() as u64,
    });
    summary.verdicts.push(Verdict::below("identity_abs_z", report.z.abs(), 3.0));
    summary.tests.push(report.report.clone());
    corruption_verdict(&mut summary, corrupted, rows.len());
    conservation_verdict(&mut summary, violations);

    // Same identity with the time integral read off the path that starts at
    // the leftmost source, on the same noise.
    let ratio = rho / lambda;
    let mut mixed = MomentAccumulator::new();
    for (a, b) in &rows {
        if a.path.corrupted_by(t) || b.path.corrupted_by(t) {
            continue;
        }
        let l = a.path.z_at(t)?.min(x);
        mixed.push(l - ratio * b.path.time_at_or_below(x, t));
    }
    if let Ok(se) = mixed.std_err() {
        summary.diagnostic("mixed_left_minus_right", mixed.mean());
        summary.diagnostic("mixed_z", mixed.mean() / se);
    }

    let mut table = RawTable::new(
        format!("{name}_raw.csv"),
        &["replica", "seed_label", "Z_t", "left", "right", "corrupted", "Z_t_leftmost_start", "right_leftmost_start"],
    );
    for (k, (a, b)) in rows.iter().enumerate() {
        let ok_a = !a.path.corrupted_by(t);
        let ok_b = !b.path.corrupted_by(t);
        table.row(&[
            k.to_string(),
            a.label.clone(),
            fmt_opt(a.z),
            fmt_opt(ok_a.then(|| a.z.map(|z| z.min(x))).flatten()),
            fmt_opt(ok_a.then(|| ratio * a.path.time_at_or_below(x, t))),
            u8::from(!ok_a).to_string(),
            fmt_opt(b.z),
            fmt_opt(ok_b.then(|| ratio * b.path.time_at_or_below(x, t))),
        ]);
    }
    Ok(Outcome {
        summary,
        tables: vec![table],
        seed_labels: rows.iter().map(|(a, _)| a.label.clone()).collect(),
        corrupted,
        conservation_violations: violations,
    })
}

pub(super) fn clt_dependence(config: &ExperimentConfig) -> Result<Outcome> {
    let (lambda, rho) = config.shock_params()?;
    let base = config.t.expect("validated");
    let d = diffusion_constant(lambda, rho);
    let root = config.key();
    let name = config.name.as_str();
    let mut summary = Summary::new(config.name);
    summary.param("lambda", lambda);
    summary.param("rho", rho);
    summary.param("t", base);
    summary.param("D", d);
    summary.target("cov_ratio_top", 1.0);

    let mut tables = Vec::new();
    let mut labels = Vec::new();
    let (mut corrupted, mut violations, mut total) = (0, 0, 0);
    let mut ratios = Vec::new();
    let mut top: Option<(ZStats, Vec<f64>)> = None;
    for (k, mult) in LADDER.iter().enumerate() {
        let t = base * mult;
        let bounds = shock_box(config, lambda, rho, t)?;
        let role = format!("rung{k}");
        let rows = replicate(config.replicas, |r| {
            z_replica(&root.child(name, r, &role), lambda, rho, t, bounds, SecondClassVariant::ExtraAtOrigin)
        })?;
        let st = ZStats::collect(&rows);
        st.require_samples(name)?;
        corrupted += st.corrupted;
        violations += st.violations;
        total += rows.len();

        let mut sq = Estimate::mean(&format!("mean_sq_z_minus_n_over_dt_rung{k}"), &st.sq);
        let scale = d * t;
        sq.value /= scale;
        sq.std_err = sq.std_err.map(|s| s / scale);
        sq.ci_low = sq.ci_low.map(|s| s / scale);
        sq.ci_high = sq.ci_high.map(|s| s / scale);
        ratios.push(sq.value);
        summary.param(&format!("t_rung{k}"), t);
        summary.param(&format!("box_width_rung{k}"), bounds.width);
        summary.estimates.push(sq);
        summary.estimates.push(Estimate::plain(
            &format!("cov_ratio_rung{k}"),
            st.zn.covariance()? / scale,
            st.zn.count(),
        ));
        summary.estimates.push(Estimate::variance(&format!("z_variance_rung{k}"), &st.z));
        dependence_diagnostics(&mut summary, &st, lambda, rho, t, &format!("_rung{k}"));

        labels.extend(rows.iter().map(|r| r.label.clone()));
        tables.push(z_table(format!("{name}_rung{k}_raw.csv"), &rows));
        if k + 1 == LADDER.len() {
            let zs: Vec<f64> = rows.iter().filter_map(|r| r.z).collect();
            top = Some((st, zs));
        }
    }

    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    summary.verdicts.push(Verdict::flag("mean_sq_ratio_strictly_decreasing", decreasing));
    let (st, zs) = top.expect("ladder is nonempty");
    let t_top = base * LADDER[LADDER.len() - 1];
    let cov_ratio = st.zn.covariance()? / (d * t_top);
    summary.verdicts.push(Verdict::within(
        "cov_ratio_top",
        cov_ratio,
        Some(COV_RATIO_BAND.0),
        Some(COV_RATIO_BAND.1),
    ));
    let sd = st.z.variance()?.sqrt();
    let standardized: Vec<f64> = zs.iter().map(|z| (z - st.z.mean()) / sd).collect();
    let normal = normality_test(&standardized)?;
    summary.verdicts.push(Verdict::from_test(&normal.anderson_darling));
    summary.tests.push(normal.anderson_darling);
    summary.tests.push(normal.kolmogorov_smirnov);
    corruption_verdict(&mut summary, corrupted, total);
    conservation_verdict(&mut summary, violations);

    Ok(Outcome {
        summary,
        tables,
        seed_labels: labels,
        corrupted,
        conservation_violations: violations,
    })
}
