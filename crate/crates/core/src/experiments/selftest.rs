//! Exact invariants on many small random instances.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::had_engine::{run, BoxParams};
use crate::lpp_oracle::{longest_chain, lis_interior};
use crate::randgen::{derive_stream, poisson_1d, poisson_2d, PointSet1D, StreamKey};
use crate::shock_coupling::{
    make_coupled_boundaries, run_flux, run_second_class, BoundaryQuadruple, CheckMode,
    CouplingOptions, SecondClassVariant,
};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelftestReport {
    pub instances: usize,
    pub conservation_failures: usize,
    pub trajectory_failures: usize,
    pub lpp_checked: usize,
    pub lpp_mismatches: usize,
    pub lis_mismatches: usize,
    pub coupling_failures: usize,
    pub flux_failures: usize,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.conservation_failures
            + self.trajectory_failures
            + self.lpp_mismatches
            + self.lis_mismatches
            + self.coupling_failures
            + self.flux_failures
            == 0
    }
}

/// Runs every exact check on `instances` random boxes drawn from `seed`.
///
/// Per instance: conservation, monotone recorded trajectories, engine vs.
/// last-passage oracle (when `C = 0`), patience sorting vs. the chain
/// dynamic program, the coupled second-class run with full configuration
/// checks after every event, and a flux run with empty `I`, `J`.
pub fn selftest(instances: usize, seed: u64) -> Result<SelftestReport> {
    let root = StreamKey::new(seed);
    let mut rep = SelftestReport {
        instances,
        ..Default::default()
    };
    for k in 0..instances as u64 {
        let mut rng = derive_stream(&root.child("selftest", k, "instance"));
        let lambda = rng.random_range(0.5..3.0);
        let rho = rng.random_range(0.5..3.0);
        let x = rng.random_range(0.5..5.0);
        let t = rng.random_range(0.5..5.0);
        let bounds = BoxParams::new(x, t)?;
        let sources = poisson_1d(lambda, x, &mut rng)?;
        let sinks = poisson_1d(rho, t, &mut rng)?;
        let bulk = poisson_2d(1.0, x, t, &mut rng)?;

        let out = run(&sources, &sinks, &bulk, bounds, true)?;
        if !out.conservation_holds() {
            rep.conservation_failures += 1;
        }
        let monotone = out.trajectories.iter().flatten().all(|tr| {
            tr.vertices
                .windows(2)
                .all(|w| w[1].0 >= w[0].0 && w[1].1 <= w[0].1)
        });
        if !monotone {
            rep.trajectory_failures += 1;
        }
        if out.created == 0 {
            rep.lpp_checked += 1;
            if longest_chain(&sources, &sinks, &bulk) != out.particle_total() {
                rep.lpp_mismatches += 1;
            }
        }
        let empty_s = PointSet1D::empty(x);
        let empty_w = PointSet1D::empty(t);
        if lis_interior(&bulk) != longest_chain(&empty_s, &empty_w, &bulk) {
            rep.lis_mismatches += 1;
        }

        let options = CouplingOptions {
            variant: SecondClassVariant::ExtraAtOrigin,
            check: CheckMode::EveryEvent,
        };
        let coupled = catch_unwind(AssertUnwindSafe(|| {
            run_second_class(&sources, &sinks, &bulk, bounds, options)
        }));
        match coupled {
            Ok(Ok(r)) if r.outcome_a.conservation_holds() && r.outcome_b.conservation_holds() => {}
            _ => rep.coupling_failures += 1,
        }

        if lambda * rho > 1.0 {
            let bq = make_coupled_boundaries(lambda, rho, bounds, &mut rng)?;
            let same = BoundaryQuadruple {
                i: PointSet1D::empty(x),
                j: PointSet1D::empty(t),
                ..bq
            };
            let f = run_flux(&same, &bulk, bounds)?;
            if f.xi != 0 || f.sigma != f.eta {
                rep.flux_failures += 1;
            }
        }
    }
    Ok(rep)
}
