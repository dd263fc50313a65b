//! Coupled HAD runs: the second-class particle `Z(t)`, the `N(t)` functional
//! of the boundary data, and the flux `xi(x, t)` between two stationary
//! processes driven by the same planar noise.
//!
//! A coupled pair runs two engines `A` and `B` on one event stream. While the
//! pair is healthy the live configurations satisfy `A = B + {z}` as multisets
//! and `z` is the second-class particle. Each event changes at most one
//! particle in each engine, so the signed difference `A - B` is updated from
//! the two step effects alone; the full configurations are compared only as
//! a self-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::had_engine::{build_event_queue, BoxParams, EngineState, Event, SimOutcome, StepEffect};
use crate::randgen::{poisson_1d, PlanarPoints, PointSet1D, Stream};

/// Right-continuous trajectory of the second-class particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZPath {
    /// `(time, new position)` for every move, time ascending.
    pub jumps: Vec<(f64, f64)>,
    pub corrupted: bool,
    pub corruption_time: Option<f64>,
    pub horizon: f64,
}

impl ZPath {
    pub fn new(horizon: f64) -> Self {
        Self {
            jumps: Vec::new(),
            corrupted: false,
            corruption_time: None,
            horizon,
        }
    }

    /// True if the path is unreadable at some time `<= u`.
    pub fn corrupted_by(&self, u: f64) -> bool {
        self.corruption_time.is_some_and(|c| c <= u)
    }

    /// Position at time `u`; 0 before the first jump.
    pub fn z_at(&self, u: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&u) {
            return Err(Error::Contract(format!("time {u} outside [0, {}]", self.horizon)));
        }
        if self.corrupted_by(u) {
            return Err(Error::Contract(format!(
                "path corrupted at {:?}, read at {u}",
                self.corruption_time
            )));
        }
        let k = self.jumps.partition_point(|&(s, _)| s <= u);
        Ok(if k == 0 { 0.0 } else { self.jumps[k - 1].1 })
    }

    pub fn z_final(&self) -> Result<f64> {
        self.z_at(self.horizon)
    }

    /// `min(t, first time Z exceeds x)`, i.e. the time spent at or below `x`
    /// during `[0, t]`.
    pub fn time_at_or_below(&self, x: f64, t: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.jumps
            .iter()
            .find(|&&(_, pos)| pos > x)
            .map_or(t, |&(s, _)| s.min(t))
    }
}

/// How the second-class particle is introduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondClassVariant {
    /// `A` has one extra particle at the origin, eligible for sink absorption.
    #[default]
    ExtraAtOrigin,
    /// `A` omits the first sink of `W`; no discrepancy exists before it fires.
    RemoveFirstSink,
    /// `B` omits the leftmost source; the discrepancy starts there.
    RemoveFirstSource,
}

/// How often the full configurations are compared against the tracked discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckMode {
    EveryEvent,
    /// Every `k`-th event.
    Sampled(u32),
    Off,
}

impl Default for CheckMode {
    fn default() -> Self {
        if cfg!(debug_assertions) {
            CheckMode::EveryEvent
        } else {
            CheckMode::Sampled(1024)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingOptions {
    pub variant: SecondClassVariant,
    pub check: CheckMode,
}

/// Which engines of a pair consume an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Both,
    OnlyA,
    OnlyB,
}

impl Target {
    fn hits_a(self) -> bool {
        matches!(self, Target::Both | Target::OnlyA)
    }

    fn hits_b(self) -> bool {
        matches!(self, Target::Both | Target::OnlyB)
    }
}

/// Signed multiset `A - B`; at most a handful of entries at any time.
#[derive(Debug, Clone, Default)]
struct SignedDiff(Vec<(f64, i32)>);

impl SignedDiff {
    fn add(&mut self, pos: f64, sign: i32) {
        match self.0.iter_mut().find(|(p, _)| *p == pos) {
            Some(e) => e.1 += sign,
            None => self.0.push((pos, sign)),
        }
        self.0.retain(|&(_, c)| c != 0);
    }

    fn apply(&mut self, effect: StepEffect, sign: i32) {
        match effect {
            StepEffect::Jump { from, to } => {
                self.add(from, -sign);
                self.add(to, sign);
            }
            StepEffect::Entry { at } => self.add(at, sign),
            StepEffect::Absorbed { from } => self.add(from, -sign),
            StepEffect::Created => {}
        }
    }

    fn single(&self) -> Option<f64> {
        match self.0.as_slice() {
            [(p, 1)] => Some(*p),
            _ => None,
        }
    }
}

/// Two engines under shared events with the tracked discrepancy.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub state_a: EngineState,
    pub state_b: EngineState,
    pub discrepancy: Option<f64>,
    diff: SignedDiff,
    pending: bool,
    corrupted: bool,
}

impl CoupledPair {
    fn new(state_a: EngineState, state_b: EngineState, start: Option<f64>) -> Self {
        let mut diff = SignedDiff::default();
        if let Some(z) = start {
            diff.add(z, 1);
        }
        Self {
            state_a,
            state_b,
            discrepancy: start,
            diff,
            pending: start.is_none(),
            corrupted: false,
        }
    }

    pub fn is_corrupted(&self) -> bool {
        self.corrupted
    }

    /// Steps both engines. Returns the new discrepancy position if it moved.
    fn step(&mut self, e: &Event, target: Target) -> Result<Option<f64>> {
        let ea = if target.hits_a() { Some(self.state_a.step(e)?) } else { None };
        let eb = if target.hits_b() { Some(self.state_b.step(e)?) } else { None };
        if self.corrupted {
            return Ok(None);
        }
        if let Some(eff) = ea {
            self.diff.apply(eff, 1);
        }
        if let Some(eff) = eb {
            self.diff.apply(eff, -1);
        }
        // A pending pair stays pending until an event reaches only one engine.
        if self.pending && target == Target::Both {
            return Ok(None);
        }
        self.pending = false;
        match self.diff.single() {
            Some(z) if Some(z) != self.discrepancy => {
                self.discrepancy = Some(z);
                Ok(Some(z))
            }
            Some(_) => Ok(None),
            None => {
                self.corrupted = true;
                self.discrepancy = None;
                Ok(None)
            }
        }
    }

    /// Compares the full configurations against the tracked discrepancy.
    pub fn verify(&self) -> bool {
        if self.corrupted {
            return true;
        }
        let expected = symmetric_difference(self.state_a.live(), self.state_b.live());
        match self.discrepancy {
            Some(z) => expected.only_in_a == vec![z] && expected.only_in_b.is_empty(),
            None => self.pending && expected.only_in_a.is_empty() && expected.only_in_b.is_empty(),
        }
    }
}

/// Elements of two sorted multisets not matched in the other.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymmetricDifference {
    pub only_in_a: Vec<f64>,
    pub only_in_b: Vec<f64>,
}

pub fn symmetric_difference<'a, A, B>(a: A, b: B) -> SymmetricDifference
where
    A: IntoIterator<Item = &'a f64>,
    B: IntoIterator<Item = &'a f64>,
{
    let mut out = SymmetricDifference::default();
    let mut ia = a.into_iter().peekable();
    let mut ib = b.into_iter().peekable();
    loop {
        match (ia.peek(), ib.peek()) {
            (Some(&&x), Some(&&y)) => {
                if x == y {
                    ia.next();
                    ib.next();
                } else if x < y {
                    out.only_in_a.push(x);
                    ia.next();
                } else {
                    out.only_in_b.push(y);
                    ib.next();
                }
            }
            (Some(&&x), None) => {
                out.only_in_a.push(x);
                ia.next();
            }
            (None, Some(&&y)) => {
                out.only_in_b.push(y);
                ib.next();
            }
            (None, None) => return out,
        }
    }
}

/// Everything produced by one second-class run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondClassRun {
    pub path: ZPath,
    /// Engine carrying the extra particle.
    pub outcome_a: SimOutcome,
    /// Reference engine.
    pub outcome_b: SimOutcome,
}

/// Simulates the second-class particle for sources `S` (intensity `lambda`),
/// sinks `W` (intensity `rho`) and planar points `P`.
pub fn run_second_class(
    sources: &PointSet1D,
    sinks: &PointSet1D,
    bulk: &PlanarPoints,
    bounds: BoxParams,
    options: CouplingOptions,
) -> Result<SecondClassRun> {
    if sinks.points().last().is_some_and(|&w| w > bounds.horizon) {
        return Err(Error::Contract("sink time beyond horizon".into()));
    }
    let queue = build_event_queue(sinks, bulk);
    let mut path = ZPath::new(bounds.horizon);

    let (a_sources, b_sources, start) = match options.variant {
        SecondClassVariant::ExtraAtOrigin => {
            let mut with_origin = sources.points().to_vec();
            with_origin.push(0.0);
            (
                PointSet1D::new(with_origin, sources.length())?,
                sources.clone(),
                Some(0.0),
            )
        }
        SecondClassVariant::RemoveFirstSink => (sources.clone(), sources.clone(), None),
        SecondClassVariant::RemoveFirstSource => {
            (sources.clone(), sources.without_first(), sources.first())
        }
    };
    let state_a = EngineState::new(&a_sources, bounds, false)?;
    let state_b = EngineState::new(&b_sources, bounds, false)?;
    let mut pair = CoupledPair::new(state_a, state_b, start);

    if options.variant == SecondClassVariant::RemoveFirstSource {
        match start {
            Some(z) => path.jumps.push((0.0, z)),
            None => {
                path.corrupted = true;
                path.corruption_time = Some(0.0);
                pair.corrupted = true;
            }
        }
    }

    let first_sink = queue.iter().position(Event::is_sink);
    for (k, e) in queue.iter().enumerate() {
        let target = match options.variant {
            SecondClassVariant::RemoveFirstSink if Some(k) == first_sink => Target::OnlyB,
            _ => Target::Both,
        };
        let was_corrupted = pair.is_corrupted();
        if let Some(z) = pair.step(e, target)? {
            if let Some(&(_, prev)) = path.jumps.last() {
                assert!(z > prev, "second-class particle moved left: {prev} -> {z}");
            }
            path.jumps.push((e.time, z));
        }
        if pair.is_corrupted() && !was_corrupted {
            path.corrupted = true;
            path.corruption_time = Some(e.time);
        }
        let check = match options.check {
            CheckMode::EveryEvent => true,
            CheckMode::Sampled(every) => every > 0 && k % every as usize == 0,
            CheckMode::Off => false,
        };
        if check {
            assert!(pair.verify(), "single-discrepancy invariant broken at event {k}");
        }
    }

    Ok(SecondClassRun {
        path,
        outcome_a: pair.state_a.finish(a_sources.len()),
        outcome_b: pair.state_b.finish(b_sources.len()),
    })
}

/// Window lengths `R(S)` and `R(W)` of the `N(t)` functional.
pub fn n_functional_rates(lambda: f64, rho: f64) -> Result<(f64, f64)> {
    check_shock_regime(lambda, rho)?;
    let excess = rho - 1.0 / lambda;
    Ok((excess / lambda, excess / rho))
}

pub fn check_shock_regime(lambda: f64, rho: f64) -> Result<()> {
    if !(lambda > 0.0 && rho > 0.0 && lambda * rho > 1.0) || !(lambda * rho).is_finite() {
        return Err(Error::Parameter(format!(
            "shock regime needs lambda * rho > 1, got lambda = {lambda}, rho = {rho}"
        )));
    }
    Ok(())
}

/// `N(t) = (lambda - 1/rho)^-1 [3 (rho - 1/lambda) t - |S n [0, t R(S)]| - |W n [0, t R(W)]|]`.
pub fn n_functional(
    sources: &PointSet1D,
    sinks: &PointSet1D,
    lambda: f64,
    rho: f64,
    t: f64,
) -> Result<f64> {
    let (rs, rw) = n_functional_rates(lambda, rho)?;
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("t must be >= 0, got {t}")));
    }
    let (ws, ww) = (t * rs, t * rw);
    if ws > sources.length() || ww > sinks.length() {
        return Err(Error::Parameter(format!(
            "windows [0, {ws}] and [0, {ww}] exceed sampled ranges {} and {}",
            sources.length(),
            sinks.length()
        )));
    }
    let counted = sources.count_up_to(ws) + sinks.count_up_to(ww);
    let c0 = 3.0 * (rho - 1.0 / lambda);
    Ok((c0 * t - counted as f64) / (lambda - 1.0 / rho))
}

/// Boundary data of the basic coupling: `S_sigma = S_eta + I`, `W_eta = W_sigma + J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryQuadruple {
    pub s_eta: PointSet1D,
    pub i: PointSet1D,
    pub w_sigma: PointSet1D,
    pub j: PointSet1D,
}

impl BoundaryQuadruple {
    pub fn s_sigma(&self) -> PointSet1D {
        self.s_eta.union(&self.i).expect("both on [0, x]")
    }

    pub fn w_eta(&self) -> PointSet1D {
        self.w_sigma.union(&self.j).expect("both on [0, t]")
    }
}

/// Intensities `(1/rho, lambda - 1/rho, 1/lambda, rho - 1/lambda)` of
/// `(S_eta, I, W_sigma, J)`.
pub fn coupling_intensities(lambda: f64, rho: f64) -> Result<[f64; 4]> {
    check_shock_regime(lambda, rho)?;
    Ok([1.0 / rho, lambda - 1.0 / rho, 1.0 / lambda, rho - 1.0 / lambda])
}

pub fn make_coupled_boundaries(
    lambda: f64,
    rho: f64,
    bounds: BoxParams,
    rng: &mut Stream,
) -> Result<BoundaryQuadruple> {
    let [a, b, c, d] = coupling_intensities(lambda, rho)?;
    Ok(BoundaryQuadruple {
        s_eta: poisson_1d(a, bounds.width, rng)?,
        i: poisson_1d(b, bounds.width, rng)?,
        w_sigma: poisson_1d(c, bounds.horizon, rng)?,
        j: poisson_1d(d, bounds.horizon, rng)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxOutcome {
    pub xi: i64,
    pub sigma: SimOutcome,
    pub eta: SimOutcome,
}

/// Event queue shared by a pair whose second member sees extra sinks.
/// Shared events target both engines, extra sinks only `B`.
pub fn coupled_queue(
    shared_sinks: &PointSet1D,
    extra_sinks: &PointSet1D,
    bulk: &PlanarPoints,
) -> Vec<(Event, Target)> {
    let shared = build_event_queue(shared_sinks, bulk);
    let extra = build_event_queue(extra_sinks, &PlanarPoints::empty(bulk.width(), bulk.height()));
    let mut out = Vec::with_capacity(shared.len() + extra.len());
    let (mut i, mut j) = (0, 0);
    while i < shared.len() || j < extra.len() {
        let take_extra = match (shared.get(i), extra.get(j)) {
            (Some(s), Some(x)) => x.precedes(s),
            (None, Some(_)) => true,
            _ => false,
        };
        if take_extra {
            out.push((extra[j], Target::OnlyB));
            j += 1;
        } else {
            out.push((shared[i], Target::Both));
            i += 1;
        }
    }
    out
}

/// Runs `sigma = H(S_sigma, W_sigma, P)` and `eta = H(S_eta, W_eta, P)` and
/// returns the flux of discrepancies `xi = (|N| + W)_sigma - (|N| + W)_eta`.
pub fn run_flux(bq: &BoundaryQuadruple, bulk: &PlanarPoints, bounds: BoxParams) -> Result<FluxOutcome> {
    let s_sigma = bq.s_sigma();
    let mut sigma = EngineState::new(&s_sigma, bounds, false)?;
    let mut eta = EngineState::new(&bq.s_eta, bounds, false)?;
    let queue = coupled_queue(&bq.w_sigma, &bq.j, bulk);
    debug_assert!({
        let shared: Vec<Event> = queue
            .iter()
            .filter(|(_, t)| *t == Target::Both)
            .map(|(e, _)| *e)
            .collect();
        shared == build_event_queue(&bq.w_sigma, bulk)
    });
    for (e, target) in &queue {
        if target.hits_a() {
            sigma.step(e)?;
        }
        if target.hits_b() {
            eta.step(e)?;
        }
    }
    let sigma = sigma.finish(s_sigma.len());
    let eta = eta.finish(bq.s_eta.len());
    let xi = sigma.particle_total() as i64 - eta.particle_total() as i64;
    Ok(FluxOutcome { xi, sigma, eta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::had_engine::run;
    use crate::randgen::{derive_stream, poisson_2d, StreamKey};

    fn unit_box() -> BoxParams {
        BoxParams::new(1.0, 1.0).unwrap()
    }

    fn set(points: &[f64]) -> PointSet1D {
        PointSet1D::new(points.to_vec(), 1.0).unwrap()
    }

    fn planar(points: &[(f64, f64)]) -> PlanarPoints {
        PlanarPoints::new(points.to_vec(), 1.0, 1.0).unwrap()
    }

    fn every_event() -> CouplingOptions {
        CouplingOptions {
            variant: SecondClassVariant::ExtraAtOrigin,
            check: CheckMode::EveryEvent,
        }
    }

    #[test]
    fn no_events_no_motion() {
        let r = run_second_class(&set(&[0.2, 0.7]), &set(&[]), &planar(&[]), unit_box(), every_event())
            .unwrap();
        assert!(r.path.jumps.is_empty());
        assert!(!r.path.corrupted);
        assert_eq!(r.path.z_at(0.9).unwrap(), 0.0);
    }

    #[test]
    fn sink_moves_discrepancy_to_next_particle() {
        let r = run_second_class(&set(&[0.4]), &set(&[0.3]), &planar(&[]), unit_box(), every_event())
            .unwrap();
        assert_eq!(r.path.jumps, vec![(0.3, 0.4)]);
        assert!(!r.path.corrupted);
        assert_eq!(r.outcome_a.created, 0);
        assert_eq!(r.outcome_b.created, 0);
    }

    #[test]
    fn sink_on_empty_reference_corrupts() {
        let r = run_second_class(&set(&[]), &set(&[0.3]), &planar(&[]), unit_box(), every_event())
            .unwrap();
        assert!(r.path.corrupted);
        assert_eq!(r.path.corruption_time, Some(0.3));
        assert_eq!(r.outcome_b.created, 1);
        assert!(matches!(r.path.z_at(0.5), Err(Error::Contract(_))));
        assert_eq!(r.path.z_at(0.2).unwrap(), 0.0);
    }

    #[test]
    fn bulk_point_below_discrepancy_pushes_it_right() {
        // After the sink Z sits at 0.4 with common particle 0.6 above it;
        // a bulk point at 0.35 (no common particle in (0.35, 0.4)) moves Z to 0.6.
        let r = run_second_class(
            &set(&[0.4, 0.6]),
            &set(&[0.3]),
            &planar(&[(0.35, 0.5)]),
            unit_box(),
            every_event(),
        )
        .unwrap();
        assert_eq!(r.path.jumps, vec![(0.3, 0.4), (0.5, 0.6)]);
    }

    #[test]
    fn entry_annihilates_discrepancy() {
        let r = run_second_class(
            &set(&[0.4]),
            &set(&[0.3]),
            &planar(&[(0.35, 0.5)]),
            unit_box(),
            every_event(),
        )
        .unwrap();
        assert!(r.path.corrupted);
        assert_eq!(r.path.corruption_time, Some(0.5));
    }

    #[test]
    fn z_at_conventions() {
        let mut p = ZPath::new(5.0);
        assert_eq!(p.z_at(3.0).unwrap(), 0.0);
        p.jumps.push((0.3, 0.4));
        assert_eq!(p.z_at(0.2).unwrap(), 0.0);
        assert_eq!(p.z_at(0.3).unwrap(), 0.4);
        assert!(p.z_at(6.0).is_err());
        assert_eq!(p.time_at_or_below(0.3, 5.0), 0.3);
        assert_eq!(p.time_at_or_below(0.5, 5.0), 5.0);
    }

    /// Runs the two engines separately and reads the discrepancy off the full
    /// configurations after every event.
    fn independent_z(s: &PointSet1D, w: &PointSet1D, p: &PlanarPoints, bounds: BoxParams) -> ZPath {
        let mut with_origin = s.points().to_vec();
        with_origin.push(0.0);
        let sa = PointSet1D::new(with_origin, s.length()).unwrap();
        let mut a = EngineState::new(&sa, bounds, false).unwrap();
        let mut b = EngineState::new(s, bounds, false).unwrap();
        let mut path = ZPath::new(bounds.horizon);
        let mut current = 0.0;
        for e in build_event_queue(w, p) {
            a.step(&e).unwrap();
            b.step(&e).unwrap();
            let d = symmetric_difference(a.live(), b.live());
            if d.only_in_b.is_empty() && d.only_in_a.len() == 1 {
                if d.only_in_a[0] != current {
                    current = d.only_in_a[0];
                    path.jumps.push((e.time, current));
                }
            } else {
                path.corrupted = true;
                path.corruption_time = Some(e.time);
                break;
            }
        }
        path
    }

    #[test]
    fn tracked_discrepancy_matches_full_comparison() {
        for i in 0..200u64 {
            let mut rng = derive_stream(&StreamKey::new(3).child("z-oracle", i, "all"));
            let bounds = BoxParams::new(8.0, 4.0).unwrap();
            let s = poisson_1d(2.0, 8.0, &mut rng).unwrap();
            let w = poisson_1d(1.0, 4.0, &mut rng).unwrap();
            let p = poisson_2d(1.0, 8.0, 4.0, &mut rng).unwrap();
            let got = run_second_class(&s, &w, &p, bounds, every_event()).unwrap();
            let want = independent_z(&s, &w, &p, bounds);
            assert_eq!(got.path, want, "instance {i}");
            assert!(got.outcome_a.conservation_holds());
            assert!(got.outcome_b.conservation_holds());
            assert!(got.path.jumps.windows(2).all(|w| w[0].1 < w[1].1));
        }
    }

    #[test]
    fn remove_first_sink_agrees_after_first_sink() {
        for i in 0..100u64 {
            let mut rng = derive_stream(&StreamKey::new(4).child("variants", i, "all"));
            let bounds = BoxParams::new(8.0, 4.0).unwrap();
            let s = poisson_1d(2.0, 8.0, &mut rng).unwrap();
            let w = poisson_1d(1.0, 4.0, &mut rng).unwrap();
            let p = poisson_2d(1.0, 8.0, 4.0, &mut rng).unwrap();
            let origin = run_second_class(&s, &w, &p, bounds, every_event()).unwrap();
            let sink = run_second_class(
                &s,
                &w,
                &p,
                bounds,
                CouplingOptions {
                    variant: SecondClassVariant::RemoveFirstSink,
                    check: CheckMode::EveryEvent,
                },
            )
            .unwrap();
            assert_eq!(origin.path, sink.path, "instance {i}");
        }
    }

    #[test]
    fn remove_first_source_starts_at_leftmost_source() {
        let opts = CouplingOptions {
            variant: SecondClassVariant::RemoveFirstSource,
            check: CheckMode::EveryEvent,
        };
        let r = run_second_class(&set(&[0.2, 0.7]), &set(&[]), &planar(&[(0.1, 0.5)]), unit_box(), opts)
            .unwrap();
        assert_eq!(r.path.jumps, vec![(0.0, 0.2), (0.5, 0.7)]);
        let r = run_second_class(&set(&[]), &set(&[]), &planar(&[]), unit_box(), opts).unwrap();
        assert!(r.path.corrupted);
    }

    #[test]
    fn n_functional_examples() {
        let s = PointSet1D::new(vec![0.1, 0.5, 1.0, 1.9, 2.5], 10.0).unwrap();
        let w = PointSet1D::new(vec![0.2, 1.0, 2.0, 3.0, 3.9, 4.5], 8.0).unwrap();
        // Windows: t R(S) = 8 * 0.25 = 2, t R(W) = 8 * 0.5 = 4 -> 4 + 5 counted.
        assert_eq!(n_functional(&s, &w, 2.0, 1.0, 8.0).unwrap(), 3.0);
        assert_eq!(n_functional(&s, &w, 2.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(matches!(n_functional(&s, &w, 1.0, 1.0, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn n_functional_mean_identity_is_exact() {
        // Replacing the counts by their means lambda t R(S) + rho t R(W) leaves (rho/lambda) t.
        for &(lambda, rho, t) in &[(2.0, 1.0, 10.0), (1.5, 3.0, 7.0), (5.0, 0.4, 2.5), (1.1, 1.1, 100.0)] {
            let (rs, rw) = n_functional_rates(lambda, rho).unwrap();
            assert!((lambda * rs - (rho - 1.0 / lambda)).abs() < 1e-12);
            assert!((rho * rw - (rho - 1.0 / lambda)).abs() < 1e-12);
            let mean_counts = lambda * t * rs + rho * t * rw;
            let value = (3.0 * (rho - 1.0 / lambda) * t - mean_counts) / (lambda - 1.0 / rho);
            assert!((value - rho / lambda * t).abs() < 1e-9 * t.max(1.0));
        }
    }

    #[test]
    fn coupling_intensities_values() {
        assert_eq!(coupling_intensities(2.0, 1.0).unwrap(), [1.0, 1.0, 0.5, 0.5]);
        assert!(coupling_intensities(1.0, 1.0).is_err());
        let mut rng = derive_stream(&StreamKey::new(0));
        assert!(make_coupled_boundaries(0.5, 2.0, unit_box(), &mut rng).is_err());
    }

    #[test]
    fn boundary_counts_match_intensities() {
        let bounds = BoxParams::new(10.0, 5.0).unwrap();
        let n = 10_000;
        let mut sums = [0.0f64; 4];
        for r in 0..n {
            let mut rng = derive_stream(&StreamKey::new(8).child("bq", r, "boundaries"));
            let bq = make_coupled_boundaries(2.0, 1.0, bounds, &mut rng).unwrap();
            for (k, len) in [bq.s_eta.len(), bq.i.len(), bq.w_sigma.len(), bq.j.len()]
                .into_iter()
                .enumerate()
            {
                sums[k] += len as f64;
            }
        }
        // Expected means 10, 10, 2.5, 2.5; 3 sigma of the mean is 3 sqrt(m / n).
        for (k, m) in [10.0, 10.0, 2.5, 2.5].into_iter().enumerate() {
            let mean = sums[k] / n as f64;
            assert!((mean - m).abs() < 3.0 * (m / n as f64).sqrt(), "{k}: {mean}");
        }
    }

    #[test]
    fn flux_without_extra_points_is_zero() {
        let bounds = BoxParams::new(4.0, 2.0).unwrap();
        let mut rng = derive_stream(&StreamKey::new(1));
        let bq = BoundaryQuadruple {
            s_eta: poisson_1d(1.0, 4.0, &mut rng).unwrap(),
            i: PointSet1D::empty(4.0),
            w_sigma: poisson_1d(1.0, 2.0, &mut rng).unwrap(),
            j: PointSet1D::empty(2.0),
        };
        let p = poisson_2d(1.0, 4.0, 2.0, &mut rng).unwrap();
        let f = run_flux(&bq, &p, bounds).unwrap();
        assert_eq!(f.xi, 0);
        assert_eq!(f.sigma, f.eta);
    }

    #[test]
    fn flux_at_time_zero_counts_i() {
        let bounds = BoxParams::new(4.0, 2.0).unwrap();
        let mut rng = derive_stream(&StreamKey::new(2));
        let bq = BoundaryQuadruple {
            s_eta: poisson_1d(1.0, 4.0, &mut rng).unwrap(),
            i: poisson_1d(1.0, 4.0, &mut rng).unwrap(),
            w_sigma: PointSet1D::empty(2.0),
            j: PointSet1D::empty(2.0),
        };
        let f = run_flux(&bq, &PlanarPoints::empty(4.0, 2.0), bounds).unwrap();
        assert_eq!(f.xi, bq.i.len() as i64);
    }

    #[test]
    fn flux_members_match_standalone_runs() {
        let bounds = BoxParams::new(6.0, 3.0).unwrap();
        for r in 0..50 {
            let mut rng = derive_stream(&StreamKey::new(6).child("flux", r, "all"));
            let bq = make_coupled_boundaries(2.0, 1.0, bounds, &mut rng).unwrap();
            let p = poisson_2d(1.0, 6.0, 3.0, &mut rng).unwrap();
            let f = run_flux(&bq, &p, bounds).unwrap();
            let sigma = run(&bq.s_sigma(), &bq.w_sigma, &p, bounds, false).unwrap();
            let eta = run(&bq.s_eta, &bq.w_eta(), &p, bounds, false).unwrap();
            assert_eq!(f.sigma, sigma);
            assert_eq!(f.eta, eta);
        }
    }
}
