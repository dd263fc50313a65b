//! Event-driven HAD process in the box `[0, x] x [0, t]`.
//!
//! Particles start at the sources `S`. Each planar point `(y, s)` pulls the
//! nearest particle strictly to the right of `y` down to `y`; when there is
//! none, a new particle enters at `y` through the right edge. Each sink time
//! removes the leftmost particle. A sink that fires on an empty system is
//! counted in `created` (the inert particle of the formal rule) and otherwise
//! ignored.
//!
//! The live configuration is a sorted `VecDeque`. A jump never changes the
//! rank of the moving particle (nothing lies between `y` and its nearest right
//! neighbour), an entry is always the new maximum and a sink removes the
//! minimum, so every event is a binary search plus O(1) work.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randgen::{PlanarPoints, PointSet1D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxParams {
    pub width: f64,
    pub horizon: f64,
}

impl BoxParams {
    pub fn new(width: f64, horizon: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!(
                "box needs width > 0 and horizon > 0, got {width} x {horizon}"
            )));
        }
        Ok(Self { width, horizon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Sink,
    Bulk { y: f64 },
}

/// A driving event. `index` points back into the sink set or the planar set
/// the event came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub index: usize,
}

impl Event {
    pub fn is_sink(&self) -> bool {
        matches!(self.kind, EventKind::Sink)
    }

    /// Processing order: time, then sinks before bulk points, then smaller `y`.
    pub fn precedes(&self, other: &Event) -> bool {
        use std::cmp::Ordering::*;
        match self.time.total_cmp(&other.time) {
            Less => true,
            Greater => false,
            Equal => match (self.kind, other.kind) {
                (EventKind::Sink, EventKind::Bulk { .. }) => true,
                (EventKind::Bulk { .. }, EventKind::Sink) => false,
                (EventKind::Bulk { y: a }, EventKind::Bulk { y: b }) => a < b,
                (EventKind::Sink, EventKind::Sink) => false,
            },
        }
    }
}

/// Merges sinks and planar points into one processing-ordered queue.
pub fn build_event_queue(sinks: &PointSet1D, bulk: &PlanarPoints) -> Vec<Event> {
    let w = sinks.points();
    let p = bulk.points();
    let mut out = Vec::with_capacity(w.len() + p.len());
    let (mut i, mut j) = (0, 0);
    while i < w.len() || j < p.len() {
        let take_sink = match (w.get(i), p.get(j)) {
            (Some(&ws), Some(pp)) => ws <= pp.s,
            (Some(_), None) => true,
            _ => false,
        };
        if take_sink {
            out.push(Event {
                time: w[i],
                kind: EventKind::Sink,
                index: i,
            });
            i += 1;
        } else {
            out.push(Event {
                time: p[j].s,
                kind: EventKind::Bulk { y: p[j].y },
                index: j,
            });
            j += 1;
        }
    }
    out
}

/// What a single event did to the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepEffect {
    /// The nearest particle right of the bulk point moved from `from` to `to`.
    Jump { from: f64, to: f64 },
    /// No particle to the right: a new one entered at `at`.
    Entry { at: f64 },
    /// A sink removed the leftmost particle.
    Absorbed { from: f64 },
    /// A sink fired on an empty system.
    Created,
}

/// Polygonal path of one particle: `(time, position)` vertices, birth first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub particle_id: u64,
    pub vertices: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
struct Recorder {
    ids: VecDeque<u64>,
    paths: Vec<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct EngineState {
    live: VecDeque<f64>,
    absorbed: usize,
    created: usize,
    entries: Vec<f64>,
    clock: f64,
    bounds: BoxParams,
    recorder: Option<Recorder>,
}

impl EngineState {
    /// Starts from the sources (already sorted by construction).
    pub fn new(sources: &PointSet1D, bounds: BoxParams, record: bool) -> Result<Self> {
        if let Some(&last) = sources.points().last() {
            if last > bounds.width {
                return Err(Error::Contract(format!(
                    "source {last} beyond box width {}",
                    bounds.width
                )));
            }
        }
        let live: VecDeque<f64> = sources.points().iter().copied().collect();
        let recorder = record.then(|| Recorder {
            ids: (0..live.len() as u64).collect(),
            paths: live
                .iter()
                .enumerate()
                .map(|(i, &p)| Trajectory {
                    particle_id: i as u64,
                    vertices: vec![(0.0, p)],
                })
                .collect(),
        });
        Ok(Self {
            live,
            absorbed: 0,
            created: 0,
            entries: Vec::new(),
            clock: 0.0,
            bounds,
            recorder,
        })
    }

    pub fn live(&self) -> &VecDeque<f64> {
        &self.live
    }

    pub fn absorbed_count(&self) -> usize {
        self.absorbed
    }

    pub fn created_count(&self) -> usize {
        self.created
    }

    pub fn sink_events(&self) -> usize {
        self.absorbed + self.created
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn bounds(&self) -> BoxParams {
        self.bounds
    }

    /// Applies one event.
    pub fn step(&mut self, e: &Event) -> Result<StepEffect> {
        if e.time < self.clock {
            return Err(Error::Contract(format!(
                "event at {} precedes clock {}",
                e.time, self.clock
            )));
        }
        if e.time > self.bounds.horizon {
            return Err(Error::Contract(format!(
                "event at {} beyond horizon {}",
                e.time, self.bounds.horizon
            )));
        }
        self.clock = e.time;
        let effect = match e.kind {
            EventKind::Bulk { y } => {
                let i = self.live.partition_point(|&p| p <= y);
                if i < self.live.len() {
                    let from = self.live[i];
                    self.live[i] = y;
                    if let Some(rec) = &mut self.recorder {
                        let id = rec.ids[i] as usize;
                        rec.paths[id].vertices.push((e.time, y));
                    }
                    StepEffect::Jump { from, to: y }
                } else {
                    self.live.push_back(y);
                    self.entries.push(e.time);
                    if let Some(rec) = &mut self.recorder {
                        let id = rec.paths.len() as u64;
                        rec.ids.push_back(id);
                        rec.paths.push(Trajectory {
                            particle_id: id,
                            vertices: vec![(e.time, self.bounds.width), (e.time, y)],
                        });
                    }
                    StepEffect::Entry { at: y }
                }
            }
            EventKind::Sink => match self.live.pop_front() {
                Some(from) => {
                    self.absorbed += 1;
                    if let Some(rec) = &mut self.recorder {
                        let id = rec.ids.pop_front().expect("ids track live") as usize;
                        rec.paths[id].vertices.push((e.time, 0.0));
                    }
                    StepEffect::Absorbed { from }
                }
                None => {
                    self.created += 1;
                    StepEffect::Created
                }
            },
        };
        Ok(effect)
    }

    /// Freezes the state at the horizon.
    pub fn finish(mut self, source_count: usize) -> SimOutcome {
        let horizon = self.bounds.horizon;
        let trajectories = self.recorder.take().map(|mut rec| {
            for (k, &id) in rec.ids.iter().enumerate() {
                rec.paths[id as usize].vertices.push((horizon, self.live[k]));
            }
            rec.paths
        });
        SimOutcome {
            final_positions: PointSet1D::new(self.live.into_iter().collect(), self.bounds.width)
                .expect("live positions stay inside the box"),
            sink_events: self.absorbed + self.created,
            created: self.created,
            entries: PointSet1D::new(self.entries, horizon).expect("entry times inside horizon"),
            source_count,
            trajectories,
        }
    }
}

/// Terminal state of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    /// Live particle positions at the horizon (`N`).
    pub final_positions: PointSet1D,
    /// Number of sink events processed, absorbing or not.
    pub sink_events: usize,
    /// Sinks that fired on an empty system (`C`).
    pub created: usize,
    /// Right-edge entry times (`E`).
    pub entries: PointSet1D,
    pub source_count: usize,
    pub trajectories: Option<Vec<Trajectory>>,
}

impl SimOutcome {
    /// `|N| + W_events`: particles in the box plus those escaped through the sink.
    pub fn particle_total(&self) -> usize {
        self.final_positions.len() + self.sink_events
    }

    /// `|S| + |E| + C == |N| + W_events`.
    pub fn conservation_holds(&self) -> bool {
        self.source_count + self.entries.len() + self.created == self.particle_total()
    }
}

/// Runs the HAD process from sources `sources`, with sinks and planar points,
/// up to the horizon of `bounds`.
pub fn run(
    sources: &PointSet1D,
    sinks: &PointSet1D,
    bulk: &PlanarPoints,
    bounds: BoxParams,
    record: bool,
) -> Result<SimOutcome> {
    if sinks.points().last().is_some_and(|&w| w > bounds.horizon) {
        return Err(Error::Contract("sink time beyond horizon".into()));
    }
    if bulk.width() > bounds.width || bulk.height() > bounds.horizon {
        return Err(Error::Contract(format!(
            "planar points span {} x {}, box is {} x {}",
            bulk.width(),
            bulk.height(),
            bounds.width,
            bounds.horizon
        )));
    }
    let mut state = EngineState::new(sources, bounds, record)?;
    for e in build_event_queue(sinks, bulk) {
        state.step(&e)?;
    }
    Ok(state.finish(sources.len()))
}

/// Writes trajectories as `particle_id,time,position` rows.
pub fn write_trajectories_csv<W: Write>(paths: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["particle_id", "time", "position"])?;
    for tr in paths {
        for &(time, pos) in &tr.vertices {
            w.write_record([tr.particle_id.to_string(), time.to_string(), pos.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> BoxParams {
        BoxParams::new(1.0, 1.0).unwrap()
    }

    fn set(points: &[f64]) -> PointSet1D {
        PointSet1D::new(points.to_vec(), 1.0).unwrap()
    }

    fn planar(points: &[(f64, f64)]) -> PlanarPoints {
        PlanarPoints::new(points.to_vec(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn empty_queue() {
        assert!(build_event_queue(&set(&[]), &planar(&[])).is_empty());
    }

    #[test]
    fn queue_sorted_by_time() {
        let q = build_event_queue(&set(&[0.7]), &planar(&[(0.2, 0.3)]));
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].kind, EventKind::Bulk { y: 0.2 });
        assert_eq!(q[0].time, 0.3);
        assert_eq!(q[1].kind, EventKind::Sink);
        assert_eq!(q[1].time, 0.7);
    }

    #[test]
    fn sink_first_on_tie() {
        let q = build_event_queue(&set(&[0.3]), &planar(&[(0.5, 0.3)]));
        assert!(q[0].is_sink());
        assert!(q[0].precedes(&q[1]));
        assert!(!q[1].precedes(&q[0]));
    }

    fn state_with(points: &[f64]) -> EngineState {
        EngineState::new(&set(points), unit_box(), false).unwrap()
    }

    fn bulk(time: f64, y: f64) -> Event {
        Event {
            time,
            kind: EventKind::Bulk { y },
            index: 0,
        }
    }

    fn sink(time: f64) -> Event {
        Event {
            time,
            kind: EventKind::Sink,
            index: 0,
        }
    }

    #[test]
    fn bulk_pulls_nearest_right() {
        let mut st = state_with(&[0.5]);
        let eff = st.step(&bulk(0.1, 0.2)).unwrap();
        assert_eq!(eff, StepEffect::Jump { from: 0.5, to: 0.2 });
        assert_eq!(st.live().iter().copied().collect::<Vec<_>>(), vec![0.2]);
    }

    #[test]
    fn sink_absorbs_leftmost() {
        let mut st = state_with(&[0.2]);
        assert_eq!(st.step(&sink(0.1)).unwrap(), StepEffect::Absorbed { from: 0.2 });
        assert!(st.live().is_empty());
        assert_eq!(st.absorbed_count(), 1);
    }

    #[test]
    fn sink_on_empty_system_counts_created() {
        let mut st = state_with(&[]);
        assert_eq!(st.step(&sink(0.1)).unwrap(), StepEffect::Created);
        assert!(st.live().is_empty());
        assert_eq!(st.created_count(), 1);
        assert_eq!(st.absorbed_count(), 0);
    }

    #[test]
    fn strictly_right_of_y() {
        // A particle exactly at y is not selected.
        let mut st = state_with(&[0.4, 0.8]);
        assert_eq!(st.step(&bulk(0.1, 0.4)).unwrap(), StepEffect::Jump { from: 0.8, to: 0.4 });
    }

    #[test]
    fn events_out_of_order_rejected() {
        let mut st = state_with(&[0.5]);
        st.step(&bulk(0.5, 0.2)).unwrap();
        assert!(matches!(st.step(&bulk(0.4, 0.1)), Err(Error::Contract(_))));
        assert!(matches!(st.step(&sink(1.5)), Err(Error::Contract(_))));
    }

    #[test]
    fn run_bulk_then_sink() {
        let out = run(&set(&[0.5]), &set(&[0.7]), &planar(&[(0.2, 0.3)]), unit_box(), false)
            .unwrap();
        assert!(out.final_positions.is_empty());
        assert_eq!(out.sink_events, 1);
        assert_eq!(out.created, 0);
        assert!(out.entries.is_empty());
        assert!(out.conservation_holds());
    }

    #[test]
    fn run_entry() {
        let out = run(&set(&[]), &set(&[]), &planar(&[(0.5, 0.5)]), unit_box(), false).unwrap();
        assert_eq!(out.final_positions.points(), &[0.5]);
        assert_eq!(out.entries.points(), &[0.5]);
        assert!(out.conservation_holds());
    }

    #[test]
    fn run_picks_nearest_of_two() {
        let out = run(&set(&[0.3, 0.6]), &set(&[]), &planar(&[(0.4, 0.5)]), unit_box(), false)
            .unwrap();
        assert_eq!(out.final_positions.points(), &[0.3, 0.4]);
    }

    #[test]
    fn no_events_keeps_sources() {
        let s = set(&[0.1, 0.45, 0.9]);
        let out = run(&s, &set(&[]), &planar(&[]), unit_box(), false).unwrap();
        assert_eq!(out.final_positions, s);
    }

    #[test]
    fn trajectories_follow_identity() {
        let out = run(
            &set(&[0.3, 0.6]),
            &set(&[0.8]),
            &planar(&[(0.4, 0.5), (0.9, 0.6)]),
            unit_box(),
            true,
        )
        .unwrap();
        let paths = out.trajectories.unwrap();
        assert_eq!(paths.len(), 3);
        // 0.3 is absorbed at 0.8.
        assert_eq!(paths[0].vertices, vec![(0.0, 0.3), (0.8, 0.0)]);
        // 0.6 jumps to 0.4 and survives.
        assert_eq!(paths[1].vertices, vec![(0.0, 0.6), (0.5, 0.4), (1.0, 0.4)]);
        // entry at 0.9.
        assert_eq!(paths[2].vertices, vec![(0.6, 1.0), (0.6, 0.9), (1.0, 0.9)]);
        for p in &paths {
            assert!(p.vertices.windows(2).all(|w| w[1].1 <= w[0].1));
        }

        let mut buf = Vec::new();
        write_trajectories_csv(&paths, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("particle_id,time,position\n0,0,0.3\n"));
    }

    #[test]
    fn invalid_box_rejected() {
        assert!(BoxParams::new(0.0, 1.0).is_err());
        assert!(BoxParams::new(1.0, -1.0).is_err());
    }
}
