//! Last-passage values by brute-force dynamic programming, plus patience
//! sorting for the interior-only case.
//!
//! A decorated point set mixes sources on the space axis, sinks on the time
//! axis and interior planar points. Up-right chains may run along one axis
//! before leaving it, but never along both, and never return to an axis.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randgen::{PlanarPoints, PointSet1D, Stream};
use crate::stats::MomentAccumulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Source,
    Sink,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoratedPoint {
    pub kind: PointKind,
    pub y: f64,
    pub s: f64,
}

impl DecoratedPoint {
    pub fn source(y: f64) -> Self {
        Self { kind: PointKind::Source, y, s: 0.0 }
    }

    pub fn sink(s: f64) -> Self {
        Self { kind: PointKind::Sink, y: 0.0, s }
    }

    pub fn interior(y: f64, s: f64) -> Self {
        Self { kind: PointKind::Interior, y, s }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            PointKind::Source => self.s == 0.0 && self.y >= 0.0,
            PointKind::Sink => self.y == 0.0 && self.s >= 0.0,
            PointKind::Interior => self.y > 0.0 && self.s > 0.0,
        };
        if ok && self.y.is_finite() && self.s.is_finite() {
            Ok(())
        } else {
            Err(Error::Data(format!("invalid {:?} point ({}, {})", self.kind, self.y, self.s)))
        }
    }
}

/// The chain order: `a` strictly precedes `b`.
pub fn precedes(a: &DecoratedPoint, b: &DecoratedPoint) -> bool {
    use PointKind::*;
    match (a.kind, b.kind) {
        (Interior, Interior) => a.y < b.y && a.s < b.s,
        (Source, Source) => a.y < b.y,
        (Sink, Sink) => a.s < b.s,
        (Source, Interior) => a.y < b.y,
        (Sink, Interior) => a.s < b.s,
        (Source, Sink) | (Sink, Source) => false,
        (Interior, Source) | (Interior, Sink) => false,
    }
}

fn rank(p: &DecoratedPoint) -> (u8, f64, f64) {
    match p.kind {
        PointKind::Source => (0, p.y, 0.0),
        PointKind::Sink => (1, p.s, 0.0),
        PointKind::Interior => (2, p.s, p.y),
    }
}

/// Maximum chain length over an arbitrary decorated point set, O(n^2).
pub fn longest_chain_decorated(points: &[DecoratedPoint]) -> usize {
    let mut pts = points.to_vec();
    // Any linear extension works; boundary points first, interior by time.
    pts.sort_by(|a, b| {
        let (ka, xa, ya) = rank(a);
        let (kb, xb, yb) = rank(b);
        ka.cmp(&kb).then(xa.total_cmp(&xb)).then(ya.total_cmp(&yb))
    });
    let mut best = vec![1usize; pts.len()];
    for j in 0..pts.len() {
        for i in 0..j {
            if best[i] + 1 > best[j] && precedes(&pts[i], &pts[j]) {
                best[j] = best[i] + 1;
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

pub fn decorate(sources: &PointSet1D, sinks: &PointSet1D, bulk: &PlanarPoints) -> Vec<DecoratedPoint> {
    sources
        .points()
        .iter()
        .map(|&y| DecoratedPoint::source(y))
        .chain(sinks.points().iter().map(|&s| DecoratedPoint::sink(s)))
        .chain(bulk.points().iter().map(|p| DecoratedPoint::interior(p.y, p.s)))
        .collect()
}

/// Last-passage value `M(x, t)` of the decorated configuration.
pub fn longest_chain(sources: &PointSet1D, sinks: &PointSet1D, bulk: &PlanarPoints) -> usize {
    longest_chain_decorated(&decorate(sources, sinks, bulk))
}

/// Longest chain increasing in both coordinates among planar points, by
/// patience sorting in O(n log n).
pub fn lis_interior(bulk: &PlanarPoints) -> usize {
    let mut pts: Vec<(f64, f64)> = bulk.points().iter().map(|p| (p.s, p.y)).collect();
    // Equal times must not chain: visit them with y descending.
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut tails: Vec<f64> = Vec::new();
    for (_, y) in pts {
        let k = tails.partition_point(|&t| t < y);
        if k == tails.len() {
            tails.push(y);
        } else {
            tails[k] = y;
        }
    }
    tails.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlamEstimate {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One sample of `L_n`: LIS of `n` uniform points in the unit square.
pub fn sample_lis(n: usize, rng: &mut Stream) -> usize {
    use rand::Rng;
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let bulk = PlanarPoints::new(pts, 1.0, 1.0).expect("unit square points");
    lis_interior(&bulk)
}

/// Mean of `L_n / sqrt(n)` over `replicas` samples with a 95% normal interval.
pub fn ulam_ratio(n: usize, replicas: usize, rng: &mut Stream) -> Result<UlamEstimate> {
    if n == 0 || replicas == 0 {
        return Err(Error::Parameter("ulam_ratio needs n >= 1 and replicas >= 1".into()));
    }
    let root = (n as f64).sqrt();
    let mut acc = MomentAccumulator::new();
    for _ in 0..replicas {
        acc.push(sample_lis(n, rng) as f64 / root);
    }
    Ok(ulam_estimate(n, &acc))
}

pub(crate) fn ulam_estimate(n: usize, acc: &MomentAccumulator) -> UlamEstimate {
    let std_err = acc.std_err().unwrap_or(0.0);
    UlamEstimate {
        n,
        replicas: acc.count() as usize,
        mean: acc.mean(),
        std_err,
        ci_low: acc.mean() - 1.96 * std_err,
        ci_high: acc.mean() + 1.96 * std_err,
    }
}

#[derive(Debug, Deserialize)]
struct PointRow {
    kind: PointKind,
    y: f64,
    s: f64,
}

/// Reads a `kind,y,s` CSV of decorated points, validating each row.
pub fn read_decorated_csv<R: Read>(input: R) -> Result<Vec<DecoratedPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<PointRow>().enumerate() {
        let row = row?;
        let p = DecoratedPoint { kind: row.kind, y: row.y, s: row.s };
        p.validate()
            .map_err(|e| Error::Data(format!("row {}: {e}", line + 1)))?;
        out.push(p);
    }
    Ok(out)
}
