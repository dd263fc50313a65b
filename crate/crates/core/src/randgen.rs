//! Deterministic random streams and homogeneous Poisson point processes.
//!
//! Every random quantity in the laboratory is drawn from a stream derived from a
//! [`StreamKey`]: a master seed plus a path of labels. The key is hashed with
//! SHA-256 and the digest seeds a ChaCha8 generator, so a replica's stream
//! depends only on its own label path and never on how many other replicas ran
//! before it.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Generator handed out by [`derive_stream`].
pub type Stream = ChaCha8Rng;

/// One element of a stream label path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub experiment: String,
    pub replica: u64,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub labels: Vec<Label>,
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            labels: Vec::new(),
        }
    }

    /// Returns a key extended by one more label.
    pub fn child(&self, experiment: &str, replica: u64, role: &str) -> Self {
        let mut labels = self.labels.clone();
        labels.push(Label {
            experiment: experiment.to_owned(),
            replica,
            role: role.to_owned(),
        });
        Self {
            master_seed: self.master_seed,
            labels,
        }
    }

    /// Human-readable form of the label path, used in CSV rows and manifests.
    pub fn path(&self) -> String {
        let mut out = format!("{}", self.master_seed);
        for l in &self.labels {
            out.push('/');
            out.push_str(&format!("{}:{}:{}", l.experiment, l.replica, l.role));
        }
        out
    }

    fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"had-lab stream v1");
        h.update(self.master_seed.to_le_bytes());
        for l in &self.labels {
            // Length prefixes keep ("ab","c") and ("a","bc") apart.
            h.update((l.experiment.len() as u64).to_le_bytes());
            h.update(l.experiment.as_bytes());
            h.update(l.replica.to_le_bytes());
            h.update((l.role.len() as u64).to_le_bytes());
            h.update(l.role.as_bytes());
        }
        h.finalize().into()
    }
}

/// Derives the generator for `key`. Equal keys give bit-identical streams.
pub fn derive_stream(key: &StreamKey) -> Stream {
    ChaCha8Rng::from_seed(key.digest())
}

fn total_order(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// A sorted finite multiset of reals in `[0, length]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointSet1D {
    points: Vec<f64>,
    length: f64,
}

impl PointSet1D {
    pub fn empty(length: f64) -> Self {
        Self {
            points: Vec::new(),
            length,
        }
    }

    /// Builds a point set, sorting the input. Fails if a point is outside
    /// `[0, length]` or not finite.
    pub fn new(mut points: Vec<f64>, length: f64) -> Result<Self> {
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::Parameter(format!("length must be >= 0, got {length}")));
        }
        if let Some(p) = points
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > length)
        {
            return Err(Error::Data(format!("point {p} outside [0, {length}]")));
        }
        // Stable sort: equal values keep insertion order.
        points.sort_by(|a, b| total_order(*a, *b));
        Ok(Self { points, length })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<f64> {
        self.points.first().copied()
    }

    /// Number of points in the closed window `[0, upper]`.
    pub fn count_up_to(&self, upper: f64) -> usize {
        self.points.partition_point(|&p| p <= upper)
    }

    /// Superposition of two point sets on the same range.
    pub fn union(&self, other: &PointSet1D) -> Result<PointSet1D> {
        if self.length != other.length {
            return Err(Error::Parameter(format!(
                "cannot superpose point sets of lengths {} and {}",
                self.length, other.length
            )));
        }
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.points.len() && j < other.points.len() {
            if total_order(other.points[j], self.points[i]) == Ordering::Less {
                merged.push(other.points[j]);
                j += 1;
            } else {
                merged.push(self.points[i]);
                i += 1;
            }
        }
        merged.extend_from_slice(&self.points[i..]);
        merged.extend_from_slice(&other.points[j..]);
        Ok(PointSet1D {
            points: merged,
            length: self.length,
        })
    }

    /// The set with its smallest point removed.
    pub fn without_first(&self) -> PointSet1D {
        PointSet1D {
            points: self.points.iter().skip(1).copied().collect(),
            length: self.length,
        }
    }

    /// Consecutive gaps starting from the origin: `p1 - 0, p2 - p1, ...`.
    pub fn gaps_from_origin(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.points
            .iter()
            .map(|&p| {
                let g = p - prev;
                prev = p;
                g
            })
            .collect()
    }
}

/// A point `(y, s)` of the planar process: `y` is space, `s` is time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub y: f64,
    pub s: f64,
}

/// Finite planar point set in `[0, width] x [0, height]`, sorted by time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoints {
    points: Vec<PlanarPoint>,
    width: f64,
    height: f64,
}

impl PlanarPoints {
    pub fn empty(width: f64, height: f64) -> Self {
        Self {
            points: Vec::new(),
            width,
            height,
        }
    }

    /// Builds a planar set from `(y, s)` pairs, sorting by `s`, then `y`, then
    /// insertion order.
    pub fn new(points: Vec<(f64, f64)>, width: f64, height: f64) -> Result<Self> {
        if !(width >= 0.0 && height >= 0.0) || !width.is_finite() || !height.is_finite() {
            return Err(Error::Parameter(format!(
                "box dimensions must be >= 0, got {width} x {height}"
            )));
        }
        let mut pts = Vec::with_capacity(points.len());
        for (y, s) in points {
            if !(0.0..=width).contains(&y) || !(0.0..=height).contains(&s) {
                return Err(Error::Data(format!(
                    "point ({y}, {s}) outside [0, {width}] x [0, {height}]"
                )));
            }
            pts.push(PlanarPoint { y, s });
        }
        sort_planar(&mut pts);
        Ok(Self {
            points: pts,
            width,
            height,
        })
    }

    pub fn points(&self) -> &[PlanarPoint] {
        &self.points
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn sort_planar(pts: &mut [PlanarPoint]) {
    pts.sort_by(|a, b| total_order(a.s, b.s).then(total_order(a.y, b.y)));
}

fn poisson_count(mean: f64, rng: &mut Stream) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::Parameter(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}

/// Homogeneous Poisson process of intensity `rate` on `[0, length]`.
pub fn poisson_1d(rate: f64, length: f64, rng: &mut Stream) -> Result<PointSet1D> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::Parameter(format!("rate must be >= 0, got {rate}")));
    }
    if !(length >= 0.0) || !length.is_finite() {
        return Err(Error::Parameter(format!("length must be >= 0, got {length}")));
    }
    let n = poisson_count(rate * length, rng)?;
    let mut points: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * length).collect();
    points.sort_by(|a, b| total_order(*a, *b));
    Ok(PointSet1D { points, length })
}

/// Homogeneous planar Poisson process of intensity `rate` on the box
/// `[0, width] x [0, height]`, sorted by time.
pub fn poisson_2d(rate: f64, width: f64, height: f64, rng: &mut Stream) -> Result<PlanarPoints> {
    for (name, v) in [("rate", rate), ("width", width), ("height", height)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!("{name} must be >= 0, got {v}")));
        }
    }
    let n = poisson_count(rate * width * height, rng)?;
    let mut points: Vec<PlanarPoint> = (0..n)
        .map(|_| {
            let y = rng.random::<f64>() * width;
            let s = rng.random::<f64>() * height;
            PlanarPoint { y, s }
        })
        .collect();
    sort_planar(&mut points);
    Ok(PlanarPoints {
        points,
        width,
        height,
    })
}
