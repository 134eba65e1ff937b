//! Points, weighted point clouds, distances, blend-region sampling and the
//! seeded generator every stochastic routine takes explicitly.

use std::ops::Deref;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Tolerance on the total mass of a [`PointCloud`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finite point in ℝⁿ, n ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Invalid("point must have dimension >= 1".into()));
        }
        if let Some(&bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "point coordinate".into(),
                value: bad,
            });
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "point dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self + scale * dir`.
    pub fn offset(&self, dir: &[f64], scale: f64) -> Result<Point> {
        ensure_dim(self.dim(), dir.len())?;
        Point::new(self.0.iter().zip(dir).map(|(a, d)| a + scale * d).collect())
    }

    /// `t * self + (1 - t) * other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Result<Point> {
        ensure_dim(self.dim(), other.dim())?;
        Point::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect(),
        )
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean distance without the dimension check; callers guarantee equal length.
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cosine of the angle between `a` and `b`; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

pub fn euclidean(a: &Point, b: &Point) -> Result<f64> {
    ensure_dim(a.dim(), b.dim())?;
    Ok(dist(a, b))
}

/// Manhattan distance. Only the norm counterexample probe uses it.
pub fn l1_distance(a: &Point, b: &Point) -> Result<f64> {
    ensure_dim(a.dim(), b.dim())?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum())
}

/// A weighted finite set of points of a common dimension; weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Invalid("point cloud needs at least one point".into()));
        };
        if weights.len() != points.len() {
            return Err(Error::Invalid(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        let dim = first.dim();
        for p in &points {
            ensure_dim(dim, p.dim())?;
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Invalid(format!("weight {w} is not a non-negative real")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Normalises arbitrary non-negative masses to a probability vector.
    pub fn from_masses(points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Invalid(format!("total mass {total} must be positive")));
        }
        Self::new(points, masses.into_iter().map(|m| m / total).collect())
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let points = rows.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
        Self::uniform(points)
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// True when all weights are equal (to within the mass tolerance).
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= WEIGHT_SUM_TOL)
    }

    /// Same weights, new locations.
    pub fn with_points(&self, points: Vec<Point>) -> Result<Self> {
        if points.len() != self.points.len() {
            return Err(Error::Invalid(format!(
                "replacement has {} points, cloud has {}",
                points.len(),
                self.points.len()
            )));
        }
        Self::new(points, self.weights.clone())
    }

    /// Every point shifted by `v`.
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        let moved = self
            .points
            .iter()
            .map(|p| p.offset(v, 1.0))
            .collect::<Result<Vec<_>>>()?;
        self.with_points(moved)
    }

    pub fn mean_of(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }
}

/// Seeded deterministic generator (ChaCha8, a counter-based stream cipher).
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream `stream` under the same seed; does not advance `self`.
    pub fn fork(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        Self {
            seed: self.seed,
            inner,
        }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    fn weighted(&mut self, sampler: &WeightedIndex<f64>) -> usize {
        sampler.sample(&mut self.inner)
    }
}

fn sampler(cloud: &PointCloud) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(cloud.weights()).map_err(|e| Error::Invalid(format!("cloud weights: {e}")))
}

/// `count` draws from `cloud` with replacement, as a uniform cloud.
pub fn resample(cloud: &PointCloud, count: usize, rng: &mut Rng) -> Result<PointCloud> {
    if count == 0 {
        return Err(Error::Invalid("resample count must be >= 1".into()));
    }
    let s = sampler(cloud)?;
    PointCloud::uniform((0..count).map(|_| cloud.points()[rng.weighted(&s)].clone()).collect())
}

/// Draws `count` points `t·x + (1−t)·y` with `x ~ pg`, `y ~ pr`, `t ~ U[0,1]`.
pub fn blend_sample(
    pg: &PointCloud,
    pr: &PointCloud,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Point>> {
    ensure_dim(pg.dim(), pr.dim())?;
    if count == 0 {
        return Err(Error::Invalid("blend sample count must be >= 1".into()));
    }
    let sg = sampler(pg)?;
    let sr = sampler(pr)?;
    (0..count)
        .map(|_| {
            let x = &pg.points()[rng.weighted(&sg)];
            let y = &pr.points()[rng.weighted(&sr)];
            let t = rng.uniform();
            x.lerp(y, t)
        })
        .collect()
}
