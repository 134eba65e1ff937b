//! Experiment presets: the real and fake sides of each toy problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::closed_form::AnalyticDensity;
use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{Point, PointCloud, Rng};

/// Mode separation of the 1-D two-Gaussian preset.
pub const DEFAULT_MODE_OFFSET: f64 = 2.0;
pub const DEFAULT_MODE_STD: f64 = 0.5;
/// Half width, in standard deviations, of the default uniform fake side.
pub const DEFAULT_FAKE_SPREAD: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ParallelLines,
    TwoGaussians1d,
    TwoDelta,
    RandomClouds,
    ImageCloud,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Self::ParallelLines,
        Self::TwoGaussians1d,
        Self::TwoDelta,
        Self::RandomClouds,
        Self::ImageCloud,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::ParallelLines => "parallel_lines",
            Self::TwoGaussians1d => "two_gaussians_1d",
            Self::TwoDelta => "two_delta",
            Self::RandomClouds => "random_clouds",
            Self::ImageCloud => "image_cloud",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.label() == s).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|p| p.label()).collect();
            Error::Invalid(format!("unknown preset `{s}`; valid options: {}", valid.join(", ")))
        })
    }
}

/// Shape of the fake side in the 1-D two-Gaussian preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FakeShape {
    /// Uniform on `[−c − s·σ, −c + s·σ]`.
    Uniform { spread: f64 },
    /// `N(−c, σ)`, the same law as mode A.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sides {
    Clouds { real: PointCloud, fake: PointCloud },
    Densities { real: AnalyticDensity, fake: AnalyticDensity },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub preset: Preset,
    pub sides: Sides,
}

impl Scenario {
    pub fn from_clouds(name: impl Into<String>, preset: Preset, real: PointCloud, fake: PointCloud) -> Result<Self> {
        ensure_dim(real.dim(), fake.dim())?;
        Ok(Self {
            name: name.into(),
            preset,
            sides: Sides::Clouds { real, fake },
        })
    }

    pub fn from_densities(
        name: impl Into<String>,
        preset: Preset,
        real: AnalyticDensity,
        fake: AnalyticDensity,
    ) -> Result<Self> {
        ensure_dim(real.dim(), fake.dim())?;
        Ok(Self {
            name: name.into(),
            preset,
            sides: Sides::Densities { real, fake },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.sides {
            Sides::Clouds { real, .. } => real.dim(),
            Sides::Densities { real, .. } => real.dim(),
        }
    }

    /// `(real, fake)` point clouds; errors for density-only scenarios.
    pub fn clouds(&self) -> Result<(&PointCloud, &PointCloud)> {
        match &self.sides {
            Sides::Clouds { real, fake } => Ok((real, fake)),
            Sides::Densities { .. } => Err(Error::Invalid(format!(
                "scenario `{}` is defined by densities, not point clouds",
                self.name
            ))),
        }
    }

    pub fn densities(&self) -> Result<(&AnalyticDensity, &AnalyticDensity)> {
        match &self.sides {
            Sides::Densities { real, fake } => Ok((real, fake)),
            Sides::Clouds { .. } => Err(Error::Invalid(format!(
                "scenario `{}` is defined by point clouds, not densities",
                self.name
            ))),
        }
    }

    /// `count` points per line: real on `x = 0`, fake on `x = gap`, both
    /// spanning `y ∈ [0, 1]`.
    pub fn parallel_lines(count: usize, gap: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::Invalid("parallel lines need at least two points per line".into()));
        }
        if !(gap.is_finite() && gap > 0.0) {
            return Err(Error::Invalid(format!("line gap must be positive, got {gap}")));
        }
        let line = |x: f64| {
            PointCloud::from_rows((0..count).map(|i| vec![x, i as f64 / (count - 1) as f64]).collect())
        };
        Self::from_clouds("parallel_lines", Preset::ParallelLines, line(0.0)?, line(gap)?)
    }

    /// Fake mass at the origin, real mass at `distance·e₁`.
    pub fn two_delta(distance: f64, dim: usize) -> Result<Self> {
        if dim == 0 || !(distance.is_finite() && distance >= 0.0) {
            return Err(Error::Invalid("two_delta needs dim >= 1 and a non-negative distance".into()));
        }
        let mut r = vec![0.0; dim];
        r[0] = distance;
        let real = PointCloud::uniform(vec![Point::new(r)?])?;
        let fake = PointCloud::uniform(vec![Point::zeros(dim)])?;
        Self::from_clouds("two_delta", Preset::TwoDelta, real, fake)
    }

    /// Real points uniform in a box of half-width `spread` centred at
    /// `separation·e₁`, fake points likewise around the origin. Disjoint
    /// whenever `separation > 2·spread`.
    pub fn random_clouds(
        n_real: usize,
        n_fake: usize,
        dim: usize,
        separation: f64,
        spread: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if n_real == 0 || n_fake == 0 || dim == 0 {
            return Err(Error::Invalid("random_clouds needs positive sizes and dimension".into()));
        }
        if !(spread.is_finite() && spread > 0.0 && separation.is_finite()) {
            return Err(Error::Invalid("random_clouds needs finite separation and positive spread".into()));
        }
        let mut draw = |n: usize, shift: f64| -> Result<PointCloud> {
            let pts = (0..n)
                .map(|_| {
                    let mut v: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-spread, spread)).collect();
                    v[0] += shift;
                    Point::new(v)
                })
                .collect::<Result<Vec<_>>>()?;
            PointCloud::uniform(pts)
        };
        let real = draw(n_real, separation)?;
        let fake = draw(n_fake, 0.0)?;
        Self::from_clouds("random_clouds", Preset::RandomClouds, real, fake)
    }

    /// Real: `½N(−c, σ) + ½N(c, σ)`. Fake: concentrated around mode A at `−c`.
    pub fn two_gaussians_1d(c: f64, sigma: f64, fake: FakeShape) -> Result<Self> {
        let real = AnalyticDensity::gaussian_mixture(
            vec![0.5, 0.5],
            vec![Point::new(vec![-c])?, Point::new(vec![c])?],
            vec![vec![sigma], vec![sigma]],
        )?;
        let fake = match fake {
            FakeShape::Uniform { spread } => {
                AnalyticDensity::uniform_box(vec![-c - spread * sigma], vec![-c + spread * sigma])?
            }
            FakeShape::Gaussian => AnalyticDensity::gaussian(Point::new(vec![-c])?, sigma)?,
        };
        Self::from_densities("two_gaussians_1d", Preset::TwoGaussians1d, real, fake)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::w1_primal;

    #[test]
    fn parallel_lines_layout() {
        let s = Scenario::parallel_lines(10, 1.0).unwrap();
        let (r, f) = s.clouds().unwrap();
        assert_eq!(r.len(), 10);
        assert_eq!(f.points()[9].coords(), &[1.0, 1.0]);
        assert!((w1_primal(r, f).unwrap().cost - 1.0).abs() < 1e-12);
        assert!(s.densities().is_err());
        assert!(Scenario::parallel_lines(1, 1.0).is_err());
    }

    #[test]
    fn two_delta_distance() {
        let s = Scenario::two_delta(2.0, 3).unwrap();
        let (r, f) = s.clouds().unwrap();
        assert!((w1_primal(r, f).unwrap().cost - 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_clouds_are_disjoint_and_reproducible() {
        let a = Scenario::random_clouds(20, 20, 2, 4.0, 1.0, &mut Rng::new(3)).unwrap();
        let b = Scenario::random_clouds(20, 20, 2, 4.0, 1.0, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
        let (r, f) = a.clouds().unwrap();
        let min_real = r.points().iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_fake = f.points().iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(min_real > max_fake);
    }

    #[test]
    fn preset_names() {
        for p in Preset::ALL {
            assert_eq!(p.label().parse::<Preset>().unwrap(), p);
        }
        assert!("moons".parse::<Preset>().is_err());
        let s = Scenario::two_gaussians_1d(2.0, 0.5, FakeShape::Gaussian).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.clouds().is_err());
    }
}
