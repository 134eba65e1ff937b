//! Closed-form optimal discriminators of unconstrained GAN objectives over
//! exact densities, and the gradient fields they induce on samples.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::Point;

/// Densities below this are treated as zero wherever a formula divides by them.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnalyticDensity {
    /// Mixture of axis-aligned Gaussians.
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Point>,
        stds: Vec<Vec<f64>>,
    },
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl AnalyticDensity {
    pub fn gaussian_mixture(weights: Vec<f64>, means: Vec<Point>, stds: Vec<Vec<f64>>) -> Result<Self> {
        if means.is_empty() || weights.len() != means.len() || stds.len() != means.len() {
            return Err(Error::Invalid(format!(
                "mixture needs matching non-empty weights/means/stds ({}/{}/{})",
                weights.len(),
                means.len(),
                stds.len()
            )));
        }
        let dim = means[0].dim();
        for (m, s) in means.iter().zip(&stds) {
            ensure_dim(dim, m.dim())?;
            ensure_dim(dim, s.len())?;
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Invalid("standard deviations must be positive".into()));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Invalid("mixture weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("mixture weights sum to {total}")));
        }
        Ok(Self::GaussianMixture {
            weights,
            means,
            stds,
        })
    }

    /// Isotropic Gaussian N(mean, std²·I).
    pub fn gaussian(mean: Point, std: f64) -> Result<Self> {
        let dim = mean.dim();
        Self::gaussian_mixture(vec![1.0], vec![mean], vec![vec![std; dim]])
    }

    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Invalid("box corners must share a positive dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(Error::Invalid("box corners must be ordered lower < upper".into()));
        }
        Ok(Self::UniformBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianMixture { means, .. } => means[0].dim(),
            Self::UniformBox { lower, .. } => lower.len(),
        }
    }

    /// Copy moved by `v`.
    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        ensure_dim(self.dim(), v.len())?;
        Ok(match self {
            Self::GaussianMixture {
                weights,
                means,
                stds,
            } => Self::GaussianMixture {
                weights: weights.clone(),
                means: means.iter().map(|m| m.offset(v, 1.0)).collect::<Result<_>>()?,
                stds: stds.clone(),
            },
            Self::UniformBox { lower, upper } => Self::UniformBox {
                lower: lower.iter().zip(v).map(|(a, b)| a + b).collect(),
                upper: upper.iter().zip(v).map(|(a, b)| a + b).collect(),
            },
        })
    }
}

fn gaussian_component(x: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    let mut log = 0.0;
    for ((xi, mi), si) in x.iter().zip(mean).zip(std) {
        let z = (xi - mi) / si;
        log += -0.5 * z * z - si.ln() - 0.5 * (2.0 * PI).ln();
    }
    log.exp()
}

pub fn density_value(d: &AnalyticDensity, x: &Point) -> Result<f64> {
    ensure_dim(d.dim(), x.dim())?;
    Ok(match d {
        AnalyticDensity::GaussianMixture {
            weights,
            means,
            stds,
        } => weights
            .iter()
            .zip(means)
            .zip(stds)
            .map(|((w, m), s)| w * gaussian_component(x, m, s))
            .sum(),
        AnalyticDensity::UniformBox { lower, upper } => {
            let inside = x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u);
            if inside {
                1.0 / lower.iter().zip(upper).map(|(l, u)| u - l).product::<f64>()
            } else {
                0.0
            }
        }
    })
}

pub fn density_grad(d: &AnalyticDensity, x: &Point) -> Result<Vec<f64>> {
    ensure_dim(d.dim(), x.dim())?;
    match d {
        AnalyticDensity::GaussianMixture {
            weights,
            means,
            stds,
        } => {
            let mut g = vec![0.0; x.dim()];
            for ((w, m), s) in weights.iter().zip(means).zip(stds) {
                let p = w * gaussian_component(x, m, s);
                for i in 0..g.len() {
                    g[i] -= p * (x[i] - m[i]) / (s[i] * s[i]);
                }
            }
            Ok(g)
        }
        AnalyticDensity::UniformBox { lower, upper } => {
            let closed = x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u);
            let on_face = x
                .iter()
                .zip(lower.iter().zip(upper))
                .any(|(v, (l, u))| v == l || v == u);
            if closed && on_face {
                Err(Error::NonDifferentiable(x.to_vec()))
            } else {
                Ok(vec![0.0; x.dim()])
            }
        }
    }
}

/// Optimal discriminators of traditional objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClosedFormSpec {
    /// Original GAN: `f* = log(P_r / P_g)`.
    Js,
    /// Least-squares GAN with fake label `alpha` and real label `beta`.
    LeastSquares { alpha: f64, beta: f64 },
    /// μ-Fisher IPM: `f* ∝ (P_r − P_g) / μ`; the positive normaliser is dropped.
    Fisher { mu: AnalyticDensity },
}

impl ClosedFormSpec {
    pub fn least_squares(alpha: f64, beta: f64) -> Result<Self> {
        if alpha == beta {
            return Err(Error::Invalid("least-squares labels must differ".into()));
        }
        Ok(Self::LeastSquares { alpha, beta })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Js => "js",
            Self::LeastSquares { .. } => "least_squares",
            Self::Fisher { .. } => "fisher",
        }
    }
}

fn floor_check(x: &Point, density: f64) -> Result<()> {
    if density < DENSITY_FLOOR {
        Err(Error::OffSupport {
            at: x.to_vec(),
            density,
        })
    } else {
        Ok(())
    }
}

pub fn fstar_value(
    spec: &ClosedFormSpec,
    pg: &AnalyticDensity,
    pr: &AnalyticDensity,
    x: &Point,
) -> Result<f64> {
    let g = density_value(pg, x)?;
    let r = density_value(pr, x)?;
    match spec {
        ClosedFormSpec::Js => {
            floor_check(x, g)?;
            floor_check(x, r)?;
            Ok((r / g).ln())
        }
        ClosedFormSpec::LeastSquares { alpha, beta } => {
            floor_check(x, g + r)?;
            Ok((alpha * g + beta * r) / (g + r))
        }
        ClosedFormSpec::Fisher { mu } => {
            let m = density_value(mu, x)?;
            floor_check(x, m)?;
            Ok((r - g) / m)
        }
    }
}

pub fn fstar_grad(
    spec: &ClosedFormSpec,
    pg: &AnalyticDensity,
    pr: &AnalyticDensity,
    x: &Point,
) -> Result<Vec<f64>> {
    let g = density_value(pg, x)?;
    let r = density_value(pr, x)?;
    let dg = density_grad(pg, x)?;
    let dr = density_grad(pr, x)?;
    match spec {
        ClosedFormSpec::Js => {
            floor_check(x, g)?;
            floor_check(x, r)?;
            Ok(dr.iter().zip(&dg).map(|(a, b)| a / r - b / g).collect())
        }
        ClosedFormSpec::LeastSquares { alpha, beta } => {
            let s = g + r;
            floor_check(x, s)?;
            // d/dx (αg + βr)/(g + r) = (β − α)(g·r′ − r·g′)/(g + r)²
            let scale = (beta - alpha) / (s * s);
            Ok(dr
                .iter()
                .zip(&dg)
                .map(|(drv, dgv)| scale * (g * drv - r * dgv))
                .collect())
        }
        ClosedFormSpec::Fisher { mu } => {
            let m = density_value(mu, x)?;
            floor_check(x, m)?;
            let dm = density_grad(mu, x)?;
            Ok((0..x.dim())
                .map(|i| ((dr[i] - dg[i]) * m - (r - g) * dm[i]) / (m * m))
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub at: Point,
    pub grad: Result<Vec<f64>>,
}

/// `∇ₓf*` over `grid`; per-point failures are kept in place.
pub fn grad_field(
    spec: &ClosedFormSpec,
    pg: &AnalyticDensity,
    pr: &AnalyticDensity,
    grid: &[Point],
) -> Vec<FieldSample> {
    grid.iter()
        .map(|x| FieldSample {
            at: x.clone(),
            grad: fstar_grad(spec, pg, pr, x),
        })
        .collect()
}

/// Evenly spaced 1-D grid on `[lo, hi]` with `n >= 2` points.
pub fn line_grid(lo: f64, hi: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| Point::new(vec![lo + (hi - lo) * i as f64 / (n - 1) as f64]).expect("finite"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn normal(mean: f64, std: f64) -> AnalyticDensity {
        AnalyticDensity::gaussian(p(&[mean]), std).unwrap()
    }

    fn two_modes(c: f64, s: f64) -> AnalyticDensity {
        AnalyticDensity::gaussian_mixture(vec![0.5, 0.5], vec![p(&[-c]), p(&[c])], vec![vec![s], vec![s]])
            .unwrap()
    }

    fn central_diff(f: impl Fn(&Point) -> f64, x: &Point, h: f64) -> Vec<f64> {
        (0..x.dim())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f(&p(&a)) - f(&p(&b))) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn density_examples() {
        assert_relative_eq!(
            density_value(&normal(0.0, 1.0), &p(&[0.0])).unwrap(),
            1.0 / (2.0 * PI).sqrt(),
            epsilon = 1e-15
        );
        let unit = AnalyticDensity::uniform_box(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(density_value(&unit, &p(&[0.5])).unwrap(), 1.0);
        assert_eq!(density_value(&unit, &p(&[1.5])).unwrap(), 0.0);
        let mix = two_modes(1.0, 1.0);
        assert_relative_eq!(
            density_value(&mix, &p(&[0.0])).unwrap(),
            density_value(&normal(1.0, 1.0), &p(&[0.0])).unwrap(),
            epsilon = 1e-15
        );
        assert!(density_value(&mix, &p(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn density_constructors_validate() {
        assert!(AnalyticDensity::gaussian(p(&[0.0]), 0.0).is_err());
        assert!(AnalyticDensity::uniform_box(vec![1.0], vec![0.0]).is_err());
        assert!(AnalyticDensity::gaussian_mixture(vec![0.3, 0.3], vec![p(&[0.0]), p(&[1.0])], vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn density_gradient_examples() {
        let n = normal(0.0, 1.0);
        assert_eq!(density_grad(&n, &p(&[0.0])).unwrap(), vec![0.0]);
        for x in [-2.0, -0.3, 0.7, 1.9] {
            let pdf = density_value(&n, &p(&[x])).unwrap();
            assert_relative_eq!(density_grad(&n, &p(&[x])).unwrap()[0], -x * pdf, epsilon = 1e-15);
        }
        let unit = AnalyticDensity::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(density_grad(&unit, &p(&[1.0, 0.5])), Err(Error::NonDifferentiable(_))));
        assert_eq!(density_grad(&unit, &p(&[0.5, 0.5])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(density_grad(&unit, &p(&[2.0, 1.0])).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn density_gradient_matches_finite_differences() {
        let d = AnalyticDensity::gaussian_mixture(
            vec![0.3, 0.7],
            vec![p(&[0.0, 1.0]), p(&[-1.0, 0.5])],
            vec![vec![0.8, 1.2], vec![0.5, 0.6]],
        )
        .unwrap();
        for x in [[0.1, 0.2], [-1.3, 0.4], [0.9, -0.7], [-0.5, 1.5]] {
            let x = p(&x);
            let g = density_grad(&d, &x).unwrap();
            let fd = central_diff(|y| density_value(&d, y).unwrap(), &x, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn fstar_examples() {
        let d = normal(0.3, 0.9);
        for x in [-1.0, 0.0, 2.0] {
            assert_eq!(fstar_value(&ClosedFormSpec::Js, &d, &d, &p(&[x])).unwrap(), 0.0);
            assert_eq!(fstar_grad(&ClosedFormSpec::Js, &d, &d, &p(&[x])).unwrap(), vec![0.0]);
            let ls = ClosedFormSpec::least_squares(0.0, 1.0).unwrap();
            assert_eq!(fstar_value(&ls, &d, &d, &p(&[x])).unwrap(), 0.5);
        }
        // P_r = 2·P_g on the inner box
        let pg = AnalyticDensity::uniform_box(vec![0.0], vec![2.0]).unwrap();
        let pr = AnalyticDensity::uniform_box(vec![0.0], vec![1.0]).unwrap();
        assert_relative_eq!(
            fstar_value(&ClosedFormSpec::Js, &pg, &pr, &p(&[0.5])).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert!(matches!(
            fstar_value(&ClosedFormSpec::Js, &pg, &pr, &p(&[1.5])),
            Err(Error::OffSupport { .. })
        ));
        assert!(ClosedFormSpec::least_squares(1.0, 1.0).is_err());
    }

    #[test]
    fn fstar_grad_matches_finite_differences() {
        let (c, s) = (2.0, 0.5);
        let pr = two_modes(c, s);
        let pg = normal(-c, s);
        let mu = AnalyticDensity::uniform_box(vec![-10.0], vec![10.0]).unwrap();
        let specs = [
            ClosedFormSpec::Js,
            ClosedFormSpec::least_squares(0.0, 1.0).unwrap(),
            ClosedFormSpec::Fisher { mu },
        ];
        for spec in &specs {
            for i in 0..=40 {
                let x = p(&[-c - s + i as f64 * (2.0 * s / 40.0) + 1e-3]);
                let g = fstar_grad(spec, &pg, &pr, &x).unwrap()[0];
                let fd = central_diff(|y| fstar_value(spec, &pg, &pr, y).unwrap(), &x, 1e-6)[0];
                assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-3), "{spec:?} at {x:?}: {g} vs {fd}");
                if g.abs() > 1e-6 {
                    assert_eq!(g.signum(), fd.signum());
                }
            }
        }
    }

    #[test]
    fn fisher_pushes_far_points_away_from_mode_a() {
        let (c, s) = (2.0, 0.5);
        let pr = two_modes(c, s);
        let pg = normal(-c, s);
        let mu = AnalyticDensity::uniform_box(vec![-10.0], vec![10.0]).unwrap();
        let spec = ClosedFormSpec::Fisher { mu };
        for x in [-c - 1.5 * s, -c - 2.0 * s, -c - 3.0 * s] {
            let g = fstar_grad(&spec, &pg, &pr, &p(&[x])).unwrap()[0];
            let fd = central_diff(|y| fstar_value(&spec, &pg, &pr, y).unwrap(), &p(&[x]), 1e-6)[0];
            assert!(g < 0.0 && fd < 0.0, "x={x}: {g}, {fd}");
        }
    }

    #[test]
    fn grad_field_cases() {
        let d = normal(0.0, 1.0);
        assert!(grad_field(&ClosedFormSpec::Js, &d, &d, &[]).is_empty());

        // even densities give an odd field
        let pr = two_modes(2.0, 0.5);
        let pg = normal(0.0, 1.0);
        let grid = line_grid(-3.0, 3.0, 61);
        let field = grad_field(&ClosedFormSpec::Js, &pg, &pr, &grid);
        for (a, b) in field.iter().zip(field.iter().rev()) {
            let (ga, gb) = (a.grad.as_ref().unwrap()[0], b.grad.as_ref().unwrap()[0]);
            assert!((ga + gb).abs() <= 1e-9 * ga.abs().max(1.0), "{ga} vs {gb}");
        }

        let off = AnalyticDensity::uniform_box(vec![-1.0], vec![1.0]).unwrap();
        let field = grad_field(&ClosedFormSpec::Js, &off, &pr, &line_grid(-3.0, 3.0, 7));
        assert!(field[0].grad.is_err());
        assert!(field[3].grad.is_ok());
    }

    #[test]
    fn js_arrows_near_mode_a_point_to_its_mean() {
        let (c, s) = (2.0, 0.5);
        let pr = two_modes(c, s);
        // fake samples spread uniformly around mode A
        let pg = AnalyticDensity::uniform_box(vec![-c - 3.0 * s], vec![-c + 3.0 * s]).unwrap();
        let grid = line_grid(-c - 2.0 * s, -c + 2.0 * s, 41);
        for e in grad_field(&ClosedFormSpec::Js, &pg, &pr, &grid) {
            let x = e.at[0];
            if (x + c).abs() < 1e-9 {
                continue;
            }
            let fd = central_diff(|y| fstar_value(&ClosedFormSpec::Js, &pg, &pr, y).unwrap(), &e.at, 1e-6)[0];
            let g = e.grad.unwrap()[0];
            assert_eq!(g.signum(), (-c - x).signum(), "x={x}");
            assert_eq!(fd.signum(), g.signum());
        }
    }

    #[test]
    fn disjoint_support_values_ignore_real_location() {
        let pg = AnalyticDensity::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let pr = AnalyticDensity::uniform_box(vec![3.0, 0.0], vec![4.0, 1.0]).unwrap();
        let mu = AnalyticDensity::uniform_box(vec![-20.0, -20.0], vec![20.0, 20.0]).unwrap();
        let specs = [
            ClosedFormSpec::Js,
            ClosedFormSpec::least_squares(0.0, 1.0).unwrap(),
            ClosedFormSpec::Fisher { mu },
        ];
        let probes = [p(&[0.5, 0.5]), p(&[0.1, 0.9]), p(&[0.75, 0.2])];
        for shift in [[1.0, 0.0], [5.0, -3.0], [-6.0, 2.5]] {
            let moved = pr.translated(&shift).unwrap();
            for spec in &specs {
                for x in &probes {
                    assert_eq!(fstar_value(spec, &pg, &pr, x), fstar_value(spec, &pg, &moved, x));
                    assert_eq!(fstar_grad(spec, &pg, &pr, x), fstar_grad(spec, &pg, &moved, x));
                }
            }
        }
    }

    #[test]
    fn swapping_sides() {
        let pr = two_modes(1.5, 0.7);
        let pg = normal(-0.4, 1.1);
        for x in [-2.0, -0.5, 0.3, 1.8] {
            let x = p(&[x]);
            let a = fstar_value(&ClosedFormSpec::Js, &pg, &pr, &x).unwrap();
            let b = fstar_value(&ClosedFormSpec::Js, &pr, &pg, &x).unwrap();
            assert_relative_eq!(a, -b, epsilon = 1e-12);
            let ls = ClosedFormSpec::least_squares(-1.0, 2.0).unwrap();
            let swapped = ClosedFormSpec::least_squares(2.0, -1.0).unwrap();
            assert_relative_eq!(
                fstar_value(&ls, &pg, &pr, &x).unwrap(),
                fstar_value(&swapped, &pr, &pg, &x).unwrap(),
                epsilon = 1e-12
            );
        }
    }
}
