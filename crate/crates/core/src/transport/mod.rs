//! Exact Wasserstein-1 between point clouds: the primal transport plan and
//! the compact dual potential on the supports.

pub mod assignment;
pub mod lp;
pub mod transportation;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{dist, PointCloud};

/// Maximum combined support size accepted by [`w1_dual`].
pub const LP_SCALE_LIMIT: usize = 2000;

/// Tolerance used for plan marginals and potential feasibility checks.
pub const PLAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `plan[i][j]`: mass moved between real point `i` and fake point `j`.
    pub plan: Vec<Vec<f64>>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn rows(&self) -> usize {
        self.plan.len()
    }

    pub fn cols(&self) -> usize {
        self.plan.first().map_or(0, Vec::len)
    }

    /// Checks marginals, non-negativity, and the stored cost.
    pub fn validate(&self, pr: &PointCloud, pg: &PointCloud) -> Result<()> {
        if self.rows() != pr.len() || self.cols() != pg.len() {
            return Err(Error::Invalid(format!(
                "plan is {}x{}, clouds are {}x{}",
                self.rows(),
                self.cols(),
                pr.len(),
                pg.len()
            )));
        }
        let mut cost = 0.0;
        for (i, row) in self.plan.iter().enumerate() {
            if row.iter().any(|v| *v < 0.0) {
                return Err(Error::Invalid(format!("negative mass in plan row {i}")));
            }
            let s: f64 = row.iter().sum();
            if (s - pr.weights()[i]).abs() > PLAN_TOL {
                return Err(Error::Invalid(format!("row {i} sums to {s}, weight {}", pr.weights()[i])));
            }
            for (j, m) in row.iter().enumerate() {
                cost += m * dist(&pr.points()[i], &pg.points()[j]);
            }
        }
        for j in 0..self.cols() {
            let s: f64 = self.plan.iter().map(|r| r[j]).sum();
            if (s - pg.weights()[j]).abs() > PLAN_TOL {
                return Err(Error::Invalid(format!("column {j} sums to {s}, weight {}", pg.weights()[j])));
            }
        }
        if (cost - self.cost).abs() > PLAN_TOL {
            return Err(Error::Invalid(format!("stored cost {} differs from {cost}", self.cost)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Only `f(x) − f(y) ≤ d(x, y)` for real `x`, fake `y`.
    SupportRestricted,
    /// Every ordered pair within the union of both supports.
    FullLipschitz,
}

impl ConstraintMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::SupportRestricted => "support_restricted",
            Self::FullLipschitz => "full_lipschitz",
        }
    }
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support_restricted" => Ok(Self::SupportRestricted),
            "full_lipschitz" => Ok(Self::FullLipschitz),
            other => Err(Error::Invalid(format!(
                "unknown constraint mode `{other}`; valid options: support_restricted, full_lipschitz"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotential {
    /// Values on `P_r`'s support.
    pub real: Vec<f64>,
    /// Values on `P_g`'s support.
    pub fake: Vec<f64>,
    pub objective: f64,
    pub constraint_mode: ConstraintMode,
}

fn cost_matrix(pr: &PointCloud, pg: &PointCloud) -> Vec<f64> {
    let mut c = Vec::with_capacity(pr.len() * pg.len());
    for x in pr.points() {
        for y in pg.points() {
            c.push(dist(x, y));
        }
    }
    c
}

pub fn w1_primal(pr: &PointCloud, pg: &PointCloud) -> Result<TransportPlan> {
    ensure_dim(pr.dim(), pg.dim())?;
    let (m, n) = (pr.len(), pg.len());
    let cost = cost_matrix(pr, pg);
    let flat = if m == n && pr.is_uniform() && pg.is_uniform() {
        let assign = assignment::hungarian(&cost, n);
        let mut flat = vec![0.0; m * n];
        for (i, j) in assign.into_iter().enumerate() {
            flat[i * n + j] = pr.weights()[i];
        }
        flat
    } else {
        transportation::solve(&cost, pr.weights(), pg.weights())?
    };
    let total = cost.iter().zip(&flat).map(|(c, f)| c * f).sum();
    Ok(TransportPlan {
        plan: flat.chunks(n).map(<[f64]>::to_vec).collect(),
        cost: total,
    })
}

/// Pairs `(a, b)` constrained as `f_a − f_b ≤ d(a, b)` over the stacked
/// index space `[P_r ; P_g]`.
fn constraint_pairs(m: usize, n: usize, mode: ConstraintMode) -> Vec<(usize, usize)> {
    match mode {
        ConstraintMode::SupportRestricted => {
            (0..m).flat_map(|i| (0..n).map(move |j| (i, m + j))).collect()
        }
        ConstraintMode::FullLipschitz => {
            let t = m + n;
            (0..t)
                .flat_map(|a| (0..t).filter(move |&b| b != a).map(move |b| (a, b)))
                .collect()
        }
    }
}

pub fn w1_dual(pr: &PointCloud, pg: &PointCloud, mode: ConstraintMode) -> Result<DualPotential> {
    ensure_dim(pr.dim(), pg.dim())?;
    let (m, n) = (pr.len(), pg.len());
    let total = m + n;
    if total > LP_SCALE_LIMIT {
        return Err(Error::ScaleGuard {
            points: total,
            limit: LP_SCALE_LIMIT,
        });
    }
    let pts: Vec<&[f64]> = pr.points().iter().chain(pg.points()).map(|p| p.coords()).collect();
    let pairs = constraint_pairs(m, n, mode);
    // f is only defined up to an additive constant, so f ≥ 0 loses nothing
    // and makes the origin a feasible start.
    let mut a = vec![0.0; pairs.len() * total];
    let mut b = Vec::with_capacity(pairs.len());
    for (row, &(p, q)) in pairs.iter().enumerate() {
        a[row * total + p] = 1.0;
        a[row * total + q] = -1.0;
        b.push(dist(pts[p], pts[q]));
    }
    let c: Vec<f64> = pr
        .weights()
        .iter()
        .copied()
        .chain(pg.weights().iter().map(|w| -w))
        .collect();
    let sol = lp::maximize(&c, &a, &b)?;
    let (real, fake) = sol.x.split_at(m);
    let pot = DualPotential {
        real: real.to_vec(),
        fake: fake.to_vec(),
        objective: potential_objective(pr, pg, real, fake),
        constraint_mode: mode,
    };
    if let Some((p, q, gap)) = worst_violation(pr, pg, &pot.real, &pot.fake, mode) {
        if gap > PLAN_TOL {
            return Err(Error::Solver(format!("LP returned infeasible potential: pair ({p},{q}) off by {gap:e}")));
        }
    }
    Ok(pot)
}

pub fn potential_objective(pr: &PointCloud, pg: &PointCloud, real: &[f64], fake: &[f64]) -> f64 {
    let a: f64 = pr.weights().iter().zip(real).map(|(w, f)| w * f).sum();
    let b: f64 = pg.weights().iter().zip(fake).map(|(w, f)| w * f).sum();
    a - b
}

/// Largest `f_a − f_b − d(a, b)` over the constrained pairs, indexed in the
/// stacked `[P_r ; P_g]` space.
pub fn worst_violation(
    pr: &PointCloud,
    pg: &PointCloud,
    real: &[f64],
    fake: &[f64],
    mode: ConstraintMode,
) -> Option<(usize, usize, f64)> {
    let pts: Vec<&[f64]> = pr.points().iter().chain(pg.points()).map(|p| p.coords()).collect();
    let vals: Vec<f64> = real.iter().chain(fake).copied().collect();
    constraint_pairs(pr.len(), pg.len(), mode)
        .into_iter()
        .map(|(p, q)| (p, q, vals[p] - vals[q] - dist(pts[p], pts[q])))
        .fold(None, |best, cur| match best {
            Some(b) if b.2 >= cur.2 => Some(b),
            _ => Some(cur),
        })
}

pub fn is_feasible(pr: &PointCloud, pg: &PointCloud, real: &[f64], fake: &[f64], mode: ConstraintMode) -> bool {
    real.len() == pr.len()
        && fake.len() == pg.len()
        && worst_violation(pr, pg, real, fake, mode).is_none_or(|(_, _, g)| g <= PLAN_TOL)
}

/// Real points receiving mass from fake point `pg_index`.
pub fn coupling_targets(plan: &TransportPlan, pg_index: usize) -> Result<Vec<(usize, f64)>> {
    if pg_index >= plan.cols() {
        return Err(Error::IndexOutOfRange {
            index: pg_index,
            len: plan.cols(),
        });
    }
    Ok(plan
        .plan
        .iter()
        .enumerate()
        .filter(|(_, row)| row[pg_index] > 0.0)
        .map(|(i, row)| (i, row[pg_index]))
        .collect())
}

/// `count` evenly spaced points on `{0} × [0, 1]` (real) and `{1} × [0, 1]` (fake).
pub fn parallel_lines(count: usize) -> Result<(PointCloud, PointCloud)> {
    if count < 2 {
        return Err(Error::Invalid("parallel lines need at least two points per line".into()));
    }
    let line = |x: f64| {
        PointCloud::from_rows((0..count).map(|i| vec![x, i as f64 / (count - 1) as f64]).collect())
    };
    Ok((line(0.0)?, line(1.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rng};
    use proptest::prelude::*;

    fn random_cloud(rng: &mut Rng, len: usize, dim: usize, uniform: bool) -> PointCloud {
        let pts = (0..len)
            .map(|_| Point::new((0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).unwrap())
            .collect();
        if uniform {
            PointCloud::uniform(pts).unwrap()
        } else {
            let masses = (0..len).map(|_| rng.uniform_in(0.1, 1.0)).collect();
            PointCloud::from_masses(pts, masses).unwrap()
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn identical_clouds_cost_nothing() {
        let mut rng = Rng::new(1);
        let c = random_cloud(&mut rng, 6, 2, true);
        let plan = w1_primal(&c, &c).unwrap();
        assert_eq!(plan.cost, 0.0);
        for i in 0..6 {
            assert_eq!(plan.plan[i][i], 1.0 / 6.0);
        }
        plan.validate(&c, &c).unwrap();
        let dual = w1_dual(&c, &c, ConstraintMode::SupportRestricted).unwrap();
        assert!(dual.objective.abs() < 1e-12);
    }

    #[test]
    fn translation_costs_its_length() {
        let mut rng = Rng::new(2);
        let pg = random_cloud(&mut rng, 7, 3, true);
        let v = [0.3, -1.2, 0.4];
        let pr = pg.translate(&v).unwrap();
        let plan = w1_primal(&pr, &pg).unwrap();
        let len = (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        assert!((plan.cost - len).abs() < 1e-9);
        for j in 0..pg.len() {
            assert_eq!(coupling_targets(&plan, j).unwrap().len(), 1);
        }
    }

    #[test]
    fn four_point_clouds_match_permutation_oracle() {
        let mut rng = Rng::new(3);
        for _ in 0..25 {
            let pr = random_cloud(&mut rng, 4, 2, true);
            let pg = random_cloud(&mut rng, 4, 2, true);
            let best = permutations(4)
                .iter()
                .map(|p| {
                    p.iter()
                        .enumerate()
                        .map(|(i, &j)| dist(&pr.points()[i], &pg.points()[j]))
                        .sum::<f64>()
                        / 4.0
                })
                .fold(f64::INFINITY, f64::min);
            let plan = w1_primal(&pr, &pg).unwrap();
            assert!((plan.cost - best).abs() < 1e-12);
            plan.validate(&pr, &pg).unwrap();
            // the general solver agrees when forced
            let flow = transportation::solve(&cost_matrix(&pr, &pg), pr.weights(), pg.weights()).unwrap();
            let general: f64 = cost_matrix(&pr, &pg).iter().zip(&flow).map(|(c, f)| c * f).sum();
            assert!((general - best).abs() < 1e-9);
        }
    }

    #[test]
    fn split_mass_targets() {
        let pr = PointCloud::from_rows(vec![vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let pg = PointCloud::from_rows(vec![vec![0.0, 0.0]]).unwrap();
        let plan = w1_primal(&pr, &pg).unwrap();
        let t = coupling_targets(&plan, 0).unwrap();
        assert_eq!(t, vec![(0, 0.5), (1, 0.5)]);
        assert!(matches!(coupling_targets(&plan, 1), Err(Error::IndexOutOfRange { .. })));

        let pg = PointCloud::new(
            vec![Point::new(vec![0.0, 0.0]).unwrap(), Point::new(vec![5.0, 5.0]).unwrap()],
            vec![1.0, 0.0],
        )
        .unwrap();
        let plan = w1_primal(&pr, &pg).unwrap();
        assert!(coupling_targets(&plan, 1).unwrap().is_empty());
    }

    #[test]
    fn parallel_lines_potential() {
        let (pr, pg) = parallel_lines(10).unwrap();
        let ones = vec![1.0; 10];
        let zeros = vec![0.0; 10];
        for mode in [ConstraintMode::SupportRestricted, ConstraintMode::FullLipschitz] {
            let d = w1_dual(&pr, &pg, mode).unwrap();
            assert!((d.objective - 1.0).abs() < 1e-9, "{mode:?}");
            assert!(is_feasible(&pr, &pg, &ones, &zeros, mode));
            assert!((potential_objective(&pr, &pg, &ones, &zeros) - d.objective).abs() < 1e-9);
            // f(x) = 1 − x₁ evaluated on the supports
            let tight_r: Vec<f64> = pr.points().iter().map(|p| 1.0 - p[0]).collect();
            let tight_g: Vec<f64> = pg.points().iter().map(|p| 1.0 - p[0]).collect();
            assert!(is_feasible(&pr, &pg, &tight_r, &tight_g, mode));
            assert!((potential_objective(&pr, &pg, &tight_r, &tight_g) - d.objective).abs() < 1e-9);
        }
        assert!((w1_primal(&pr, &pg).unwrap().cost - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_only_potential_breaks_full_constraints() {
        // feasible when only cross pairs are checked, not once same-side
        // pairs are added
        let (pr, pg) = parallel_lines(3).unwrap();
        let real = vec![0.0, 0.0, 0.0];
        let fake = vec![0.0, 0.0, 10.0];
        assert!(is_feasible(&pr, &pg, &real, &fake, ConstraintMode::SupportRestricted));
        assert!(!is_feasible(&pr, &pg, &real, &fake, ConstraintMode::FullLipschitz));
    }

    #[test]
    fn scale_guard_and_dims() {
        let big = PointCloud::from_rows((0..1001).map(|i| vec![i as f64]).collect()).unwrap();
        assert!(matches!(
            w1_dual(&big, &big, ConstraintMode::SupportRestricted),
            Err(Error::ScaleGuard { points: 2002, limit: 2000 })
        ));
        let a = PointCloud::from_rows(vec![vec![0.0]]).unwrap();
        let b = PointCloud::from_rows(vec![vec![0.0, 1.0]]).unwrap();
        assert!(matches!(w1_primal(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(w1_dual(&a, &b, ConstraintMode::FullLipschitz).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("full_lipschitz".parse::<ConstraintMode>().unwrap(), ConstraintMode::FullLipschitz);
        assert!("both".parse::<ConstraintMode>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn strong_duality_and_relaxation(seed in 0u64..10_000, m in 1usize..7, n in 1usize..7, dim in 1usize..4, uniform in any::<bool>()) {
            let mut rng = Rng::new(seed);
            let pr = random_cloud(&mut rng, m, dim, uniform);
            let pg = random_cloud(&mut rng, n, dim, uniform);
            let plan = w1_primal(&pr, &pg).unwrap();
            prop_assert!(plan.validate(&pr, &pg).is_ok());
            let restricted = w1_dual(&pr, &pg, ConstraintMode::SupportRestricted).unwrap();
            let full = w1_dual(&pr, &pg, ConstraintMode::FullLipschitz).unwrap();
            prop_assert!((restricted.objective - plan.cost).abs() <= 1e-6);
            prop_assert!((full.objective - restricted.objective).abs() <= 1e-6);
            prop_assert!(is_feasible(&pr, &pg, &full.real, &full.fake, ConstraintMode::FullLipschitz));
        }
    }
}
