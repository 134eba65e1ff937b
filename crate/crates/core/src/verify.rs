//! Executable checks of the structural claims about optimal Lipschitz
//! discriminators, run against exact potentials or trained networks.

use serde::{Deserialize, Serialize};

use crate::closed_form::{density_value, AnalyticDensity, DENSITY_FLOOR};
use crate::dynamics::{run, train_discriminator, FlowState, NetConfig, TrainConfig};
use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{cosine, dist, norm2, Point, PointCloud, Rng};
use crate::lipschitz::{PenaltyConfig, PenaltyKind};
use crate::net::{AdamConfig, Mlp};
use crate::objectives::{builtin_objective, ObjectiveSpec};
use crate::scenario::Scenario;
use crate::transport::{coupling_targets, w1_dual, w1_primal, ConstraintMode};

pub const DEFAULT_BOUNDING_TOL: f64 = 0.05;
pub const DEFAULT_GRADIENT_TOL: f64 = 0.1;
/// Witnesses kept per report.
pub const MAX_WITNESSES: usize = 10;

const L1_SEED: u64 = 0x11;
const L1_PAIRS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Fake,
    Real,
}

/// `x` and its steepest partner `y` under `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingPair {
    pub x: Point,
    pub x_side: Side,
    pub y: Point,
    pub y_side: Side,
    /// `k·‖x−y‖ − |f(y)−f(x)|`.
    pub slack: f64,
    /// `|f(y)−f(x)| / ‖x−y‖`.
    pub ratio: f64,
    pub tight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub point: Vec<f64>,
    pub values: Vec<f64>,
}

impl Witness {
    pub fn new(label: impl Into<String>, point: &[f64], values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            point: point.to_vec(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub id: String,
    pub pass: bool,
    /// False for negative controls, which are supposed to fail.
    pub expect_pass: bool,
    pub detail: String,
    /// Violations when failing, sample diagnostics when passing.
    pub witnesses: Vec<Witness>,
    pub tolerances: Vec<(String, f64)>,
}

impl TheoremReport {
    fn new(id: &str, pass: bool, detail: String, mut witnesses: Vec<Witness>, tolerances: Vec<(&str, f64)>) -> Self {
        if !pass && witnesses.is_empty() {
            witnesses.push(Witness::new("unlocated failure", &[], Vec::new()));
        }
        witnesses.truncate(MAX_WITNESSES);
        Self {
            id: id.to_string(),
            pass,
            expect_pass: true,
            detail,
            witnesses,
            tolerances: tolerances.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    fn expecting_failure(mut self, id: &str) -> Self {
        self.id = id.to_string();
        self.expect_pass = false;
        self
    }

    /// Outcome matches expectation.
    pub fn as_expected(&self) -> bool {
        self.pass == self.expect_pass
    }

    /// `theorem_id,pass,detail` with the detail quoted when needed.
    pub fn to_record(&self) -> String {
        let mut detail = self.detail.clone();
        if !self.expect_pass {
            detail = format!("expected-fail: {detail}");
        }
        if detail.contains([',', '"', '\n']) {
            detail = format!("\"{}\"", detail.replace('"', "\"\""));
        }
        format!("{},{},{}", self.id, self.pass, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingCheck {
    /// One entry per support point, fake side first.
    pub pairs: Vec<BoundingPair>,
    /// Fake points whose steepest real partner is tight.
    pub fake_with_tight_real: usize,
    pub fake_count: usize,
    pub bounding: TheoremReport,
    pub chains: TheoremReport,
}

impl BoundingCheck {
    pub fn fake_tight_fraction(&self) -> f64 {
        self.fake_with_tight_real as f64 / self.fake_count.max(1) as f64
    }
}

struct Node<'a> {
    p: &'a Point,
    side: Side,
    value: f64,
    shared: bool,
}

fn ratio(a: &Node, b: &Node) -> Option<f64> {
    let d = dist(a.p, b.p);
    (d > 0.0).then(|| (b.value - a.value).abs() / d)
}

/// Finds each support point's steepest partner under `f` and checks that
/// points outside the common support are tightly bounded, and that tight
/// chains run from fake points up to real points.
pub fn check_bounding(
    f: impl Fn(&Point) -> Result<f64>,
    pg: &PointCloud,
    pr: &PointCloud,
    k: f64,
    tol: f64,
) -> Result<BoundingCheck> {
    ensure_dim(pg.dim(), pr.dim())?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Invalid(format!("bounding check needs k > 0, got {k}")));
    }
    let in_other = |p: &Point, other: &PointCloud| other.iter().any(|(q, w)| w > 0.0 && q == p);
    let mut nodes = Vec::with_capacity(pg.len() + pr.len());
    for (side, cloud, other) in [(Side::Fake, pg, pr), (Side::Real, pr, pg)] {
        for p in cloud.points() {
            nodes.push(Node {
                p,
                side,
                value: f(p)?,
                shared: in_other(p, other),
            });
        }
    }
    let is_tight = |r: f64| (r - k).abs() <= tol * k;

    let mut pairs = Vec::with_capacity(nodes.len());
    let mut unbounded = Vec::new();
    let mut fake_with_tight_real = 0;
    for (i, a) in nodes.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        let mut best_real = 0.0f64;
        for (j, b) in nodes.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some(r) = ratio(a, b) {
                if best.is_none_or(|(_, br)| r > br) {
                    best = Some((j, r));
                }
                if b.side == Side::Real {
                    best_real = best_real.max(r);
                }
            }
        }
        if a.side == Side::Fake && is_tight(best_real) {
            fake_with_tight_real += 1;
        }
        let Some((j, r)) = best else { continue };
        let b = &nodes[j];
        let pair = BoundingPair {
            x: a.p.clone(),
            x_side: a.side,
            y: b.p.clone(),
            y_side: b.side,
            slack: k * dist(a.p, b.p) - (b.value - a.value).abs(),
            ratio: r,
            tight: is_tight(r),
        };
        if !pair.tight && !a.shared {
            unbounded.push(Witness::new(
                format!("{:?} point without a tight partner", a.side).to_lowercase(),
                a.p.coords(),
                vec![r, k],
            ));
        }
        pairs.push(pair);
    }
    let disjoint = nodes.iter().filter(|n| !n.shared).count();
    let bounded = disjoint - unbounded.len();
    let samples = || pairs.iter().take(3).map(|p| Witness::new("steepest partner", p.x.coords(), vec![p.ratio, p.slack]));
    let bounding = TheoremReport::new(
        "bounding",
        unbounded.is_empty(),
        format!("{bounded}/{disjoint} off-overlap points tightly bounded at k={k:.6}"),
        if unbounded.is_empty() { samples().collect() } else { unbounded },
        vec![("tol", tol), ("k", k)],
    );

    // tight edges point from the lower to the higher value
    let n = nodes.len();
    let (mut has_out, mut has_in) = (vec![false; n], vec![false; n]);
    for i in 0..n {
        for j in 0..n {
            if i != j && nodes[j].value > nodes[i].value && ratio(&nodes[i], &nodes[j]).is_some_and(is_tight) {
                has_out[i] = true;
                has_in[j] = true;
            }
        }
    }
    let mut bad_ends = Vec::new();
    let mut chain_nodes = 0;
    for (i, node) in nodes.iter().enumerate() {
        if !(has_in[i] || has_out[i]) {
            continue;
        }
        chain_nodes += 1;
        if node.shared {
            continue;
        }
        if !has_out[i] && node.side == Side::Fake {
            bad_ends.push(Witness::new("fake point tops a tight chain", node.p.coords(), vec![node.value]));
        }
        if !has_in[i] && node.side == Side::Real {
            bad_ends.push(Witness::new("real point starts a tight chain", node.p.coords(), vec![node.value]));
        }
    }
    let chains = TheoremReport::new(
        "fake_to_real_chains",
        chain_nodes > 0 && bad_ends.is_empty(),
        if chain_nodes == 0 {
            "no tight edges".to_string()
        } else {
            format!("{chain_nodes} points on tight chains, {} misplaced chain ends", bad_ends.len())
        },
        bad_ends,
        vec![("tol", tol), ("k", k)],
    );

    Ok(BoundingCheck {
        pairs,
        fake_with_tight_real,
        fake_count: pg.len(),
        bounding,
        chains,
    })
}

/// Checks `‖∇f‖ ≈ k` and `∇f ∥ (y − x)` along `t·x + (1−t)·y`,
/// `t ∈ {0, 1/steps, …, 1}`.
pub fn check_interpolation_gradient(net: &Mlp, x: &Point, y: &Point, k: f64, steps: usize, tol: f64) -> Result<TheoremReport> {
    ensure_dim(net.input_dim(), x.dim())?;
    ensure_dim(x.dim(), y.dim())?;
    if x == y || steps == 0 || !(k.is_finite() && k > 0.0) {
        return Err(Error::Invalid("interpolation check needs x != y, steps >= 1 and k > 0".into()));
    }
    let dir: Vec<f64> = y.coords().iter().zip(x.coords()).map(|(b, a)| b - a).collect();
    let mut bad = Vec::new();
    let (mut worst_norm, mut worst_cos) = (0.0f64, 1.0f64);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let p = x.lerp(y, t)?;
        let g = net.grad_input(&p)?;
        let norm = norm2(&g);
        let c = cosine(&g, &dir);
        worst_norm = worst_norm.max((norm / k - 1.0).abs());
        worst_cos = worst_cos.min(c);
        if (norm - k).abs() > tol * k || c < 1.0 - tol {
            bad.push(Witness::new(format!("t={t}"), p.coords(), vec![norm, c]));
        }
    }
    Ok(TheoremReport::new(
        "interpolation_gradient",
        bad.is_empty(),
        format!("max |norm/k - 1| = {worst_norm:.4}, min cosine = {worst_cos:.4} over {} points", steps + 1),
        bad,
        vec![("tol", tol), ("k", k)],
    ))
}

/// `g(x, y) = x + y` is 1-Lipschitz under l1 and tight between `A = (0, 0)`
/// and `B = (2, 1)`, yet `∇g(A)` does not point at `B`.
pub fn l1_counterexample() -> Result<TheoremReport> {
    let g = Mlp::affine(&[1.0, 1.0], 0.0)?;
    let mut rng = Rng::new(L1_SEED);
    let mut min_slack = f64::INFINITY;
    let mut witnesses = Vec::new();
    for _ in 0..L1_PAIRS {
        let p = Point::new(vec![rng.uniform_in(-10.0, 10.0), rng.uniform_in(-10.0, 10.0)])?;
        let q = Point::new(vec![rng.uniform_in(-10.0, 10.0), rng.uniform_in(-10.0, 10.0)])?;
        let l1 = crate::geometry::l1_distance(&p, &q)?;
        let slack = l1 - (g.forward(&q)? - g.forward(&p)?).abs();
        // rounding in the sum can cost an ulp or two
        if slack < -1e-12 * l1.max(1.0) {
            witnesses.push(Witness::new("l1 Lipschitz violation", p.coords(), vec![slack]));
        }
        min_slack = min_slack.min(slack);
    }
    let a = Point::new(vec![0.0, 0.0])?;
    let b = Point::new(vec![2.0, 1.0])?;
    let rise = g.forward(&b)? - g.forward(&a)?;
    let l1_ab = crate::geometry::l1_distance(&a, &b)?;
    let grad = g.grad_input(&a)?;
    let c = cosine(&grad, &[2.0, 1.0]);
    let expected = 3.0 / 10f64.sqrt();
    if rise != 3.0 || l1_ab != 3.0 {
        witnesses.push(Witness::new("g(B) - g(A) vs l1", b.coords(), vec![rise, l1_ab]));
    }
    if (c - expected).abs() > 1e-12 || (c - 1.0).abs() < 1e-3 {
        witnesses.push(Witness::new("gradient cosine", a.coords(), vec![c, expected]));
    }
    let pass = witnesses.is_empty();
    if pass {
        witnesses.push(Witness::new("gradient at A", a.coords(), grad.clone()));
    }
    Ok(TheoremReport::new(
        "l1_counterexample",
        pass,
        format!(
            "min l1 slack {min_slack:.3e} over {L1_PAIRS} pairs; g(B)-g(A)={rise} l1={l1_ab}; cos(grad g(A), B-A)={c:.15} (3/sqrt10={expected:.15})"
        ),
        witnesses,
        vec![("cosine_tol", 1e-12)],
    ))
}

/// Converged means both `W1 ≤ tol_w` and empirical `k ≤ tol_k` at the last
/// recorded iteration. Small `k` alone is not taken as evidence.
pub fn check_nash_convergence(state: &FlowState, tol_w: f64, tol_k: f64) -> TheoremReport {
    let m = state.last_metrics();
    let pass = m.w1 <= tol_w && m.k_emp <= tol_k;
    let witnesses = vec![Witness::new(format!("iteration {}", m.iteration), &[], vec![m.w1, m.k_emp])];
    TheoremReport::new(
        "nash_equilibrium",
        pass,
        format!("W1={:.6} (tol {tol_w:.6}), k={:.6} (tol {tol_k:.6})", m.w1, m.k_emp),
        witnesses,
        vec![("tol_w", tol_w), ("tol_k", tol_k)],
    )
}

/// Checks `P_g(x)·φ′(f(x)) + P_r(x)·ϕ′(f(x)) ≈ 0`, normalised by
/// `P_g(x) + P_r(x)`, on points where both densities clear the floor.
/// Points below it, or where `f` reports off-support, are excluded and counted.
pub fn check_stationarity(
    obj: &ObjectiveSpec,
    pg: &AnalyticDensity,
    pr: &AnalyticDensity,
    f: impl Fn(&Point) -> Result<f64>,
    points: &[Point],
    tol: f64,
) -> Result<TheoremReport> {
    ensure_dim(pg.dim(), pr.dim())?;
    let mut excluded = 0;
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for x in points {
        let g = density_value(pg, x)?;
        let r = density_value(pr, x)?;
        if g.min(r) < DENSITY_FLOOR {
            excluded += 1;
            continue;
        }
        let v = match f(x) {
            Ok(v) => v,
            Err(Error::OffSupport { .. }) => {
                excluded += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        checked += 1;
        let residual = (g * obj.phi_d1(v) + r * obj.varphi_d1(v)) / (g + r);
        worst = worst.max(residual.abs());
        if residual.abs() > tol || !residual.is_finite() {
            bad.push(Witness::new("non-stationary point", x.coords(), vec![residual, v]));
        }
    }
    Ok(TheoremReport::new(
        "stationarity",
        checked > 0 && bad.is_empty(),
        format!("{checked} points checked, {excluded} excluded below the density floor, max residual {worst:.3e}"),
        bad,
        vec![("tol", tol), ("density_floor", DENSITY_FLOOR)],
    ))
}

/// On clouds sharing one support with different weights, the optimal
/// 1-Lipschitz potential is non-constant, so some pair is tight at slope 1.
pub fn check_overlap_tight_pair(pr: &PointCloud, pg: &PointCloud, tol: f64) -> Result<TheoremReport> {
    let dual = w1_dual(pr, pg, ConstraintMode::FullLipschitz)?;
    let pts: Vec<(&Point, f64)> = pr
        .points()
        .iter()
        .zip(&dual.real)
        .chain(pg.points().iter().zip(&dual.fake))
        .map(|(p, v)| (p, *v))
        .collect();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = dist(pts[i].0, pts[j].0);
            if d > 0.0 {
                let r = (pts[j].1 - pts[i].1).abs() / d;
                if best.is_none_or(|b| r > b.2) {
                    best = Some((i, j, r));
                }
            }
        }
    }
    let (i, j, r) = best.ok_or_else(|| Error::Invalid("overlap check needs two distinct locations".into()))?;
    Ok(TheoremReport::new(
        "overlap_tight_pair",
        (r - 1.0).abs() <= tol,
        format!("W1={:.6}, steepest pair slope {r:.6}", dual.objective),
        vec![
            Witness::new("steepest pair start", pts[i].0.coords(), vec![pts[i].1]),
            Witness::new("steepest pair end", pts[j].0.coords(), vec![pts[j].1]),
        ],
        vec![("tol", tol)],
    ))
}

/// Trains a linear-objective discriminator under the k² penalty on two
/// deltas at the same location; the optimal slope there is zero.
pub fn check_coincident_deltas(cfg: &TrainConfig, tol_k: f64, rng: &mut Rng) -> Result<TheoremReport> {
    let s = Scenario::two_delta(0.0, 2)?;
    let (pr, pg) = s.clouds()?;
    let mut state = FlowState::new(pg.clone(), pr.clone(), cfg, rng)?;
    let k0 = state.last_metrics().k_emp;
    train_discriminator(&mut state, cfg, rng)?;
    let k = state.metrics(cfg)?.k_emp;
    Ok(TheoremReport::new(
        "coincident_deltas",
        k <= tol_k,
        format!("k {k0:.4} -> {k:.6} after {} steps (optimal 0)", cfg.d_steps),
        vec![Witness::new("origin", &[0.0, 0.0], vec![k0, k])],
        vec![("tol_k", tol_k)],
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    /// Point-cloud scenario for the trained checks.
    pub scenario: Scenario,
    /// Discriminator training on the fixed clouds; `d_steps` is the total.
    pub discriminator: TrainConfig,
    /// Particle flow for the equilibrium check.
    pub flow: TrainConfig,
    /// k² training on coincident deltas.
    pub coincident: TrainConfig,
    pub bounding_tol: f64,
    pub gradient_tol: f64,
    pub interp_pairs: usize,
    pub interp_steps: usize,
    /// Fraction of the initial W1.
    pub nash_tol_w: f64,
    pub nash_tol_k: f64,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self> {
        let leaky = NetConfig::default();
        let discriminator = TrainConfig {
            d_steps: 6000,
            penalty: Some(PenaltyConfig::new(PenaltyKind::Maxgp, 1.0, 64)?),
            net: leaky.clone(),
            k_probes: 2000,
            ..TrainConfig::default()
        };
        let flow = TrainConfig {
            d_steps: 20,
            eta: 0.05,
            outer_iters: 500,
            penalty: Some(PenaltyConfig::new(PenaltyKind::Maxgp, 1.0, 64)?),
            net: NetConfig {
                hidden: vec![32, 32],
                ..leaky.clone()
            },
            k_probes: 64,
            ..TrainConfig::default()
        };
        let coincident = TrainConfig {
            d_steps: 500,
            penalty: Some(PenaltyConfig::new(PenaltyKind::Ksq, 1.0, 64)?),
            net: NetConfig {
                hidden: vec![32, 32],
                ..leaky
            },
            adam: AdamConfig::default(),
            k_probes: 64,
            ..TrainConfig::default()
        };
        Ok(Self {
            scenario,
            discriminator,
            flow,
            coincident,
            bounding_tol: DEFAULT_BOUNDING_TOL,
            gradient_tol: DEFAULT_GRADIENT_TOL,
            interp_pairs: 5,
            interp_steps: 9,
            nash_tol_w: 0.05,
            nash_tol_k: 0.1,
            seed,
        })
    }
}

/// Everything from [`check_overlap_tight_pair`] through
/// [`check_nash_convergence`], plus a constant-network control that must fail.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<TheoremReport>> {
    let mut reports = Vec::new();
    let root = Rng::new(cfg.seed);
    let (pr, pg) = cfg.scenario.clouds()?;

    // trained discriminator on the fixed clouds
    let mut rng = root.fork(1);
    let mut state = FlowState::new(pg.clone(), pr.clone(), &cfg.discriminator, &mut rng)?;
    train_discriminator(&mut state, &cfg.discriminator, &mut rng)?;
    let k = state.metrics(&cfg.discriminator)?.k_emp;
    let net = &state.net;
    let check = check_bounding(|x| net.forward(x), pg, pr, k, cfg.bounding_tol)?;
    reports.push(check.bounding);
    reports.push(check.chains);
    reports.push(interpolation_over_pairs(net, pg, pr, k, cfg)?);

    let constant = Mlp::affine(&vec![0.0; pg.dim()], 0.0)?;
    let control = check_bounding(|x| constant.forward(x), pg, pr, 1.0, cfg.bounding_tol)?;
    reports.push(control.bounding.expecting_failure("constant_control"));

    reports.push(l1_counterexample()?);
    reports.push(stationarity_suite()?);
    reports.push(overlap_suite()?);
    reports.push(check_coincident_deltas(&cfg.coincident, 0.05, &mut root.fork(2))?);

    let initial_w1 = w1_primal(pr, pg)?.cost;
    let last = run(&cfg.scenario, &cfg.flow, &mut root.fork(3))?;
    reports.push(check_nash_convergence(&last, cfg.nash_tol_w * initial_w1, cfg.nash_tol_k));
    Ok(reports)
}

/// Runs the interpolation check on `cfg.interp_pairs` fake points spread over
/// the fake cloud, each paired with its largest coupled target.
pub fn interpolation_over_pairs(net: &Mlp, pg: &PointCloud, pr: &PointCloud, k: f64, cfg: &SuiteConfig) -> Result<TheoremReport> {
    let plan = w1_primal(pr, pg)?;
    let n = cfg.interp_pairs.min(pg.len()).max(1);
    let mut failed = Vec::new();
    let mut details = Vec::new();
    for s in 0..n {
        let i = s * (pg.len() - 1) / (n - 1).max(1);
        let targets = coupling_targets(&plan, i)?;
        let Some(&(j, _)) = targets.iter().max_by(|a, b| a.1.total_cmp(&b.1)) else { continue };
        let r = check_interpolation_gradient(net, &pg.points()[i], &pr.points()[j], k, cfg.interp_steps, cfg.gradient_tol)?;
        if !r.pass {
            failed.extend(r.witnesses);
        }
        details.push(format!("pair {i}->{j}: {}", r.detail));
    }
    Ok(TheoremReport::new(
        "interpolation_gradient",
        failed.is_empty(),
        details.join("; "),
        failed,
        vec![("tol", cfg.gradient_tol), ("k", k)],
    ))
}

fn stationarity_suite() -> Result<TheoremReport> {
    use crate::closed_form::{fstar_value, line_grid, ClosedFormSpec};
    use crate::scenario::{FakeShape, DEFAULT_MODE_OFFSET, DEFAULT_MODE_STD};
    let s = Scenario::two_gaussians_1d(DEFAULT_MODE_OFFSET, DEFAULT_MODE_STD, FakeShape::Gaussian)?;
    let (pr, pg) = s.densities()?;
    let obj = builtin_objective("logistic", None)?;
    let grid = line_grid(-20.0, 20.0, 161);
    check_stationarity(&obj, pg, pr, |x| fstar_value(&ClosedFormSpec::Js, pg, pr, x), &grid, 1e-9)
}

fn overlap_suite() -> Result<TheoremReport> {
    let pts = || -> Result<Vec<Point>> { (0..3).map(|i| Point::new(vec![i as f64, 0.5 * i as f64])).collect() };
    let pr = PointCloud::new(pts()?, vec![0.5, 0.3, 0.2])?;
    let pg = PointCloud::new(pts()?, vec![0.2, 0.3, 0.5])?;
    check_overlap_tight_pair(&pr, &pg, 1e-6)
}
