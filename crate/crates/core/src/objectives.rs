//! Discriminator objectives `J_D = E_pg[φ(f)] + E_pr[ϕ(f)]`.
//!
//! A pair (φ, ϕ) belongs to the Lipschitz objective family when φ is
//! increasing and convex, ϕ is decreasing and convex, and φ′ + ϕ′ has a root
//! (the anchor `a`). Every builtin except `hinge` and `least_squares`
//! qualifies; non-negative combinations of members stay in the family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rng;

/// Tolerance below zero tolerated for second derivatives.
pub const CONVEXITY_TOL: f64 = 1e-12;

/// Scalar building blocks for φ and ϕ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Curve {
    /// `x`
    Identity,
    /// `log(1 + eᵡ) = −log σ(−x)`
    Softplus,
    /// `x + √(x² + 1)`
    CoshLike,
    /// `eᵡ`
    Exp,
    /// `max(0, x + 1) = −min(0, −x − 1)`
    Hinge,
    /// `(x − center)²`
    Square { center: f64 },
}

impl Curve {
    /// Value, first and second derivative at `x`.
    pub fn eval(self, x: f64) -> (f64, f64, f64) {
        match self {
            Curve::Identity => (x, 1.0, 0.0),
            Curve::Softplus => {
                let v = if x > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                };
                let s = sigmoid(x);
                (v, s, s * (1.0 - s))
            }
            Curve::CoshLike => {
                let r = (x * x + 1.0).sqrt();
                // x + r loses precision for large negative x
                let v = if x >= 0.0 { x + r } else { 1.0 / (r - x) };
                (v, v / r, 1.0 / (r * r * r))
            }
            Curve::Exp => {
                let e = x.exp();
                (e, e, e)
            }
            Curve::Hinge => {
                if x > -1.0 {
                    (x + 1.0, 1.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            Curve::Square { center } => {
                let d = x - center;
                (d * d, 2.0 * d, 2.0)
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `c(x)` or, when reflected, `c(−x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub curve: Curve,
    pub reflect: bool,
}

impl Branch {
    fn eval(self, x: f64) -> (f64, f64, f64) {
        if self.reflect {
            let (v, d1, d2) = self.curve.eval(-x);
            (v, -d1, d2)
        } else {
            self.curve.eval(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub phi: Branch,
    pub varphi: Branch,
}

/// An objective pair (φ, ϕ) as a weighted sum of analytic terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    pub terms: Vec<Term>,
    pub anchor_a: Option<f64>,
}

impl ObjectiveSpec {
    /// φ(x) = ϕ(−x) = c(x).
    pub fn symmetric(name: impl Into<String>, curve: Curve, anchor_a: Option<f64>) -> Self {
        Self {
            name: name.into(),
            terms: vec![Term {
                weight: 1.0,
                phi: Branch {
                    curve,
                    reflect: false,
                },
                varphi: Branch {
                    curve,
                    reflect: true,
                },
            }],
            anchor_a,
        }
    }

    /// (φ(x), φ′(x), φ″(x)).
    pub fn phi3(&self, x: f64) -> (f64, f64, f64) {
        self.sum(x, |t| t.phi)
    }

    /// (ϕ(x), ϕ′(x), ϕ″(x)).
    pub fn varphi3(&self, x: f64) -> (f64, f64, f64) {
        self.sum(x, |t| t.varphi)
    }

    fn sum(&self, x: f64, pick: impl Fn(&Term) -> Branch) -> (f64, f64, f64) {
        self.terms.iter().fold((0.0, 0.0, 0.0), |acc, t| {
            if t.weight == 0.0 {
                return acc;
            }
            let (v, d1, d2) = pick(t).eval(x);
            (acc.0 + t.weight * v, acc.1 + t.weight * d1, acc.2 + t.weight * d2)
        })
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.phi3(x).0
    }

    pub fn phi_d1(&self, x: f64) -> f64 {
        self.phi3(x).1
    }

    pub fn phi_d2(&self, x: f64) -> f64 {
        self.phi3(x).2
    }

    pub fn varphi(&self, x: f64) -> f64 {
        self.varphi3(x).0
    }

    pub fn varphi_d1(&self, x: f64) -> f64 {
        self.varphi3(x).1
    }

    pub fn varphi_d2(&self, x: f64) -> f64 {
        self.varphi3(x).2
    }

    /// True when every active term has zero curvature on both sides.
    pub fn is_flat(&self) -> bool {
        self.terms.iter().all(|t| {
            t.weight == 0.0
                || (matches!(t.phi.curve, Curve::Identity)
                    && matches!(t.varphi.curve, Curve::Identity))
        })
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "linear",
    "logistic",
    "cosh_like",
    "exponential",
    "hinge",
    "logistic_plus_linear",
    "least_squares",
];

/// Default ε of `logistic_plus_linear`.
pub const DEFAULT_LINEAR_MIX: f64 = 0.01;

/// Looks up a builtin objective. `param` is ε for `logistic_plus_linear`
/// (default 0.01) and ignored otherwise.
pub fn builtin_objective(name: &str, param: Option<f64>) -> Result<ObjectiveSpec> {
    let spec = match name {
        "linear" => ObjectiveSpec::symmetric("linear", Curve::Identity, Some(0.0)),
        "logistic" => ObjectiveSpec::symmetric("logistic", Curve::Softplus, Some(0.0)),
        "cosh_like" => ObjectiveSpec::symmetric("cosh_like", Curve::CoshLike, Some(0.0)),
        "exponential" => ObjectiveSpec::symmetric("exponential", Curve::Exp, Some(0.0)),
        "hinge" => ObjectiveSpec::symmetric("hinge", Curve::Hinge, Some(0.0)),
        "logistic_plus_linear" => {
            let eps = param.unwrap_or(DEFAULT_LINEAR_MIX);
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::Invalid(format!(
                    "logistic_plus_linear weight {eps} must be non-negative"
                )));
            }
            let mut c = combine(&[
                (builtin_objective("logistic", None)?, 1.0),
                (builtin_objective("linear", None)?, eps),
            ])?;
            c.name = format!("logistic_plus_linear({eps})");
            c.anchor_a = Some(0.0);
            c
        }
        "least_squares" => least_squares(0.0, 1.0),
        other => {
            return Err(Error::UnknownObjective {
                name: other.to_string(),
                valid: BUILTIN_NAMES.join(", "),
            })
        }
    };
    Ok(spec)
}

/// Least-squares pair φ(x) = (x − fake_label)², ϕ(x) = (x − real_label)².
/// Not a family member: φ is not increasing everywhere.
pub fn least_squares(fake_label: f64, real_label: f64) -> ObjectiveSpec {
    ObjectiveSpec {
        name: "least_squares".into(),
        terms: vec![Term {
            weight: 1.0,
            phi: Branch {
                curve: Curve::Square { center: fake_label },
                reflect: false,
            },
            varphi: Branch {
                curve: Curve::Square { center: real_label },
                reflect: false,
            },
        }],
        anchor_a: Some(0.5 * (fake_label + real_label)),
    }
}

/// Pointwise non-negative combination Σ wᵢ·(φᵢ, ϕᵢ).
pub fn combine(objs: &[(ObjectiveSpec, f64)]) -> Result<ObjectiveSpec> {
    if let Some((_, w)) = objs.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Invalid(format!("combination weight {w} must be non-negative")));
    }
    if !objs.iter().any(|(_, w)| *w > 0.0) {
        return Err(Error::Invalid("combination needs a positive weight".into()));
    }
    let terms = objs
        .iter()
        .flat_map(|(o, w)| {
            o.terms.iter().map(move |t| Term {
                weight: t.weight * w,
                ..*t
            })
        })
        .filter(|t| t.weight > 0.0)
        .collect();
    let name = objs
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(o, w)| format!("{w}*{}", o.name))
        .collect::<Vec<_>>()
        .join("+");
    Ok(ObjectiveSpec {
        name,
        terms,
        anchor_a: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    PhiIncreasing,
    PhiConvex,
    VarphiDecreasing,
    VarphiConvex,
    AnchorExists,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Condition::PhiIncreasing => "phi'>0",
            Condition::PhiConvex => "phi''>=0",
            Condition::VarphiDecreasing => "varphi'<0",
            Condition::VarphiConvex => "varphi''>=0",
            Condition::AnchorExists => "exists a: phi'(a)+varphi'(a)=0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub at: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub objective: String,
    pub is_member: bool,
    pub anchor_a: Option<f64>,
    pub violations: Vec<Violation>,
}

impl MembershipReport {
    /// Violation counts per condition, with the first witness of each.
    pub fn summary(&self) -> Vec<(Condition, usize, &Violation)> {
        let mut out: Vec<(Condition, usize, &Violation)> = Vec::new();
        for v in &self.violations {
            match out.iter_mut().find(|(c, _, _)| *c == v.condition) {
                Some(entry) => entry.1 += 1,
                None => out.push((v.condition, 1, v)),
            }
        }
        out
    }
}

/// `[-10, 10]` at step 1e-3 merged with `extra` uniform random probes.
pub fn default_probe_grid(extra: usize, rng: &mut Rng) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=20_000).map(|i| -10.0 + i as f64 * 1e-3).collect();
    grid.extend((0..extra).map(|_| rng.uniform_in(-10.0, 10.0)));
    grid.sort_by(f64::total_cmp);
    grid
}

fn finite(v: f64, what: &str, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: format!("{what} at probe x={x}"),
            value: v,
        })
    }
}

/// Checks the family conditions on `probe_grid` and locates the anchor by
/// bisection on φ′ + ϕ′ (non-decreasing for members).
pub fn check_membership(obj: &ObjectiveSpec, probe_grid: &[f64]) -> Result<MembershipReport> {
    let (Some(&lo), Some(&hi)) = (probe_grid.first(), probe_grid.last()) else {
        return Err(Error::Invalid("probe grid is empty".into()));
    };
    if probe_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Invalid("probe grid must be sorted".into()));
    }
    if lo > -10.0 || hi < 10.0 {
        return Err(Error::Invalid(format!(
            "probe grid [{lo}, {hi}] must span at least [-10, 10]"
        )));
    }

    let mut violations = Vec::new();
    let mut slope_sum = Vec::with_capacity(probe_grid.len());
    for &x in probe_grid {
        let (p, p1, p2) = obj.phi3(x);
        let (q, q1, q2) = obj.varphi3(x);
        finite(p, "phi", x)?;
        finite(q, "varphi", x)?;
        for (cond, observed, ok) in [
            (Condition::PhiIncreasing, finite(p1, "phi'", x)?, p1 > 0.0),
            (Condition::VarphiDecreasing, finite(q1, "varphi'", x)?, q1 < 0.0),
            (Condition::PhiConvex, finite(p2, "phi''", x)?, p2 >= -CONVEXITY_TOL),
            (Condition::VarphiConvex, finite(q2, "varphi''", x)?, q2 >= -CONVEXITY_TOL),
        ] {
            if !ok {
                violations.push(Violation {
                    condition: cond,
                    at: x,
                    observed,
                });
            }
        }
        slope_sum.push(p1 + q1);
    }

    let anchor = locate_anchor(obj, probe_grid, &slope_sum);
    if anchor.is_none() {
        let (at, observed) = if slope_sum[0] > 0.0 {
            (lo, slope_sum[0])
        } else {
            (hi, slope_sum[slope_sum.len() - 1])
        };
        violations.push(Violation {
            condition: Condition::AnchorExists,
            at,
            observed,
        });
    }
    Ok(MembershipReport {
        objective: obj.name.clone(),
        is_member: violations.is_empty() && anchor.is_some(),
        anchor_a: anchor,
        violations,
    })
}

const FLAT_TOL: f64 = 1e-12;

fn locate_anchor(obj: &ObjectiveSpec, grid: &[f64], s: &[f64]) -> Option<f64> {
    if s.iter().all(|v| v.abs() <= FLAT_TOL) {
        return Some(0.0);
    }
    let g = |x: f64| obj.phi_d1(x) + obj.varphi_d1(x);
    // zero crossing closest to the origin among exact zeros / sign changes
    let mut best: Option<f64> = None;
    let mut consider = |a: f64| {
        if best.is_none_or(|b: f64| a.abs() < b.abs()) {
            best = Some(a);
        }
    };
    for i in 0..grid.len() {
        if s[i].abs() <= FLAT_TOL {
            consider(grid[i]);
        } else if i + 1 < grid.len() && s[i] < 0.0 && s[i + 1] > 0.0 {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
                    break;
                }
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            consider(0.5 * (lo + hi));
        }
    }
    best
}

/// Coarse grid used to certify membership before the two-delta solvers run.
fn certify(obj: &ObjectiveSpec) -> Result<f64> {
    let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + i as f64 * 1e-2).collect();
    let report = check_membership(obj, &grid)?;
    match (report.is_member, report.anchor_a) {
        (true, Some(a)) => Ok(a),
        _ => Err(Error::NotFamilyMember(obj.name.clone())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoDeltaOptimum {
    pub alpha: f64,
    pub j_value: f64,
}

/// Minimises φ(α) + ϕ(α + k·distance) over α for P_g = δ_x, P_r = δ_y.
pub fn two_delta_optimum(obj: &ObjectiveSpec, distance: f64, k: f64) -> Result<TwoDeltaOptimum> {
    check_two_delta_args(distance, k)?;
    let anchor = certify(obj)?;
    solve_two_delta(obj, anchor, distance * k)
}

fn check_two_delta_args(distance: f64, k: f64) -> Result<()> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::Invalid(format!("distance {distance} must be positive")));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::Invalid(format!("k {k} must be non-negative")));
    }
    Ok(())
}

const ALPHA_TOL: f64 = 1e-10;

fn solve_two_delta(obj: &ObjectiveSpec, anchor: f64, gap: f64) -> Result<TwoDeltaOptimum> {
    let j = |a: f64| obj.phi(a) + obj.varphi(a + gap);
    if obj.is_flat() {
        return Ok(TwoDeltaOptimum {
            alpha: 0.0,
            j_value: j(0.0),
        });
    }
    let g = |a: f64| obj.phi_d1(a) + obj.varphi_d1(a + gap);
    let (mut lo, mut hi) = (anchor - gap - 1.0, anchor + 1.0);
    let mut width = 1.0;
    while g(lo) > 0.0 || g(hi) < 0.0 {
        width *= 2.0;
        if width > 1e12 {
            return Err(Error::Solver(format!(
                "no stationary alpha for gap {gap} under `{}`",
                obj.name
            )));
        }
        if g(lo) > 0.0 {
            lo -= width;
        }
        if g(hi) < 0.0 {
            hi += width;
        }
    }
    while hi - lo > ALPHA_TOL {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm < 0.0 {
            lo = mid;
        } else if gm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok(TwoDeltaOptimum {
        alpha,
        j_value: j(alpha),
    })
}

const GOLDEN_TOL: f64 = 1e-8;

/// Minimises `two_delta_optimum(obj, distance, k).j_value + λ·k²` over k ≥ 0.
pub fn optimal_k_two_delta(obj: &ObjectiveSpec, distance: f64, lambda: f64) -> Result<f64> {
    check_two_delta_args(distance, 0.0)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Invalid(format!("lambda {lambda} must be positive")));
    }
    let anchor = certify(obj)?;
    let total = |k: f64| -> Result<f64> {
        Ok(solve_two_delta(obj, anchor, k * distance)?.j_value + lambda * k * k)
    };
    // J(k) >= c − φ′(a)·d·k + λk² and J(0) = c, so k* <= φ′(a)·d/λ
    let upper = (obj.phi_d1(anchor) * distance / lambda).max(1e-12) * 1.5;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, upper);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (total(c)?, total(d)?);
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = total(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = total(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Lower bound `c − (φ′(a)·W₁)²/(4λ)` on `J_D + λ·k²`, with `c = φ(a) + ϕ(a)`
/// from the tangent construction at the anchor.
pub fn penalized_lower_bound(obj: &ObjectiveSpec, anchor: f64, w1: f64, lambda: f64) -> f64 {
    let c = obj.phi(anchor) + obj.varphi(anchor);
    let s = obj.phi_d1(anchor) * w1;
    c - s * s / (4.0 * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use crate::geometry::Rng;

    const MEMBERS: [&str; 5] = [
        "linear",
        "logistic",
        "cosh_like",
        "exponential",
        "logistic_plus_linear",
    ];

    fn grid(step: f64) -> Vec<f64> {
        let n = (20.0 / step).round() as usize;
        (0..=n).map(|i| -10.0 + i as f64 * step).collect()
    }

    fn obj(name: &str) -> ObjectiveSpec {
        builtin_objective(name, None).unwrap()
    }

    #[test]
    fn builtin_values() {
        let lin = obj("linear");
        assert_eq!(lin.phi3(2.0), (2.0, 1.0, 0.0));
        assert_relative_eq!(obj("logistic").phi(0.0), 2f64.ln(), epsilon = 1e-15);
        let c = obj("cosh_like");
        assert_eq!(c.phi(0.0), 1.0);
        assert_eq!(c.phi_d1(0.0), 1.0);
        assert_eq!(obj("exponential").varphi(1.0), (-1f64).exp());
        let h = obj("hinge");
        assert_eq!(h.phi(-3.0), 0.0);
        assert_eq!(h.phi(0.5), 1.5);
        assert_eq!(h.varphi(0.5), 0.5);
        assert!(matches!(
            builtin_objective("wasserstein", None),
            Err(Error::UnknownObjective { .. })
        ));
    }

    #[test]
    fn membership_of_builtins() {
        let g = grid(1e-3);
        for name in MEMBERS {
            let r = check_membership(&obj(name), &g).unwrap();
            assert!(r.is_member, "{name}: {:?}", r.summary());
            assert!(r.anchor_a.unwrap().abs() < 1e-9, "{name} anchor {:?}", r.anchor_a);
        }
        let lin = check_membership(&obj("linear"), &g).unwrap();
        assert_eq!(lin.anchor_a, Some(0.0));
    }

    #[test]
    fn hinge_is_not_a_member() {
        let r = check_membership(&obj("hinge"), &grid(1e-3)).unwrap();
        assert!(!r.is_member);
        let first = r
            .violations
            .iter()
            .find(|v| v.condition == Condition::PhiIncreasing)
            .unwrap();
        assert!(first.at < -1.0);
        assert_eq!(first.observed, 0.0);
        assert!(r
            .violations
            .iter()
            .filter(|v| v.condition == Condition::PhiIncreasing)
            .all(|v| v.at <= -1.0));
    }

    #[test]
    fn least_squares_is_not_a_member() {
        let r = check_membership(&obj("least_squares"), &grid(1e-2)).unwrap();
        assert!(!r.is_member);
        assert_relative_eq!(r.anchor_a.unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn membership_grid_preconditions() {
        let o = obj("linear");
        assert!(check_membership(&o, &[]).is_err());
        assert!(check_membership(&o, &[-1.0, 1.0]).is_err());
        assert!(check_membership(&o, &[10.0, -10.0]).is_err());
    }

    #[test]
    fn non_finite_evaluation_is_tagged() {
        let e = obj("exponential");
        let err = check_membership(&e, &[-10.0, 0.0, 10.0, 1000.0]).unwrap_err();
        match err {
            Error::NonFinite { context, .. } => assert!(context.contains("1000")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn combinations() {
        let mix = combine(&[(obj("logistic"), 1.0), (obj("linear"), 0.01)]).unwrap();
        let table = obj("logistic_plus_linear");
        for x in [-3.0, -0.2, 0.0, 1.7, 6.0] {
            assert_relative_eq!(mix.phi(x), -(sigmoid(-x).ln()) + 0.01 * x, epsilon = 1e-12);
            assert_eq!(mix.phi3(x), table.phi3(x));
            assert_eq!(mix.varphi3(x), table.varphi3(x));
        }
        let only_linear = combine(&[(obj("linear"), 1.0), (obj("exponential"), 0.0)]).unwrap();
        for x in [-2.0, 0.3, 5.0] {
            assert_eq!(only_linear.phi3(x), obj("linear").phi3(x));
            assert_eq!(only_linear.varphi3(x), obj("linear").varphi3(x));
        }
        assert!(only_linear.is_flat());
        assert!(combine(&[(obj("linear"), 0.0)]).is_err());
        assert!(combine(&[(obj("linear"), -1.0), (obj("logistic"), 1.0)]).is_err());
    }

    #[test]
    fn random_member_combinations_stay_in_family() {
        let g = grid(1e-2);
        let mut rng = Rng::new(11);
        for _ in 0..20 {
            let a = MEMBERS[rng.index(MEMBERS.len())];
            let b = MEMBERS[rng.index(MEMBERS.len())];
            let c = combine(&[(obj(a), rng.uniform_in(0.01, 3.0)), (obj(b), rng.uniform())])
                .unwrap();
            assert!(check_membership(&c, &g).unwrap().is_member, "{}", c.name);
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let h = 1e-5;
        let probes: Vec<f64> = grid(0.37);
        for name in MEMBERS.iter().chain(["hinge", "least_squares"].iter()) {
            let o = obj(name);
            for &x in &probes {
                if *name == "hinge" && ((x + 1.0).abs() < 1e-3 || (x - 1.0).abs() < 1e-3) {
                    continue;
                }
                for f in [
                    &(|x| o.phi3(x)) as &dyn Fn(f64) -> (f64, f64, f64),
                    &|x| o.varphi3(x),
                ] {
                    let (_, d1, d2) = f(x);
                    let fd1 = (f(x + h).0 - f(x - h).0) / (2.0 * h);
                    let fd2 = (f(x + h).1 - f(x - h).1) / (2.0 * h);
                    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
                    assert!(rel(fd1, d1) <= 1e-6, "{name} d1 at {x}: {fd1} vs {d1}");
                    assert!(rel(fd2, d2) <= 1e-6, "{name} d2 at {x}: {fd2} vs {d2}");
                }
            }
        }
    }

    /// Brute-force grid search over α ∈ [−10, 10] at step 1e-4.
    fn grid_alpha(o: &ObjectiveSpec, gap: f64) -> (f64, f64) {
        (0..=200_000)
            .map(|i| -10.0 + i as f64 * 1e-4)
            .map(|a| (a, o.phi(a) + o.varphi(a + gap)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
    }

    #[test]
    fn two_delta_linear_telescopes() {
        let r = two_delta_optimum(&obj("linear"), 1.0, 1.0).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert_relative_eq!(r.j_value, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_delta_logistic_matches_grid_oracle() {
        let o = obj("logistic");
        let r0 = two_delta_optimum(&o, 1.0, 0.0).unwrap();
        let (ga, gj) = grid_alpha(&o, 0.0);
        assert!(r0.alpha.abs() < 1e-9);
        assert_relative_eq!(r0.j_value, 2.0 * 2f64.ln(), epsilon = 1e-12);
        assert!((ga - r0.alpha).abs() < 1e-4 && (gj - r0.j_value).abs() < 1e-8);

        let r = two_delta_optimum(&o, 2.0, 1.0).unwrap();
        let (ga, gj) = grid_alpha(&o, 2.0);
        assert!((r.alpha - ga).abs() < 1e-4, "{} vs {ga}", r.alpha);
        assert!((r.j_value - gj).abs() < 1e-4);
        assert!(r.j_value <= gj + 1e-12);
    }

    #[test]
    fn two_delta_rejects_non_members() {
        assert!(matches!(
            two_delta_optimum(&obj("hinge"), 1.0, 1.0),
            Err(Error::NotFamilyMember(_))
        ));
        assert!(two_delta_optimum(&obj("linear"), 0.0, 1.0).is_err());
    }

    #[test]
    fn optimal_k_linear_closed_form() {
        let lin = obj("linear");
        for (d, lambda) in [(2.0, 1.0), (1.0, 0.5), (4.0, 2.0), (3.0, 0.25)] {
            let k = optimal_k_two_delta(&lin, d, lambda).unwrap();
            // closed form of argmin −k·d + λk², checked against a k-grid
            let closed = d / (2.0 * lambda);
            let grid_k = (0..=100_000)
                .map(|i| i as f64 * 1e-4 * 2.0 * closed)
                .min_by(|a, b| {
                    (-a * d + lambda * a * a).total_cmp(&(-b * d + lambda * b * b))
                })
                .unwrap();
            assert!((k - closed).abs() < 1e-7, "{k} vs {closed}");
            assert!((grid_k - closed).abs() < 1e-3);
        }
    }

    #[test]
    fn optimal_k_vanishes_under_heavy_penalty() {
        for name in MEMBERS {
            let k = optimal_k_two_delta(&obj(name), 1.0, 1e6).unwrap();
            assert!(k < 1e-5, "{name}: {k}");
        }
    }

    #[test]
    fn optimal_k_logistic_matches_two_dimensional_grid() {
        let o = obj("logistic");
        let (d, lambda) = (1.0, 0.5);
        let k = optimal_k_two_delta(&o, d, lambda).unwrap();
        // joint (α, k) grid, refined around the coarse optimum
        let eval = |a: f64, k: f64| o.phi(a) + o.varphi(a + k * d) + lambda * k * k;
        let mut best = (0.0, 0.0, f64::INFINITY);
        for i in 0..=400 {
            for j in 0..=400 {
                let a = -2.0 + i as f64 * 0.01;
                let kk = j as f64 * 0.005;
                let v = eval(a, kk);
                if v < best.2 {
                    best = (a, kk, v);
                }
            }
        }
        let (a0, k0) = (best.0, best.1);
        for i in 0..=400 {
            for j in 0..=400 {
                let a = a0 - 0.02 + i as f64 * 1e-4;
                let kk = (k0 - 0.02 + j as f64 * 1e-4).max(0.0);
                let v = eval(a, kk);
                if v < best.2 {
                    best = (a, kk, v);
                }
            }
        }
        assert!((k - best.1).abs() < 1e-4, "{k} vs grid {}", best.1);
    }

    #[test]
    fn two_delta_j_monotone_in_k_and_bounded_below() {
        for name in MEMBERS {
            let o = obj(name);
            for d in [0.5, 1.0, 3.0] {
                let mut prev = f64::INFINITY;
                for i in 0..60 {
                    let k = i as f64 * 0.1;
                    let j = two_delta_optimum(&o, d, k).unwrap().j_value;
                    assert!(j <= prev + 1e-12, "{name} d={d} k={k}");
                    prev = j;
                    for lambda in [0.1, 1.0, 10.0] {
                        let bound = penalized_lower_bound(&o, 0.0, d, lambda);
                        assert!(j + lambda * k * k >= bound - 1e-9, "{name} d={d} k={k}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn family_conditions_hold_on_random_points(x in -10.0..10.0f64) {
            for name in MEMBERS {
                let o = obj(name);
                prop_assert!(o.phi_d1(x) > 0.0);
                prop_assert!(o.varphi_d1(x) < 0.0);
                prop_assert!(o.phi_d2(x) >= -CONVEXITY_TOL);
                prop_assert!(o.varphi_d2(x) >= -CONVEXITY_TOL);
            }
        }
    }
}
