//! Lipschitz regularisers on the blend region between the two clouds:
//! gradient penalty, one-sided penalty, max-gradient penalty with a
//! running top-m list, and λ·k² on the empirical Lipschitz constant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{blend_sample, norm2, Point, PointCloud, Rng};
use crate::net::{Mlp, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Gp,
    Lp,
    Maxgp,
    Ksq,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 4] = [Self::Gp, Self::Lp, Self::Maxgp, Self::Ksq];

    pub fn label(self) -> &'static str {
        match self {
            Self::Gp => "gp",
            Self::Lp => "lp",
            Self::Maxgp => "maxgp",
            Self::Ksq => "ksq",
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown penalty `{s}`; valid options: gp, lp, maxgp, ksq")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub lambda: f64,
    /// Target gradient norm; 0 penalises the norm itself.
    pub k0: f64,
    pub smax_capacity: usize,
    pub blend_batch: usize,
    /// Probe count for the `ksq` estimate of k.
    pub probes: usize,
}

impl PenaltyConfig {
    pub fn new(kind: PenaltyKind, lambda: f64, blend_batch: usize) -> Result<Self> {
        let cfg = Self {
            kind,
            lambda,
            k0: 0.0,
            smax_capacity: (blend_batch / 2).max(1),
            blend_batch,
            probes: blend_batch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Invalid(format!("penalty lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.k0.is_finite() && self.k0 >= 0.0) {
            return Err(Error::Invalid(format!("penalty k0 must be >= 0, got {}", self.k0)));
        }
        if self.blend_batch == 0 || self.probes == 0 {
            return Err(Error::Invalid("blend batch and probe count must be >= 1".into()));
        }
        if self.smax_capacity == 0 || self.smax_capacity > 2 * self.blend_batch {
            return Err(Error::Invalid(format!(
                "smax capacity {} must be in 1..={}",
                self.smax_capacity,
                2 * self.blend_batch
            )));
        }
        Ok(())
    }
}

/// Loss value and its gradient w.r.t. the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyOutput {
    pub loss: f64,
    pub grads: Vec<f64>,
}

/// Points with the largest gradient norms seen so far, sorted descending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmaxList {
    capacity: usize,
    entries: Vec<(Point, f64)>,
}

impl SmaxList {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Invalid("smax capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            entries: Vec::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[(Point, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

struct Probe {
    grad: Vec<f64>,
    norm: f64,
}

fn probe_all(net: &Mlp, pts: &[&Point], tape: &mut Tape) -> Result<Vec<Probe>> {
    let mut out = Vec::with_capacity(pts.len());
    for x in pts {
        let mut g = vec![0.0; net.input_dim()];
        net.grad_input_with(x, tape, &mut g)?;
        let norm = norm2(&g);
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient norm at {:?}", x.coords()),
                value: norm,
            });
        }
        out.push(Probe { grad: g, norm });
    }
    Ok(out)
}

/// Mean of `h(‖∇f(x)‖)` with parameter gradients. `h` returns the value and
/// its derivative w.r.t. the norm.
fn mean_norm_loss(
    net: &Mlp,
    pts: &[&Point],
    probes: &[Probe],
    h: impl Fn(f64) -> (f64, f64),
    tape: &mut Tape,
) -> Result<PenaltyOutput> {
    let mut grads = vec![0.0; net.num_params()];
    let mut loss = 0.0;
    let scale = 1.0 / pts.len() as f64;
    let mut u = vec![0.0; net.input_dim()];
    for (x, p) in pts.iter().zip(probes) {
        let (v, dv) = h(p.norm);
        loss += v;
        if dv == 0.0 || p.norm == 0.0 {
            continue;
        }
        for (ui, gi) in u.iter_mut().zip(&p.grad) {
            *ui = scale * dv * gi / p.norm;
        }
        net.accumulate_input_grad_vjp(x, &u, tape, &mut grads)?;
    }
    Ok(PenaltyOutput {
        loss: loss * scale,
        grads,
    })
}

fn centered(k0: f64) -> impl Fn(f64) -> (f64, f64) {
    move |n| ((n - k0) * (n - k0), 2.0 * (n - k0))
}

fn require_points(blend: &[Point]) -> Result<()> {
    if blend.is_empty() {
        Err(Error::Invalid("penalty needs at least one blend point".into()))
    } else {
        Ok(())
    }
}

/// `mean (‖∇f‖ − k0)²` over the blend points.
pub fn centered_grad_penalty(net: &Mlp, blend: &[Point], k0: f64) -> Result<PenaltyOutput> {
    require_points(blend)?;
    let mut tape = Tape::for_net(net);
    let pts: Vec<&Point> = blend.iter().collect();
    let probes = probe_all(net, &pts, &mut tape)?;
    mean_norm_loss(net, &pts, &probes, centered(k0), &mut tape)
}

/// `mean ‖∇f‖²` over the blend points.
pub fn grad_penalty(net: &Mlp, blend: &[Point]) -> Result<PenaltyOutput> {
    centered_grad_penalty(net, blend, 0.0)
}

/// `mean max(0, ‖∇f‖ − 1)²` over the blend points.
pub fn lp_penalty(net: &Mlp, blend: &[Point]) -> Result<PenaltyOutput> {
    require_points(blend)?;
    let mut tape = Tape::for_net(net);
    let pts: Vec<&Point> = blend.iter().collect();
    let probes = probe_all(net, &pts, &mut tape)?;
    mean_norm_loss(
        net,
        &pts,
        &probes,
        |n| {
            let e = (n - 1.0).max(0.0);
            (e * e, 2.0 * e)
        },
        &mut tape,
    )
}

/// Mean of `(‖∇f‖ − k0)²` over the `capacity` steepest points among the
/// current list and `fresh_blend`. Norms are recomputed with `net` before
/// selection; the returned list holds the selected points.
pub fn maxgp_penalty_k0(net: &Mlp, fresh_blend: &[Point], smax: &SmaxList, k0: f64) -> Result<(PenaltyOutput, SmaxList)> {
    require_points(fresh_blend)?;
    let mut tape = Tape::for_net(net);
    let batch: Vec<&Point> = smax.entries.iter().map(|(p, _)| p).chain(fresh_blend).collect();
    let probes = probe_all(net, &batch, &mut tape)?;
    let mut order: Vec<usize> = (0..batch.len()).collect();
    // stable: equal norms keep batch order
    order.sort_by(|&a, &b| probes[b].norm.total_cmp(&probes[a].norm));
    order.truncate(smax.capacity);
    let pts: Vec<&Point> = order.iter().map(|&i| batch[i]).collect();
    let picked: Vec<Probe> = order
        .iter()
        .map(|&i| Probe {
            grad: probes[i].grad.clone(),
            norm: probes[i].norm,
        })
        .collect();
    let out = mean_norm_loss(net, &pts, &picked, centered(k0), &mut tape)?;
    let next = SmaxList {
        capacity: smax.capacity,
        entries: order.iter().map(|&i| (batch[i].clone(), probes[i].norm)).collect(),
    };
    Ok((out, next))
}

pub fn maxgp_penalty(net: &Mlp, fresh_blend: &[Point], smax: &SmaxList) -> Result<(PenaltyOutput, SmaxList)> {
    maxgp_penalty_k0(net, fresh_blend, smax, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KEstimate {
    pub k: f64,
    /// Steepest probe; the lowest index wins ties.
    pub argmax: Point,
    pub grad: Vec<f64>,
}

pub fn estimate_k_detail(net: &Mlp, pg: &PointCloud, pr: &PointCloud, probes: usize, rng: &mut Rng) -> Result<KEstimate> {
    let pts = blend_sample(pg, pr, probes, rng)?;
    let mut tape = Tape::for_net(net);
    let mut g = vec![0.0; net.input_dim()];
    let mut best: Option<KEstimate> = None;
    for x in pts {
        net.grad_input_with(&x, &mut tape, &mut g)?;
        let n = norm2(&g);
        if best.as_ref().is_none_or(|b| n > b.k) {
            best = Some(KEstimate {
                k: n,
                argmax: x,
                grad: g.clone(),
            });
        }
    }
    Ok(best.expect("probes >= 1"))
}

/// Largest input-gradient norm over `probes` blend samples: a lower bound
/// on the Lipschitz constant over the blend region.
pub fn estimate_k(net: &Mlp, pg: &PointCloud, pr: &PointCloud, probes: usize, rng: &mut Rng) -> Result<f64> {
    Ok(estimate_k_detail(net, pg, pr, probes, rng)?.k)
}

/// `λ·(k − k0)²` with gradients through the steepest probe only.
pub fn ksq_penalty_k0(
    net: &Mlp,
    pg: &PointCloud,
    pr: &PointCloud,
    probes: usize,
    lambda: f64,
    k0: f64,
    rng: &mut Rng,
) -> Result<(PenaltyOutput, KEstimate)> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Invalid(format!("penalty lambda must be > 0, got {lambda}")));
    }
    let est = estimate_k_detail(net, pg, pr, probes, rng)?;
    let mut grads = vec![0.0; net.num_params()];
    if est.k > 0.0 {
        let s = lambda * 2.0 * (est.k - k0) / est.k;
        let u: Vec<f64> = est.grad.iter().map(|g| s * g).collect();
        net.accumulate_input_grad_vjp(&est.argmax, &u, &mut Tape::for_net(net), &mut grads)?;
    }
    let out = PenaltyOutput {
        loss: lambda * (est.k - k0).powi(2),
        grads,
    };
    Ok((out, est))
}

pub fn ksq_penalty(net: &Mlp, pg: &PointCloud, pr: &PointCloud, probes: usize, lambda: f64, rng: &mut Rng) -> Result<PenaltyOutput> {
    Ok(ksq_penalty_k0(net, pg, pr, probes, lambda, 0.0, rng)?.0)
}
