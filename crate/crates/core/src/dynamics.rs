//! The adversarial loop at desk scale: a penalised discriminator trained by
//! Adam, and fake particles moved along `∇ₓf`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{blend_sample, resample, Point, PointCloud, Rng};
use crate::lipschitz::{
    centered_grad_penalty, estimate_k, ksq_penalty_k0, lp_penalty, maxgp_penalty_k0, PenaltyConfig, PenaltyKind,
    PenaltyOutput, SmaxList,
};
use crate::net::{Activation, AdamConfig, AdamState, InitScheme, Mlp, Tape};
use crate::objectives::{builtin_objective, ObjectiveSpec};
use crate::scenario::Scenario;
use crate::transport::w1_primal;

/// Base stream for metric probes so they never consume the training stream.
const METRIC_STREAM: u64 = 1 << 32;

/// The generator's loss on `f`; only `−f` is supported, so particles move
/// along `+∇ₓf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    #[default]
    Negation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub init: InitScheme,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::LeakyRelu { slope: 0.2 },
            init: InitScheme::He,
        }
    }
}

impl NetConfig {
    pub fn widths(&self, input_dim: usize) -> Vec<usize> {
        let mut w = vec![input_dim];
        w.extend(&self.hidden);
        w.push(1);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub d_steps: usize,
    /// Particle step size.
    pub eta: f64,
    pub outer_iters: usize,
    pub adam: AdamConfig,
    /// `None` trains the bare objective.
    pub penalty: Option<PenaltyConfig>,
    pub objective: ObjectiveSpec,
    pub generator_loss: GeneratorLoss,
    pub net: NetConfig,
    /// Blend probes used for the empirical-k metric.
    pub k_probes: usize,
    /// Per-step minibatch drawn from each side; `None` uses the full clouds.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_steps: 50,
            eta: 0.05,
            outer_iters: 500,
            adam: AdamConfig::default(),
            penalty: Some(PenaltyConfig::new(PenaltyKind::Maxgp, 10.0, 64).expect("valid default")),
            objective: builtin_objective("linear", None).expect("builtin"),
            generator_loss: GeneratorLoss::Negation,
            net: NetConfig::default(),
            k_probes: 256,
            batch_size: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Invalid(format!("training.eta must be >= 0, got {}", self.eta)));
        }
        let a = &self.adam;
        if !(a.lr.is_finite() && a.lr > 0.0) {
            return Err(Error::Invalid(format!("training.lr must be positive, got {}", a.lr)));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::Invalid("training.beta1 and training.beta2 must lie in [0, 1)".into()));
        }
        if !(a.eps.is_finite() && a.eps > 0.0) {
            return Err(Error::Invalid("training.eps must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Invalid("training.batch_size must be >= 1".into()));
        }
        if self.k_probes == 0 {
            return Err(Error::Invalid("training.k_probes must be >= 1".into()));
        }
        if self.net.hidden.iter().any(|w| *w == 0) {
            return Err(Error::Invalid("network hidden widths must be positive".into()));
        }
        if let Some(p) = &self.penalty {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub iteration: usize,
    pub w1: f64,
    pub mean_f_pg: f64,
    pub mean_f_pr: f64,
    pub k_emp: f64,
    pub j_d: f64,
}

impl MetricRow {
    /// Average of the two side means; the all-sample mean when the clouds
    /// have equal size.
    pub fn offset(&self) -> f64 {
        0.5 * (self.mean_f_pg + self.mean_f_pr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub d_loss: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub iteration: usize,
    /// Current fake side.
    pub particles: PointCloud,
    pub target: PointCloud,
    pub net: Mlp,
    pub adam: AdamState,
    pub smax: SmaxList,
    pub history: Vec<MetricRow>,
    metric_seed: u64,
}

/// `Σ w·φ(f(x))` over `pg` plus `Σ w·ϕ(f(y))` over `pr`.
pub fn d_loss(net: &Mlp, obj: &ObjectiveSpec, pg: &PointCloud, pr: &PointCloud) -> Result<f64> {
    ensure_dim(pg.dim(), pr.dim())?;
    let mut tape = Tape::for_net(net);
    let mut j = 0.0;
    for (x, w) in pg.iter() {
        j += w * obj.phi(net.forward_with(x, &mut tape)?);
    }
    for (y, w) in pr.iter() {
        j += w * obj.varphi(net.forward_with(y, &mut tape)?);
    }
    Ok(j)
}

fn d_loss_grad(net: &Mlp, obj: &ObjectiveSpec, pg: &PointCloud, pr: &PointCloud, grads: &mut [f64]) -> Result<f64> {
    let mut tape = Tape::for_net(net);
    let mut j = 0.0;
    for (x, w) in pg.iter() {
        net.accumulate_param_grad_with(x, &mut tape, grads, |f| {
            let (v, d, _) = obj.phi3(f);
            j += w * v;
            w * d
        })?;
    }
    for (y, w) in pr.iter() {
        net.accumulate_param_grad_with(y, &mut tape, grads, |f| {
            let (v, d, _) = obj.varphi3(f);
            j += w * v;
            w * d
        })?;
    }
    Ok(j)
}

fn side_mean(net: &Mlp, cloud: &PointCloud, tape: &mut Tape) -> Result<f64> {
    let mut s = 0.0;
    for (x, w) in cloud.iter() {
        s += w * net.forward_with(x, tape)?;
    }
    Ok(s)
}

impl FlowState {
    pub fn new(particles: PointCloud, target: PointCloud, cfg: &TrainConfig, rng: &mut Rng) -> Result<Self> {
        ensure_dim(target.dim(), particles.dim())?;
        cfg.validate()?;
        let net = Mlp::init(&cfg.net.widths(particles.dim()), cfg.net.activation, cfg.net.init, rng)?;
        Self::with_net(particles, target, net, cfg, rng.seed())
    }

    pub fn with_net(particles: PointCloud, target: PointCloud, net: Mlp, cfg: &TrainConfig, metric_seed: u64) -> Result<Self> {
        ensure_dim(target.dim(), particles.dim())?;
        ensure_dim(net.input_dim(), particles.dim())?;
        let capacity = cfg.penalty.map_or(1, |p| p.smax_capacity);
        let mut state = Self {
            iteration: 0,
            adam: AdamState::new(net.num_params()),
            smax: SmaxList::new(capacity)?,
            particles,
            target,
            net,
            history: Vec::new(),
            metric_seed,
        };
        let row = state.metrics(cfg)?;
        state.history.push(row);
        Ok(state)
    }

    pub fn metrics(&self, cfg: &TrainConfig) -> Result<MetricRow> {
        let mut tape = Tape::for_net(&self.net);
        let mut rng = Rng::new(self.metric_seed).fork(METRIC_STREAM + self.iteration as u64);
        Ok(MetricRow {
            iteration: self.iteration,
            w1: w1_primal(&self.target, &self.particles)?.cost,
            mean_f_pg: side_mean(&self.net, &self.particles, &mut tape)?,
            mean_f_pr: side_mean(&self.net, &self.target, &mut tape)?,
            k_emp: estimate_k(&self.net, &self.particles, &self.target, cfg.k_probes, &mut rng)?,
            j_d: d_loss(&self.net, &cfg.objective, &self.particles, &self.target)?,
        })
    }

    pub fn last_metrics(&self) -> &MetricRow {
        self.history.last().expect("history starts with the initial row")
    }
}

fn penalty_step(state: &mut FlowState, p: &PenaltyConfig, rng: &mut Rng) -> Result<PenaltyOutput> {
    let (pg, pr) = (&state.particles, &state.target);
    let out = match p.kind {
        PenaltyKind::Gp => centered_grad_penalty(&state.net, &blend_sample(pg, pr, p.blend_batch, rng)?, p.k0)?,
        PenaltyKind::Lp => lp_penalty(&state.net, &blend_sample(pg, pr, p.blend_batch, rng)?)?,
        PenaltyKind::Maxgp => {
            // the list fills part of the batch; fresh samples fill the rest
            let fresh = p.blend_batch.saturating_sub(state.smax.len()).max(1);
            let blend = blend_sample(pg, pr, fresh, rng)?;
            let (out, next) = maxgp_penalty_k0(&state.net, &blend, &state.smax, p.k0)?;
            state.smax = next;
            out
        }
        PenaltyKind::Ksq => {
            return Ok(ksq_penalty_k0(&state.net, pg, pr, p.probes, p.lambda, p.k0, rng)?.0);
        }
    };
    Ok(PenaltyOutput {
        loss: p.lambda * out.loss,
        grads: out.grads.into_iter().map(|g| p.lambda * g).collect(),
    })
}

/// Runs `cfg.d_steps` Adam steps on `J_D + penalty`. Returns one record per step
/// with the values before that step's update.
pub fn train_discriminator(state: &mut FlowState, cfg: &TrainConfig, rng: &mut Rng) -> Result<Vec<StepRecord>> {
    let mut trace = Vec::with_capacity(cfg.d_steps);
    for step in 0..cfg.d_steps {
        let mut grads = vec![0.0; state.net.num_params()];
        let j = match cfg.batch_size {
            Some(b) => {
                let pg = resample(&state.particles, b, rng)?;
                let pr = resample(&state.target, b, rng)?;
                d_loss_grad(&state.net, &cfg.objective, &pg, &pr, &mut grads)?
            }
            None => d_loss_grad(&state.net, &cfg.objective, &state.particles, &state.target, &mut grads)?,
        };
        let pen = match &cfg.penalty {
            Some(p) => {
                let out = penalty_step(state, p, rng)?;
                for (g, q) in grads.iter_mut().zip(&out.grads) {
                    *g += q;
                }
                out.loss
            }
            None => 0.0,
        };
        if !(j + pen).is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                iteration: state.iteration,
                step,
                what: format!("discriminator loss {j} + penalty {pen}"),
            });
        }
        state.adam.step(&cfg.adam, &mut state.net, &grads)?;
        trace.push(StepRecord { d_loss: j, penalty: pen });
    }
    Ok(trace)
}

/// Moves each particle by `η·∇ₓf(x)`, advances the iteration and appends metrics.
pub fn particle_step(state: &mut FlowState, cfg: &TrainConfig) -> Result<()> {
    let mut tape = Tape::for_net(&state.net);
    let mut g = vec![0.0; state.particles.dim()];
    let mut moved = Vec::with_capacity(state.particles.len());
    for x in state.particles.points() {
        state.net.grad_input_with(x, &mut tape, &mut g)?;
        let next = x.offset(&g, cfg.eta).map_err(|_| Error::Diverged {
            iteration: state.iteration,
            step: cfg.d_steps,
            what: format!("particle left the finite range at {:?}", x.coords()),
        })?;
        moved.push(next);
    }
    state.particles = state.particles.with_points(moved)?;
    state.iteration += 1;
    let row = state.metrics(cfg)?;
    state.history.push(row);
    Ok(())
}

/// Alternates discriminator training and particle steps; `observe` sees the
/// initial state and every state after a particle step.
pub fn run_with(
    scenario: &Scenario,
    cfg: &TrainConfig,
    rng: &mut Rng,
    mut observe: impl FnMut(&FlowState) -> Result<()>,
) -> Result<FlowState> {
    let (real, fake) = scenario.clouds()?;
    let mut state = FlowState::new(fake.clone(), real.clone(), cfg, rng)?;
    observe(&state)?;
    for _ in 0..cfg.outer_iters {
        train_discriminator(&mut state, cfg, rng)?;
        particle_step(&mut state, cfg)?;
        observe(&state)?;
    }
    Ok(state)
}

pub fn run(scenario: &Scenario, cfg: &TrainConfig, rng: &mut Rng) -> Result<FlowState> {
    run_with(scenario, cfg, rng, |_| Ok(()))
}

/// Regular 2-D grid; `nx`, `ny` count points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Lattice {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 || !(x.0 < x.1) || !(y.0 < y.1) {
            return Err(Error::Invalid("lattice needs ordered finite ranges and at least 2 points per axis".into()));
        }
        Ok(Self {
            x_min: x.0,
            x_max: x.1,
            y_min: y.0,
            y_max: y.1,
            nx,
            ny,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * j as f64 / (self.ny - 1) as f64
    }

    /// Bounding box of both clouds, padded by `pad` on every side.
    pub fn around(a: &PointCloud, b: &PointCloud, pad: f64, n: usize) -> Result<Self> {
        if a.dim() != 2 || b.dim() != 2 {
            return Err(Error::Invalid("lattice needs 2-D clouds".into()));
        }
        let pts = a.points().iter().chain(b.points());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in pts {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        Self::new((x0 - pad, x1 + pad), (y0 - pad, y1 + pad), n, n)
    }
}

/// `f` on the lattice; `out[j][i]` is the value at `(x(i), y(j))`.
pub fn value_surface(net: &Mlp, lattice: &Lattice) -> Result<Vec<Vec<f64>>> {
    if net.input_dim() != 2 {
        return Err(Error::Invalid(format!("value surface needs a 2-D net, got input dim {}", net.input_dim())));
    }
    let mut tape = Tape::for_net(net);
    (0..lattice.ny)
        .map(|j| {
            (0..lattice.nx)
                .map(|i| net.forward_with(&[lattice.x(i), lattice.y(j)], &mut tape))
                .collect()
        })
        .collect()
}

/// Gradient arrows `(x, ∇ₓf(x))` at each particle.
pub fn particle_gradients(net: &Mlp, cloud: &PointCloud) -> Result<Vec<(Point, Vec<f64>)>> {
    cloud
        .points()
        .iter()
        .map(|x| Ok((x.clone(), net.grad_input(x)?)))
        .collect()
}
