//! Dense scalar-output MLP with reverse-mode gradients w.r.t. inputs and
//! parameters, plus the input-gradient VJP needed by gradient penalties.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{Point, Rng};
use crate::objectives::sigmoid;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Swish,
}

impl Activation {
    /// `(σ(z), σ′(z), σ″(z))`; relu-type kinks use the left derivative.
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            Self::Relu => {
                if z > 0.0 {
                    (z, 1.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            Self::LeakyRelu { slope } => {
                if z > 0.0 {
                    (z, 1.0, 0.0)
                } else {
                    (slope * z, slope, 0.0)
                }
            }
            Self::Tanh => {
                let t = z.tanh();
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
            Self::Swish => {
                let s = sigmoid(z);
                let ds = s * (1.0 - s);
                (z * s, s + z * ds, ds * (2.0 + z * (1.0 - 2.0 * s)))
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Relu => write!(f, "relu"),
            Self::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
            Self::Tanh => write!(f, "tanh"),
            Self::Swish => write!(f, "swish"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "relu" => return Ok(Self::Relu),
            "tanh" => return Ok(Self::Tanh),
            "swish" => return Ok(Self::Swish),
            "leaky_relu" => {
                return Ok(Self::LeakyRelu {
                    slope: DEFAULT_LEAKY_SLOPE,
                })
            }
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("leaky_relu(").and_then(|r| r.strip_suffix(')')) {
            let slope: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad leaky_relu slope `{inner}`")))?;
            if slope.is_finite() && (0.0..1.0).contains(&slope) {
                return Ok(Self::LeakyRelu { slope });
            }
            return Err(Error::Invalid(format!("leaky_relu slope {slope} outside [0, 1)")));
        }
        Err(Error::Invalid(format!(
            "unknown activation `{s}`; valid options: relu, leaky_relu, leaky_relu(<slope>), tanh, swish"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    He,
    Xavier,
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "he" => Ok(Self::He),
            "xavier" => Ok(Self::Xavier),
            other => Err(Error::Invalid(format!("unknown init scheme `{other}`; valid options: he, xavier"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

/// Scalar-output network. Hidden layers apply `activation`; the last layer
/// is affine. Parameters live in one flat vector, each layer as a row-major
/// `fan_out×fan_in` weight block followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    layers: Vec<Layer>,
    params: Vec<f64>,
    seed: Option<u64>,
}

fn layout(widths: &[usize]) -> Result<(Vec<Layer>, usize)> {
    if widths.len() < 2 {
        return Err(Error::Invalid(format!("need at least input and output widths, got {widths:?}")));
    }
    if widths.iter().any(|w| *w == 0) {
        return Err(Error::Invalid(format!("zero layer width in {widths:?}")));
    }
    if *widths.last().unwrap() != 1 {
        return Err(Error::Invalid(format!("output width must be 1, got {widths:?}")));
    }
    let mut layers = Vec::with_capacity(widths.len() - 1);
    let mut off = 0;
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let w = off;
        let b = w + fan_in * fan_out;
        off = b + fan_out;
        layers.push(Layer { fan_in, fan_out, w, b });
    }
    Ok((layers, off))
}

/// Per-call buffers: pre-activations, activations and their tangents.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    zdot: Vec<Vec<f64>>,
    adot: Vec<Vec<f64>>,
    bar_a: Vec<f64>,
    bar_adot: Vec<f64>,
    bar_z: Vec<f64>,
    bar_zdot: Vec<f64>,
}

impl Tape {
    pub fn for_net(net: &Mlp) -> Self {
        let mut t = Tape::default();
        t.fit(net);
        t
    }

    fn fit(&mut self, net: &Mlp) {
        let n = net.layers.len();
        let same = self.a.len() == n
            && self.a.iter().zip(&net.widths).all(|(a, w)| a.len() == *w)
            && self.z.iter().zip(&net.layers).all(|(z, l)| z.len() == l.fan_out);
        if same && self.z.len() == n {
            return;
        }
        self.z = net.layers.iter().map(|l| vec![0.0; l.fan_out]).collect();
        self.zdot = self.z.clone();
        self.a = net.widths[..n].iter().map(|w| vec![0.0; *w]).collect();
        self.adot = self.a.clone();
    }
}

impl Mlp {
    pub fn init(widths: &[usize], activation: Activation, scheme: InitScheme, rng: &mut Rng) -> Result<Self> {
        let (layers, count) = layout(widths)?;
        let mut params = vec![0.0; count];
        for l in &layers {
            let std = match scheme {
                InitScheme::He => (2.0 / l.fan_in as f64).sqrt(),
                InitScheme::Xavier => (2.0 / (l.fan_in + l.fan_out) as f64).sqrt(),
            };
            for p in &mut params[l.w..l.b] {
                *p = std * rng.normal();
            }
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            layers,
            params,
            seed: Some(rng.seed()),
        })
    }

    pub fn from_params(widths: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let (layers, count) = layout(widths)?;
        ensure_dim(count, params.len())?;
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("parameter {i}"),
                value: params[i],
            });
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            layers,
            params,
            seed: None,
        })
    }

    /// `f(x) = w·x + b`.
    pub fn affine(w: &[f64], b: f64) -> Result<Self> {
        let mut params = w.to_vec();
        params.push(b);
        Self::from_params(&[w.len(), 1], Activation::Relu, params)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        ensure_dim(self.params.len(), params.len())?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Multiplies the final affine layer by `c`, which scales `f` by `c`.
    pub fn scale_output(&mut self, c: f64) {
        let last = *self.layers.last().unwrap();
        for p in &mut self.params[last.w..last.b + last.fan_out] {
            *p *= c;
        }
    }

    fn run_forward(&self, x: &[f64], tape: &mut Tape) -> f64 {
        tape.fit(self);
        tape.a[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let (w, b) = (&self.params[l.w..l.b], &self.params[l.b..l.b + l.fan_out]);
            for o in 0..l.fan_out {
                let row = &w[o * l.fan_in..(o + 1) * l.fan_in];
                let mut s = b[o];
                for (wi, ai) in row.iter().zip(&tape.a[li]) {
                    s += wi * ai;
                }
                tape.z[li][o] = s;
            }
            if li < last {
                for (ai, zi) in tape.a[li + 1].iter_mut().zip(&tape.z[li]) {
                    *ai = self.activation.eval(*zi).0;
                }
            }
        }
        tape.z[last][0]
    }

    pub fn forward(&self, x: &Point) -> Result<f64> {
        ensure_dim(self.input_dim(), x.dim())?;
        Ok(self.run_forward(x, &mut Tape::for_net(self)))
    }

    pub fn forward_with(&self, x: &[f64], tape: &mut Tape) -> Result<f64> {
        ensure_dim(self.input_dim(), x.len())?;
        Ok(self.run_forward(x, tape))
    }

    /// Writes `∇ₓf(x)` into `out` and returns `f(x)`.
    pub fn grad_input_with(&self, x: &[f64], tape: &mut Tape, out: &mut [f64]) -> Result<f64> {
        ensure_dim(self.input_dim(), x.len())?;
        ensure_dim(self.input_dim(), out.len())?;
        let f = self.run_forward(x, tape);
        let mut delta = vec![1.0];
        for li in (0..self.layers.len()).rev() {
            let l = self.layers[li];
            let w = &self.params[l.w..l.b];
            let mut up = vec![0.0; l.fan_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (u, wi) in up.iter_mut().zip(&w[o * l.fan_in..(o + 1) * l.fan_in]) {
                    *u += d * wi;
                }
            }
            if li > 0 {
                for (u, z) in up.iter_mut().zip(&tape.z[li - 1]) {
                    *u *= self.activation.eval(*z).1;
                }
            }
            delta = up;
        }
        out.copy_from_slice(&delta);
        Ok(f)
    }

    pub fn grad_input(&self, x: &Point) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.input_dim()];
        self.grad_input_with(x, &mut Tape::for_net(self), &mut out)?;
        Ok(out)
    }

    /// Adds `upstream · ∂f(x)/∂θ` into `acc`.
    pub fn accumulate_param_grad(&self, x: &[f64], upstream: f64, tape: &mut Tape, acc: &mut [f64]) -> Result<f64> {
        self.accumulate_param_grad_with(x, tape, acc, |_| upstream)
    }

    /// As [`Mlp::accumulate_param_grad`], with the upstream scalar computed
    /// from `f(x)`.
    pub fn accumulate_param_grad_with(
        &self,
        x: &[f64],
        tape: &mut Tape,
        acc: &mut [f64],
        upstream: impl FnOnce(f64) -> f64,
    ) -> Result<f64> {
        ensure_dim(self.input_dim(), x.len())?;
        ensure_dim(self.params.len(), acc.len())?;
        let f = self.run_forward(x, tape);
        let mut delta = vec![upstream(f)];
        for li in (0..self.layers.len()).rev() {
            let l = self.layers[li];
            for (o, d) in delta.iter().enumerate() {
                acc[l.b + o] += d;
                if *d == 0.0 {
                    continue;
                }
                let row = &mut acc[l.w + o * l.fan_in..l.w + (o + 1) * l.fan_in];
                for (g, ai) in row.iter_mut().zip(&tape.a[li]) {
                    *g += d * ai;
                }
            }
            if li == 0 {
                break;
            }
            let w = &self.params[l.w..l.b];
            let mut up = vec![0.0; l.fan_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (u, wi) in up.iter_mut().zip(&w[o * l.fan_in..(o + 1) * l.fan_in]) {
                    *u += d * wi;
                }
            }
            for (u, z) in up.iter_mut().zip(&tape.z[li - 1]) {
                *u *= self.activation.eval(*z).1;
            }
            delta = up;
        }
        Ok(f)
    }

    /// `Σ upstream·∂f(x)/∂θ` over the batch, accumulated in batch order.
    pub fn grad_params(&self, batch: &[(Point, f64)]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::Invalid("parameter gradient needs a non-empty batch".into()));
        }
        let mut acc = vec![0.0; self.params.len()];
        let mut tape = Tape::for_net(self);
        for (x, u) in batch {
            self.accumulate_param_grad(x, *u, &mut tape, &mut acc)?;
        }
        Ok(acc)
    }

    /// Adds `∂(u · ∇ₓf(x))/∂θ` into `acc`: the parameter gradient of any
    /// loss on `∇ₓf(x)` whose gradient w.r.t. `∇ₓf(x)` is `u`.
    ///
    /// Pushes the tangent `ȧ₀ = u` through the forward pass, then reverses
    /// the pair (primal, tangent) with adjoints seeded at `ż̄_L = 1`.
    pub fn accumulate_input_grad_vjp(&self, x: &[f64], u: &[f64], tape: &mut Tape, acc: &mut [f64]) -> Result<()> {
        ensure_dim(self.input_dim(), x.len())?;
        ensure_dim(self.input_dim(), u.len())?;
        ensure_dim(self.params.len(), acc.len())?;
        self.run_forward(x, tape);
        let last = self.layers.len() - 1;
        tape.adot[0].copy_from_slice(u);
        for (li, l) in self.layers.iter().enumerate() {
            let w = &self.params[l.w..l.b];
            for o in 0..l.fan_out {
                let mut s = 0.0;
                for (wi, ai) in w[o * l.fan_in..(o + 1) * l.fan_in].iter().zip(&tape.adot[li]) {
                    s += wi * ai;
                }
                tape.zdot[li][o] = s;
            }
            if li < last {
                for o in 0..l.fan_out {
                    let d = self.activation.eval(tape.z[li][o]).1;
                    tape.adot[li + 1][o] = d * tape.zdot[li][o];
                }
            }
        }

        tape.bar_z.clear();
        tape.bar_z.push(0.0);
        tape.bar_zdot.clear();
        tape.bar_zdot.push(1.0);
        for li in (0..self.layers.len()).rev() {
            let l = self.layers[li];
            for o in 0..l.fan_out {
                let (bz, bzd) = (tape.bar_z[o], tape.bar_zdot[o]);
                acc[l.b + o] += bz;
                if bz == 0.0 && bzd == 0.0 {
                    continue;
                }
                let row = &mut acc[l.w + o * l.fan_in..l.w + (o + 1) * l.fan_in];
                for ((g, a), ad) in row.iter_mut().zip(&tape.a[li]).zip(&tape.adot[li]) {
                    *g += bz * a + bzd * ad;
                }
            }
            if li == 0 {
                break;
            }
            let w = &self.params[l.w..l.b];
            tape.bar_a.clear();
            tape.bar_a.resize(l.fan_in, 0.0);
            tape.bar_adot.clear();
            tape.bar_adot.resize(l.fan_in, 0.0);
            for o in 0..l.fan_out {
                let (bz, bzd) = (tape.bar_z[o], tape.bar_zdot[o]);
                if bz == 0.0 && bzd == 0.0 {
                    continue;
                }
                for (i, wi) in w[o * l.fan_in..(o + 1) * l.fan_in].iter().enumerate() {
                    tape.bar_a[i] += wi * bz;
                    tape.bar_adot[i] += wi * bzd;
                }
            }
            tape.bar_z.clear();
            tape.bar_zdot.clear();
            for i in 0..l.fan_in {
                let z = tape.z[li - 1][i];
                let (_, d1, d2) = self.activation.eval(z);
                tape.bar_z.push(tape.bar_a[i] * d1 + tape.bar_adot[i] * d2 * tape.zdot[li - 1][i]);
                tape.bar_zdot.push(tape.bar_adot[i] * d1);
            }
        }
        Ok(())
    }

    /// Text checkpoint: a header of widths, activation and seed, then one
    /// parameter per line in layer order (row-major weights, then biases).
    /// Leading `#` comment lines are skipped when reading.
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::from("lipflow-mlp v1\n");
        let widths: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        s.push_str(&format!("widths {}\n", widths.join(" ")));
        s.push_str(&format!("activation {}\n", self.activation));
        match self.seed {
            Some(seed) => s.push_str(&format!("seed {seed}\n")),
            None => s.push_str("seed none\n"),
        }
        s.push_str(&format!("params {}\n", self.params.len()));
        for p in &self.params {
            s.push_str(&format!("{p}\n"));
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.trim()))
                .ok_or_else(|| bad(format!("missing {what}")))
        };
        let (n, magic) = next("header")?;
        if magic != "lipflow-mlp v1" {
            return Err(bad(format!("line {n}: unrecognised header `{magic}`")));
        }
        let field = |(n, line): (usize, &str), key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("line {n}: expected `{key} ...`")))
        };
        let widths = field(next("widths")?, "widths")?
            .split_whitespace()
            .map(|w| w.parse::<usize>().map_err(|_| bad(format!("bad width `{w}`"))))
            .collect::<Result<Vec<_>>>()?;
        let activation: Activation = field(next("activation")?, "activation")?
            .parse()
            .map_err(|e: Error| bad(e.to_string()))?;
        let seed = match field(next("seed")?, "seed")?.as_str() {
            "none" => None,
            s => Some(s.parse::<u64>().map_err(|_| bad(format!("bad seed `{s}`")))?),
        };
        let count: usize = field(next("params")?, "params")?
            .parse()
            .map_err(|_| bad("bad parameter count".into()))?;
        let mut params = Vec::with_capacity(count);
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            params.push(line.parse::<f64>().map_err(|_| bad(format!("line {}: bad float `{line}`", i + 1)))?);
        }
        if params.len() != count {
            return Err(bad(format!("expected {count} parameters, found {}", params.len())));
        }
        let mut net = Self::from_params(&widths, activation, params).map_err(|e| bad(e.to_string()))?;
        net.seed = seed;
        Ok(net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.0,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// One bias-corrected Adam update of `net`'s parameters.
    pub fn step(&mut self, cfg: &AdamConfig, net: &mut Mlp, grads: &[f64]) -> Result<()> {
        ensure_dim(self.m.len(), grads.len())?;
        ensure_dim(self.m.len(), net.params.len())?;
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for (((p, g), m), v) in net.params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::geometry::Rng;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    const ACTS: [Activation; 4] = [
        Activation::Relu,
        Activation::LeakyRelu { slope: 0.2 },
        Activation::Tanh,
        Activation::Swish,
    ];

    fn near_kink(net: &Mlp, x: &[f64]) -> bool {
        if matches!(net.activation, Activation::Tanh | Activation::Swish) {
            return false;
        }
        let mut t = Tape::for_net(net);
        net.run_forward(x, &mut t);
        t.z[..t.z.len() - 1].iter().flatten().any(|z| z.abs() < 1e-3)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-2)
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        let h = 1e-5;
        for act in ACTS {
            for z in [-2.3, -0.7, 0.4, 1.9] {
                let (_, d1, d2) = act.eval(z);
                let fd1 = (act.eval(z + h).0 - act.eval(z - h).0) / (2.0 * h);
                let fd2 = (act.eval(z + h).1 - act.eval(z - h).1) / (2.0 * h);
                assert!(rel_close(d1, fd1, 1e-7), "{act} d1 at {z}");
                assert!(rel_close(d2, fd2, 1e-6), "{act} d2 at {z}");
            }
        }
        assert_eq!(Activation::Relu.eval(0.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn activation_parsing_roundtrip() {
        for act in ACTS {
            assert_eq!(act.to_string().parse::<Activation>().unwrap(), act);
        }
        assert_eq!("leaky_relu".parse::<Activation>().unwrap(), Activation::LeakyRelu { slope: 0.2 });
        assert!("gelu".parse::<Activation>().is_err());
        assert!("leaky_relu(2)".parse::<Activation>().is_err());
    }

    #[test]
    fn init_is_reproducible_and_validated() {
        let a = Mlp::init(&[2, 8, 1], Activation::Relu, InitScheme::He, &mut Rng::new(4)).unwrap();
        let b = Mlp::init(&[2, 8, 1], Activation::Relu, InitScheme::He, &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_params(), 2 * 8 + 8 + 8 + 1);
        assert!(Mlp::init(&[], Activation::Relu, InitScheme::He, &mut Rng::new(0)).is_err());
        assert!(Mlp::init(&[2, 3], Activation::Relu, InitScheme::He, &mut Rng::new(0)).is_err());
        assert!(Mlp::init(&[2, 0, 1], Activation::Relu, InitScheme::He, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn he_variance_matches_fan_in() {
        let net = Mlp::init(&[64, 128, 64, 1], Activation::Relu, InitScheme::He, &mut Rng::new(8)).unwrap();
        for l in &net.layers {
            let w = &net.params[l.w..l.b];
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
            let want = 2.0 / l.fan_in as f64;
            if l.fan_out >= 64 {
                assert!((var / want - 1.0).abs() < 0.2, "var {var} want {want}");
            }
        }
    }

    #[test]
    fn affine_examples() {
        let net = Mlp::affine(&[1.0, 1.0], 0.0).unwrap();
        assert_eq!(net.forward(&p(&[2.0, 1.0])).unwrap(), 3.0);
        for x in [[0.0, 0.0], [-3.0, 7.0], [100.0, -2.0]] {
            assert_eq!(net.grad_input(&p(&x)).unwrap(), vec![1.0, 1.0]);
        }
        let g = net.grad_params(&[(p(&[2.0, -1.0]), 1.0)]).unwrap();
        assert_eq!(g, vec![2.0, -1.0, 1.0]);
        assert!(net.forward(&p(&[1.0])).is_err());
        assert!(net.grad_params(&[]).is_err());
    }

    #[test]
    fn zero_final_layer_gives_zero_gradient() {
        let mut net = Mlp::init(&[3, 5, 1], Activation::Tanh, InitScheme::Xavier, &mut Rng::new(1)).unwrap();
        net.scale_output(0.0);
        assert_eq!(net.grad_input(&p(&[0.3, -0.2, 1.0])).unwrap(), vec![0.0; 3]);
        assert_eq!(net.forward(&p(&[0.3, -0.2, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn tanh_output_is_bounded_by_final_layer() {
        let net = Mlp::init(&[2, 16, 1], Activation::Tanh, InitScheme::He, &mut Rng::new(6)).unwrap();
        let l = *net.layers.last().unwrap();
        let bound: f64 = net.params[l.w..l.b + 1].iter().map(|v| v.abs()).sum();
        let mut rng = Rng::new(7);
        for _ in 0..200 {
            let x = p(&[rng.uniform_in(-50.0, 50.0), rng.uniform_in(-50.0, 50.0)]);
            assert!(net.forward(&x).unwrap().abs() <= bound);
        }
    }

    #[test]
    fn grad_param_linearity() {
        let net = Mlp::init(&[2, 6, 6, 1], Activation::Swish, InitScheme::He, &mut Rng::new(2)).unwrap();
        let x = p(&[0.4, -1.1]);
        let g1 = net.grad_params(&[(x.clone(), 1.0)]).unwrap();
        let g2 = net.grad_params(&[(x, 2.0)]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn relu_gradient_is_locally_constant() {
        let net = Mlp::init(&[2, 12, 12, 1], Activation::Relu, InitScheme::He, &mut Rng::new(3)).unwrap();
        let mut rng = Rng::new(13);
        let mut checked = 0;
        for _ in 0..100 {
            let x = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            if near_kink(&net, &x) {
                continue;
            }
            let g = net.grad_input(&p(&x)).unwrap();
            let y = [x[0] + 1e-7, x[1] - 1e-7];
            assert_eq!(g, net.grad_input(&p(&y)).unwrap());
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn checkpoint_roundtrip() {
        for act in ACTS {
            let net = Mlp::init(&[3, 7, 4, 1], act, InitScheme::He, &mut Rng::new(21)).unwrap();
            let back = Mlp::from_checkpoint(&net.to_checkpoint()).unwrap();
            assert_eq!(net, back);
        }
        let net = Mlp::affine(&[1.5, -0.25], 0.125).unwrap();
        assert_eq!(Mlp::from_checkpoint(&net.to_checkpoint()).unwrap(), net);
        let commented = format!("# run 3\n# more\n{}", net.to_checkpoint());
        assert_eq!(Mlp::from_checkpoint(&commented).unwrap(), net);
        assert!(Mlp::from_checkpoint("garbage").is_err());
        let truncated: String = net.to_checkpoint().lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(Mlp::from_checkpoint(&truncated), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut net = Mlp::init(&[2, 4, 1], Activation::Relu, InitScheme::He, &mut Rng::new(1)).unwrap();
        let before = net.params.clone();
        let mut st = AdamState::new(net.num_params());
        for _ in 0..5 {
            st.step(&AdamConfig::default(), &mut net, &vec![0.0; before.len()]).unwrap();
        }
        assert_eq!(net.params, before);
        assert!(st.step(&AdamConfig::default(), &mut net, &[1.0]).is_err());
    }

    #[test]
    fn adam_constant_gradient_steps_by_lr() {
        // with constant g the bias-corrected ratio m̂/√v̂ is exactly sign(g)
        // up to eps, so each step moves by lr
        let cfg = AdamConfig {
            lr: 0.01,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-12,
        };
        let mut net = Mlp::affine(&[0.0, 0.0], 0.0).unwrap();
        let mut st = AdamState::new(3);
        let g = [0.3, -2.0, 1e-3];
        for step in 1..=50 {
            st.step(&cfg, &mut net, &g).unwrap();
            for (pv, gv) in net.params.iter().zip(&g) {
                let want = -cfg.lr * step as f64 * gv.signum();
                assert!((pv - want).abs() < 1e-8, "{pv} vs {want}");
            }
        }
    }

    fn random_net(seed: u64) -> Mlp {
        let mut rng = Rng::new(seed);
        let act = ACTS[rng.index(4)];
        let dim = 1 + rng.index(3);
        let depth = 1 + rng.index(3);
        let mut widths = vec![dim];
        for _ in 0..depth {
            widths.push(2 + rng.index(6));
        }
        widths.push(1);
        let mut net = Mlp::init(&widths, act, InitScheme::He, &mut rng).unwrap();
        let biases: Vec<(usize, usize)> = net.layers.iter().map(|l| (l.b, l.fan_out)).collect();
        for (b, n) in biases {
            for v in &mut net.params[b..b + n] {
                *v = rng.uniform_in(-0.5, 0.5);
            }
        }
        net
    }

    fn random_input(net: &Mlp, rng: &mut Rng) -> Vec<f64> {
        (0..net.input_dim()).map(|_| rng.uniform_in(-1.5, 1.5)).collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        let mut checked = 0;
        for seed in 0..100 {
            let net = random_net(seed);
            let mut rng = Rng::new(1000 + seed);
            let x = random_input(&net, &mut rng);
            if near_kink(&net, &x) {
                continue;
            }
            checked += 1;
            let g = net.grad_input(&p(&x)).unwrap();
            for i in 0..x.len() {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (net.forward(&p(&a)).unwrap() - net.forward(&p(&b)).unwrap()) / (2.0 * h);
                assert!(rel_close(g[i], fd, 1e-5), "seed {seed} input {i}: {} vs {fd}", g[i]);
            }

            let batch: Vec<(Point, f64)> = (0..3)
                .map(|_| (p(&random_input(&net, &mut rng)), rng.uniform_in(-1.0, 1.0)))
                .collect();
            if batch.iter().any(|(x, _)| near_kink(&net, x)) {
                continue;
            }
            let loss = |n: &Mlp| -> f64 { batch.iter().map(|(x, u)| u * n.forward(x).unwrap()).sum() };
            let gp = net.grad_params(&batch).unwrap();
            for k in 0..net.num_params() {
                let mut a = net.clone();
                let mut b = net.clone();
                a.params[k] += h;
                b.params[k] -= h;
                let fd = (loss(&a) - loss(&b)) / (2.0 * h);
                assert!(rel_close(gp[k], fd, 1e-5), "seed {seed} param {k}: {} vs {fd}", gp[k]);
            }
        }
        assert!(checked >= 60, "only {checked} kink-free cases");
    }

    #[test]
    fn input_gradient_vjp_matches_finite_differences() {
        let h = 1e-6;
        for seed in 0..100 {
            let net = random_net(seed);
            let mut rng = Rng::new(500 + seed);
            let x = random_input(&net, &mut rng);
            if near_kink(&net, &x) {
                continue;
            }
            let u: Vec<f64> = (0..x.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let directional = |n: &Mlp| -> f64 {
                let g = n.grad_input(&p(&x)).unwrap();
                g.iter().zip(&u).map(|(a, b)| a * b).sum()
            };
            let mut acc = vec![0.0; net.num_params()];
            net.accumulate_input_grad_vjp(&x, &u, &mut Tape::for_net(&net), &mut acc).unwrap();
            for k in 0..net.num_params() {
                let mut a = net.clone();
                let mut b = net.clone();
                a.params[k] += h;
                b.params[k] -= h;
                let fd = (directional(&a) - directional(&b)) / (2.0 * h);
                assert!(rel_close(acc[k], fd, 1e-4), "seed {seed} param {k}: {} vs {fd}", acc[k]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn forward_is_deterministic(seed in 0u64..1000, x in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let net = Mlp::init(&[2, 5, 1], Activation::Swish, InitScheme::He, &mut Rng::new(seed)).unwrap();
            let x = p(&x);
            prop_assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
            let mut tape = Tape::for_net(&net);
            prop_assert_eq!(net.forward_with(&x, &mut tape).unwrap(), net.forward(&x).unwrap());
        }

        #[test]
        fn affine_net_slope_is_weight_norm(w in proptest::collection::vec(-5.0f64..5.0, 3), b in -2.0f64..2.0,
                                           x in proptest::collection::vec(-5.0f64..5.0, 3),
                                           y in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let net = Mlp::affine(&w, b).unwrap();
            let g = net.grad_input(&p(&x)).unwrap();
            prop_assert_eq!(g, w.clone());
            let dx: f64 = x.iter().zip(&y).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            let df = (net.forward(&p(&x)).unwrap() - net.forward(&p(&y)).unwrap()).abs();
            let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(df <= wn * dx * (1.0 + 1e-12) + 1e-12);
        }
    }
}
