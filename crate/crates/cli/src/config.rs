//! Sectioned key-value run configs.
//!
//! ```text
//! # comment
//! [section]
//! key = value      # trailing comments are fine
//! ```
//!
//! Lists are comma separated. Every key must be known to its section.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use lipflow::dynamics::{NetConfig, TrainConfig};
use lipflow::geometry::Rng;
use lipflow::lipschitz::{PenaltyConfig, PenaltyKind};
use lipflow::net::{Activation, AdamConfig, InitScheme};
use lipflow::objectives::builtin_objective;
use lipflow::scenario::{FakeShape, Preset, Scenario, DEFAULT_FAKE_SPREAD, DEFAULT_MODE_OFFSET, DEFAULT_MODE_STD};

use crate::cloud_io;

pub const SECTIONS: &[&str] = &["scenario", "objective", "penalty", "training", "output", "surface", "verify"];

/// Stream forked off the run seed for scenario sampling.
const SCENARIO_STREAM: u64 = 1 << 40;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("missing required key {0}")]
    Missing(String),

    #[error("{key} (line {line}): expected {expected}, got `{got}`")]
    Type {
        key: String,
        line: usize,
        expected: &'static str,
        got: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("{key}: {source}")]
    Core { key: String, source: lipflow::Error },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
    used: Cell<bool>,
}

/// Parsed but uninterpreted config text.
#[derive(Debug, Default)]
pub struct Document {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, msg: format!("unterminated section header `{body}`") })?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::Syntax {
                        line,
                        msg: format!("unknown section [{name}]; valid sections: {}", SECTIONS.join(", ")),
                    });
                }
                doc.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, msg: format!("expected `key = value`, got `{body}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line, msg: format!("empty key or value in `{body}`") });
            }
            let Some(section) = &current else {
                return Err(ConfigError::Syntax { line, msg: format!("key `{key}` appears before any section header") });
            };
            let map = doc.sections.get_mut(section).expect("section inserted on header");
            if let Some(prev) = map.get(key) {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("duplicate key {section}.{key} (first set on line {})", prev.line),
                });
            }
            map.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                    used: Cell::new(false),
                },
            );
        }
        Ok(doc)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(section)?.get(key)?;
        e.used.set(true);
        Some(e)
    }

    pub fn str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn required_str(&self, section: &str, key: &str) -> Result<&str> {
        self.str(section, key).ok_or_else(|| ConfigError::Missing(format!("{section}.{key}")))
    }

    fn typed<T: FromStr>(&self, section: &str, key: &str, expected: &'static str) -> Result<Option<T>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        e.value.parse().map(Some).map_err(|_| ConfigError::Type {
            key: format!("{section}.{key}"),
            line: e.line,
            expected,
            got: e.value.clone(),
        })
    }

    fn real(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.typed(section, key, "a number")?.unwrap_or(default))
    }

    fn count(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self.typed(section, key, "a non-negative integer")?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, section: &str, key: &str, expected: &'static str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        if e.value == "none" {
            return Ok(Some(Vec::new()));
        }
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| ConfigError::Type {
                    key: format!("{section}.{key}"),
                    line: e.line,
                    expected,
                    got: s.trim().to_string(),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Activation lists keep `leaky_relu(0.3)` intact.
    fn activation_list(&self, section: &str, key: &str) -> Result<Option<Vec<Activation>>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let mut out = Vec::new();
        let mut depth = 0;
        let mut start = 0;
        let v = &e.value;
        for (i, ch) in v.char_indices().chain(std::iter::once((v.len(), ','))) {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    let item = v[start..i].trim();
                    out.push(item.parse::<Activation>().map_err(|err| ConfigError::Core {
                        key: format!("{section}.{key} (line {})", e.line),
                        source: err,
                    })?);
                    start = i + 1;
                }
                _ => {}
            }
        }
        Ok(Some(out))
    }

    fn parsed<T: FromStr<Err = lipflow::Error>>(&self, section: &str, key: &str) -> Result<Option<T>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        e.value.parse().map(Some).map_err(|err| ConfigError::Core {
            key: format!("{section}.{key} (line {})", e.line),
            source: err,
        })
    }

    fn unused(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (s, map) in &self.sections {
            for (k, e) in map {
                if !e.used.get() {
                    out.push(format!("{s}.{k} (line {})", e.line));
                }
            }
        }
        out
    }

    /// Order- and comment-independent rendering used for the manifest hash.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (section, map) in &self.sections {
            for (k, e) in map {
                s.push_str(&format!("{section}.{k}={}\n", e.value));
            }
        }
        s
    }
}

/// How a scenario was requested; rebuilt deterministically from the seed.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioConfig {
    ParallelLines { count: usize, gap: f64 },
    TwoDelta { distance: f64, dim: usize },
    RandomClouds { n_real: usize, n_fake: usize, dim: usize, separation: f64, spread: f64 },
    TwoGaussians1d { offset: f64, std: f64, fake: FakeShape },
    ImageCloud { real: PathBuf, fake: PathBuf },
}

/// Closed-form field settings for density scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub specs: Vec<String>,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Subdirectory of `--out-dir`; defaults to the config file stem.
    pub name: String,
    /// Iterations between SVG snapshots; 0 keeps only the first and last.
    pub snapshot_every: usize,
    /// Iterations between trajectory rows.
    pub trajectory_every: usize,
    /// Lattice points per axis for surface snapshots.
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceConfig {
    pub activations: Vec<Activation>,
    pub lrs: Vec<f64>,
    pub depths: Vec<usize>,
    pub width: usize,
    pub steps: usize,
    pub resolution: usize,
    pub pad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub discriminator_steps: usize,
    pub bounding_tol: f64,
    pub gradient_tol: f64,
    pub pairs: usize,
    pub interp_steps: usize,
    pub nash_tol_w: f64,
    pub nash_tol_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub scenario_config: ScenarioConfig,
    pub scenario: Scenario,
    pub objective: String,
    pub objective_param: Option<f64>,
    pub train: TrainConfig,
    pub output: OutputConfig,
    pub fields: FieldConfig,
    pub surface: SurfaceConfig,
    pub verify: VerifyConfig,
    pub seed: u64,
    /// Hex SHA-256 of the canonical config and seed.
    pub hash: String,
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::Invalid(format!("{key} must be positive")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(ConfigError::Invalid(format!("{key} must be >= 1")))
    }
}

fn core(key: &str) -> impl FnOnce(lipflow::Error) -> ConfigError + '_ {
    move |source| ConfigError::Core { key: key.to_string(), source }
}

fn scenario_config(doc: &Document, base: &Path) -> Result<ScenarioConfig> {
    let preset: Preset = doc
        .parsed("scenario", "preset")?
        .ok_or_else(|| ConfigError::Missing("scenario.preset".into()))?;
    Ok(match preset {
        Preset::ParallelLines => ScenarioConfig::ParallelLines {
            count: doc.count("scenario", "count", 10)?,
            gap: positive("scenario.gap", doc.real("scenario", "gap", 1.0)?)?,
        },
        Preset::TwoDelta => ScenarioConfig::TwoDelta {
            distance: doc.real("scenario", "distance", 1.0)?,
            dim: at_least_one("scenario.dim", doc.count("scenario", "dim", 2)?)?,
        },
        Preset::RandomClouds => ScenarioConfig::RandomClouds {
            n_real: at_least_one("scenario.n_real", doc.count("scenario", "n_real", 20)?)?,
            n_fake: at_least_one("scenario.n_fake", doc.count("scenario", "n_fake", 20)?)?,
            dim: at_least_one("scenario.dim", doc.count("scenario", "dim", 2)?)?,
            separation: doc.real("scenario", "separation", 3.0)?,
            spread: positive("scenario.spread", doc.real("scenario", "spread", 1.0)?)?,
        },
        Preset::TwoGaussians1d => {
            let fake = match doc.str("scenario", "fake").unwrap_or("uniform") {
                "uniform" => FakeShape::Uniform {
                    spread: positive("scenario.spread", doc.real("scenario", "spread", DEFAULT_FAKE_SPREAD)?)?,
                },
                "gaussian" => FakeShape::Gaussian,
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "scenario.fake must be `uniform` or `gaussian`, got `{other}`"
                    )))
                }
            };
            ScenarioConfig::TwoGaussians1d {
                offset: doc.real("scenario", "offset", DEFAULT_MODE_OFFSET)?,
                std: positive("scenario.std", doc.real("scenario", "std", DEFAULT_MODE_STD)?)?,
                fake,
            }
        }
        Preset::ImageCloud => ScenarioConfig::ImageCloud {
            real: base.join(doc.required_str("scenario", "real")?),
            fake: base.join(doc.required_str("scenario", "fake")?),
        },
    })
}

impl ScenarioConfig {
    pub fn build(&self, seed: u64) -> Result<Scenario> {
        let key = "scenario";
        match self {
            Self::ParallelLines { count, gap } => Scenario::parallel_lines(*count, *gap).map_err(core(key)),
            Self::TwoDelta { distance, dim } => Scenario::two_delta(*distance, *dim).map_err(core(key)),
            Self::RandomClouds { n_real, n_fake, dim, separation, spread } => {
                let mut rng = Rng::new(seed).fork(SCENARIO_STREAM);
                Scenario::random_clouds(*n_real, *n_fake, *dim, *separation, *spread, &mut rng).map_err(core(key))
            }
            Self::TwoGaussians1d { offset, std, fake } => {
                Scenario::two_gaussians_1d(*offset, *std, *fake).map_err(core(key))
            }
            Self::ImageCloud { real, fake } => {
                let load = |p: &Path| {
                    cloud_io::read_cloud(p).map_err(|e| ConfigError::Invalid(format!("scenario image cloud: {e}")))
                };
                let (r, f) = (load(real)?, load(fake)?);
                Scenario::from_clouds("image_cloud", Preset::ImageCloud, r, f).map_err(core(key))
            }
        }
    }
}

fn penalty(doc: &Document) -> Result<Option<PenaltyConfig>> {
    let kind = doc.str("penalty", "kind").unwrap_or("maxgp");
    let lambda: Option<f64> = doc.typed("penalty", "lambda", "a number")?;
    if kind == "none" {
        return Ok(None);
    }
    let kind: PenaltyKind = kind.parse().map_err(|e| ConfigError::Core {
        key: "penalty.kind".into(),
        source: e,
    })?;
    let lambda = positive("penalty.lambda", lambda.unwrap_or(1.0))?;
    let blend_batch = at_least_one("penalty.blend_batch", doc.count("penalty", "blend_batch", 64)?)?;
    let mut p = PenaltyConfig::new(kind, lambda, blend_batch).map_err(core("penalty"))?;
    p.k0 = doc.real("penalty", "k0", 0.0)?;
    p.smax_capacity = doc.count("penalty", "smax_capacity", p.smax_capacity)?;
    p.probes = doc.count("penalty", "probes", p.probes)?;
    p.validate().map_err(core("penalty"))?;
    Ok(Some(p))
}

fn training(doc: &Document) -> Result<TrainConfig> {
    let defaults = TrainConfig::default();
    let net = NetConfig {
        hidden: doc.list("training", "hidden", "a comma-separated list of widths")?.unwrap_or(vec![32, 32]),
        activation: doc.parsed("training", "activation")?.unwrap_or(defaults.net.activation),
        init: doc.parsed::<InitScheme>("training", "init")?.unwrap_or(defaults.net.init),
    };
    let adam = AdamConfig {
        lr: positive("training.lr", doc.real("training", "lr", 1e-3)?)?,
        beta1: doc.real("training", "beta1", defaults.adam.beta1)?,
        beta2: doc.real("training", "beta2", defaults.adam.beta2)?,
        eps: doc.real("training", "eps", defaults.adam.eps)?,
    };
    let cfg = TrainConfig {
        d_steps: doc.count("training", "d_steps", 20)?,
        eta: doc.real("training", "eta", 0.05)?,
        outer_iters: doc.count("training", "outer_iters", 500)?,
        adam,
        penalty: penalty(doc)?,
        net,
        k_probes: doc.count("training", "k_probes", 64)?,
        batch_size: doc.typed("training", "batch_size", "a positive integer")?,
        ..defaults
    };
    Ok(cfg)
}

/// Parses and validates `text`. Relative image paths resolve against `base`.
pub fn parse_config(text: &str, seed: u64, name: &str, base: &Path) -> Result<RunManifest> {
    let doc = Document::parse(text)?;
    let scenario_config = scenario_config(&doc, base)?;
    let objective = doc.required_str("objective", "name")?.to_string();
    let objective_param = doc.typed("objective", "param", "a number")?;
    let mut train = training(&doc)?;
    train.objective = builtin_objective(&objective, objective_param).map_err(core("objective.name"))?;
    train.validate().map_err(core("training"))?;

    let output = OutputConfig {
        name: doc.str("output", "name").unwrap_or(name).to_string(),
        snapshot_every: doc.count("output", "snapshot_every", 100)?,
        trajectory_every: at_least_one("output.trajectory_every", doc.count("output", "trajectory_every", 1)?)?,
        grid: doc.count("output", "grid", 41)?.max(2),
    };
    let fields = FieldConfig {
        specs: doc
            .list("output", "closed_form", "a list of js, least_squares, fisher")?
            .unwrap_or_else(|| vec!["js".into(), "least_squares".into(), "fisher".into()]),
        lo: doc.real("output", "field_lo", -5.0)?,
        hi: doc.real("output", "field_hi", 5.0)?,
        n: doc.count("output", "field_points", 201)?.max(2),
    };
    if let Some(bad) = fields.specs.iter().find(|s| !["js", "least_squares", "fisher"].contains(&s.as_str())) {
        return Err(ConfigError::Invalid(format!(
            "output.closed_form: unknown field `{bad}`; valid options: js, least_squares, fisher"
        )));
    }
    if !(fields.lo < fields.hi) {
        return Err(ConfigError::Invalid("output.field_lo must be below output.field_hi".into()));
    }
    let surface = SurfaceConfig {
        activations: doc.activation_list("surface", "activations")?.unwrap_or(vec![train.net.activation]),
        lrs: doc.list("surface", "lrs", "a comma-separated list of numbers")?.unwrap_or(vec![train.adam.lr]),
        depths: doc.list("surface", "depths", "a comma-separated list of integers")?.unwrap_or(vec![train.net.hidden.len()]),
        width: at_least_one("surface.width", doc.count("surface", "width", 32)?)?,
        steps: doc.count("surface", "steps", 500)?,
        resolution: doc.count("surface", "resolution", 41)?.max(2),
        pad: doc.real("surface", "pad", 0.5)?,
    };
    if surface.activations.is_empty() || surface.lrs.is_empty() || surface.depths.is_empty() {
        return Err(ConfigError::Invalid("surface grid axes must be non-empty".into()));
    }
    for lr in &surface.lrs {
        positive("surface.lrs", *lr)?;
    }
    let verify = VerifyConfig {
        discriminator_steps: doc.count("verify", "discriminator_steps", 6000)?,
        bounding_tol: positive("verify.bounding_tol", doc.real("verify", "bounding_tol", lipflow::verify::DEFAULT_BOUNDING_TOL)?)?,
        gradient_tol: positive("verify.gradient_tol", doc.real("verify", "gradient_tol", lipflow::verify::DEFAULT_GRADIENT_TOL)?)?,
        pairs: at_least_one("verify.pairs", doc.count("verify", "pairs", 5)?)?,
        interp_steps: at_least_one("verify.interp_steps", doc.count("verify", "interp_steps", 9)?)?,
        nash_tol_w: positive("verify.nash_tol_w", doc.real("verify", "nash_tol_w", 0.05)?)?,
        nash_tol_k: positive("verify.nash_tol_k", doc.real("verify", "nash_tol_k", 0.1)?)?,
    };

    let unused = doc.unused();
    if !unused.is_empty() {
        return Err(ConfigError::UnknownKeys(unused));
    }
    let scenario = scenario_config.build(seed)?;
    let hash = manifest_hash(&doc.canonical(), seed);
    Ok(RunManifest {
        scenario_config,
        scenario,
        objective,
        objective_param,
        train,
        output,
        fields,
        surface,
        verify,
        seed,
        hash,
    })
}

/// Reads and parses a config file; the output name defaults to its stem.
pub fn load_config(path: &Path, seed: u64) -> std::result::Result<RunManifest, crate::CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, seed, stem, base).map_err(|source| crate::CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

pub fn manifest_hash(canonical: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    h.update(format!("seed={seed}\n").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[scenario]
preset = parallel_lines

[objective]
name = linear

[penalty]
kind = maxgp
";

    fn parse(text: &str) -> Result<RunManifest> {
        parse_config(text, 7, "run", Path::new("."))
    }

    #[test]
    fn minimal_config_uses_preset_defaults() {
        let m = parse(MINIMAL).unwrap();
        assert_eq!(m.scenario_config, ScenarioConfig::ParallelLines { count: 10, gap: 1.0 });
        assert_eq!(m.objective, "linear");
        let p = m.train.penalty.unwrap();
        assert_eq!(p.kind, PenaltyKind::Maxgp);
        assert_eq!(p.smax_capacity, 32);
        assert_eq!(m.train.net.hidden, vec![32, 32]);
        assert_eq!(m.output.name, "run");
        assert_eq!(m.hash.len(), 64);
    }

    #[test]
    fn negative_lambda_is_rejected() {
        let text = format!("{MINIMAL}lambda = -1\n");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.to_string(), "penalty.lambda must be positive");
    }

    #[test]
    fn unknown_objective_names_valid_options() {
        let err = parse(&MINIMAL.replace("linear", "wasserstein")).unwrap_err().to_string();
        assert!(err.contains("objective.name") && err.contains("wasserstein"), "{err}");
        for name in lipflow::objectives::BUILTIN_NAMES {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = format!("{MINIMAL}colour = red\n[training]\nd_stpes = 3\n");
        let err = parse(&text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKeys(vec!["penalty.colour (line 9)".into(), "training.d_stpes (line 11)".into()])
        );
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let cases = [
            ("preset = x\n", 1, "before any section"),
            ("[scenario]\npreset\n", 2, "key = value"),
            ("[scenario]\npreset = a\npreset = b\n", 3, "duplicate"),
            ("[scenery]\n", 1, "unknown section"),
            ("[scenario\n", 1, "unterminated"),
        ];
        for (text, line, needle) in cases {
            match Document::parse(text) {
                Err(ConfigError::Syntax { line: l, msg }) => {
                    assert_eq!(l, line, "{text}");
                    assert!(msg.contains(needle), "{msg}");
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn type_errors_name_the_key() {
        let text = format!("{MINIMAL}[training]\nd_steps = many\n");
        let err = parse(&text).unwrap_err().to_string();
        assert_eq!(err, "training.d_steps (line 10): expected a non-negative integer, got `many`");
        let err = parse(&MINIMAL.replace("parallel_lines", "moons")).unwrap_err().to_string();
        assert!(err.contains("scenario.preset") && err.contains("random_clouds"), "{err}");
    }

    #[test]
    fn missing_required_keys() {
        let err = parse("[objective]\nname = linear\n").unwrap_err();
        assert_eq!(err, ConfigError::Missing("scenario.preset".into()));
        let err = parse("[scenario]\npreset = two_delta\n").unwrap_err();
        assert_eq!(err, ConfigError::Missing("objective.name".into()));
    }

    #[test]
    fn full_config_round_trips_into_train_config() {
        let text = "\
[scenario]
preset = random_clouds   # trailing comment
n_real = 5
n_fake = 6
separation = 4
[objective]
name = logistic_plus_linear
param = 0.05
[penalty]
kind = ksq
lambda = 2.5
probes = 17
[training]
hidden = 8,8,8
activation = leaky_relu(0.3)
lr = 0.01
batch_size = 4
[surface]
activations = relu, leaky_relu(0.1), swish
lrs = 1e-3, 1e-2
depths = 0, 2
";
        let m = parse(text).unwrap();
        let (r, f) = m.scenario.clouds().unwrap();
        assert_eq!((r.len(), f.len()), (5, 6));
        assert_eq!(m.train.objective.name, "logistic_plus_linear(0.05)");
        let p = m.train.penalty.unwrap();
        assert_eq!((p.kind, p.lambda, p.probes), (PenaltyKind::Ksq, 2.5, 17));
        assert_eq!(m.train.net.hidden, vec![8, 8, 8]);
        assert_eq!(m.train.net.activation, Activation::LeakyRelu { slope: 0.3 });
        assert_eq!(m.train.batch_size, Some(4));
        assert_eq!(m.surface.activations.len(), 3);
        assert_eq!(m.surface.activations[1], Activation::LeakyRelu { slope: 0.1 });
        assert_eq!(m.surface.depths, vec![0, 2]);
    }

    #[test]
    fn hash_ignores_layout_but_not_values_or_seed() {
        let a = parse(MINIMAL).unwrap().hash;
        let reordered = "[penalty]\nkind = maxgp # c\n\n[objective]\nname = linear\n[scenario]\npreset = parallel_lines\n";
        assert_eq!(parse(reordered).unwrap().hash, a);
        assert_ne!(parse(&MINIMAL.replace("maxgp", "gp")).unwrap().hash, a);
        assert_ne!(parse_config(MINIMAL, 8, "run", Path::new(".")).unwrap().hash, a);
    }

    #[test]
    fn random_clouds_depend_on_seed_only() {
        let text = MINIMAL.replace("parallel_lines", "random_clouds");
        let a = parse_config(&text, 1, "a", Path::new(".")).unwrap();
        let b = parse_config(&text, 1, "b", Path::new(".")).unwrap();
        let c = parse_config(&text, 2, "c", Path::new(".")).unwrap();
        assert_eq!(a.scenario, b.scenario);
        assert_ne!(a.scenario, c.scenario);
    }

    #[test]
    fn none_penalty_and_no_hidden_layers() {
        let m = parse("[scenario]\npreset = two_delta\n[objective]\nname = linear\n[penalty]\nkind = none\n[training]\nhidden = none\n").unwrap();
        assert!(m.train.penalty.is_none());
        assert!(m.train.net.hidden.is_empty());
    }
}
