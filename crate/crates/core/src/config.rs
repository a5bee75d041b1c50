//! Run configuration as flat `key=value` lines.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments
//! override earlier ones, so command-line overrides can simply be applied
//! after the file.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::ConditioningKind;
use crate::diffusion::{AttentionSettings, EngineConfig, SamplerKind, SyncMode};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictorKind {
    ToyGaussian,
    ToyPattern,
    TinyAttention,
    Bridge(String),
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toy-gaussian" => Ok(Self::ToyGaussian),
            "toy-pattern" => Ok(Self::ToyPattern),
            "tiny-attention" => Ok(Self::TinyAttention),
            _ => match s.strip_prefix("bridge(").and_then(|r| r.strip_suffix(')')) {
                Some(addr) if !addr.is_empty() => Ok(Self::Bridge(addr.to_string())),
                _ => Err(format!(
                    "unknown predictor {s:?} (expected toy-gaussian, toy-pattern, tiny-attention or bridge(<address>))"
                )),
            },
        }
    }
}

impl std::fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ToyGaussian => f.write_str("toy-gaussian"),
            Self::ToyPattern => f.write_str("toy-pattern"),
            Self::TinyAttention => f.write_str("tiny-attention"),
            Self::Bridge(a) => write!(f, "bridge({a})"),
        }
    }
}

/// A built-in fixture (`fixture:cube`) or an OBJ file path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshSource {
    Fixture(String),
    Path(PathBuf),
}

pub const FIXTURES: &[&str] = &["cube", "quad", "back-to-back", "icosphere"];

impl FromStr for MeshSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err("empty mesh".into());
        }
        match s.strip_prefix("fixture:") {
            Some(name) if FIXTURES.contains(&name) => Ok(Self::Fixture(name.to_string())),
            Some(name) => Err(format!("unknown fixture {name:?} (expected one of {FIXTURES:?})")),
            None => Ok(Self::Path(PathBuf::from(s))),
        }
    }
}

impl std::fmt::Display for MeshSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixture(n) => write!(f, "fixture:{n}"),
            Self::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub texture_resolution: usize,
    pub view_resolution: usize,
    pub steps: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub final_alpha: f64,
    pub gamma: f64,
    /// `None`: last 20% of the steps.
    pub t_switch: Option<usize>,
    pub sar: bool,
    pub beta: f64,
    /// `None`: half the steps.
    pub t_ref: Option<usize>,
    pub reference_view: usize,
    pub seed: u64,
    pub mode: SyncMode,
    pub sampler: SamplerKind,
    pub predictor: PredictorKind,
    /// `None`: 3 for the toy predictors, 4 for the bridge.
    pub channels: Option<usize>,
    pub equatorial_views: usize,
    pub elevated_views: usize,
    pub elevation_deg: f64,
    /// Data spread of the toy predictors.
    pub spread: f64,
    /// Per-view random colour offsets (std).
    pub perturbation: f64,
    /// Front views pushed up, back views down by this much.
    pub front_back_bias: f64,
    pub weights_seed: u64,
    pub prompt: String,
    pub conditioning: ConditioningKind,
    pub snapshots: bool,
    /// Report check: final D must stay below this.
    pub d0_threshold: Option<f64>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshSource::Fixture("cube".into()),
            texture_resolution: 512,
            view_resolution: 96,
            steps: 50,
            alpha_start: 1.0,
            alpha_end: 5.0,
            final_alpha: 6.0,
            gamma: 1e-8,
            t_switch: None,
            sar: true,
            beta: 1.0,
            t_ref: None,
            reference_view: 0,
            seed: 0,
            mode: SyncMode::Mvd,
            sampler: SamplerKind::Deterministic,
            predictor: PredictorKind::ToyPattern,
            channels: None,
            equatorial_views: 8,
            elevated_views: 2,
            elevation_deg: 45.0,
            spread: 0.5,
            perturbation: 0.0,
            front_back_bias: 0.0,
            weights_seed: 0,
            prompt: "a textured object".into(),
            conditioning: ConditioningKind::Depth,
            snapshots: false,
            d0_threshold: None,
            output: PathBuf::from("mvtex-out"),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        msg: e.to_string(),
    })
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    if value == "auto" || value == "none" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.into(),
            msg: format!("expected a boolean, got {value:?}"),
        }),
    }
}

fn opt_str<T: ToString>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or(none.to_string(), ToString::to_string)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies `key=value` lines on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let s = value;
        match key {
            "mesh" => self.mesh = parse_value(key, s)?,
            "texture_resolution" => self.texture_resolution = parse_value(key, s)?,
            "view_resolution" => self.view_resolution = parse_value(key, s)?,
            "steps" => self.steps = parse_value(key, s)?,
            "alpha_start" => self.alpha_start = parse_value(key, s)?,
            "alpha_end" => self.alpha_end = parse_value(key, s)?,
            "final_alpha" => self.final_alpha = parse_value(key, s)?,
            "gamma" => self.gamma = parse_value(key, s)?,
            "t_switch" => self.t_switch = parse_optional(key, s)?,
            "sar" => self.sar = parse_bool(key, s)?,
            "beta" => self.beta = parse_value(key, s)?,
            "t_ref" => self.t_ref = parse_optional(key, s)?,
            "reference_view" => self.reference_view = parse_value(key, s)?,
            "seed" => self.seed = parse_value(key, s)?,
            "mode" => {
                self.mode = match s {
                    "mvd" => SyncMode::Mvd,
                    "async-baseline" => SyncMode::AsyncBaseline,
                    _ => {
                        return Err(ConfigError::Value {
                            key: key.into(),
                            msg: format!("expected mvd or async-baseline, got {s:?}"),
                        })
                    }
                }
            }
            "sampler" => {
                self.sampler = match s {
                    "deterministic" => SamplerKind::Deterministic,
                    "ancestral" => SamplerKind::Ancestral,
                    _ => {
                        return Err(ConfigError::Value {
                            key: key.into(),
                            msg: format!("expected deterministic or ancestral, got {s:?}"),
                        })
                    }
                }
            }
            "predictor" => self.predictor = parse_value(key, s)?,
            "channels" => self.channels = parse_optional(key, s)?,
            "equatorial_views" => self.equatorial_views = parse_value(key, s)?,
            "elevated_views" => self.elevated_views = parse_value(key, s)?,
            "elevation_deg" => self.elevation_deg = parse_value(key, s)?,
            "spread" => self.spread = parse_value(key, s)?,
            "perturbation" => self.perturbation = parse_value(key, s)?,
            "front_back_bias" => self.front_back_bias = parse_value(key, s)?,
            "weights_seed" => self.weights_seed = parse_value(key, s)?,
            "prompt" => self.prompt = s.to_string(),
            "conditioning" => self.conditioning = parse_value(key, s)?,
            "snapshots" => self.snapshots = parse_bool(key, s)?,
            "d0_threshold" => self.d0_threshold = parse_optional(key, s)?,
            "output" => self.output = PathBuf::from(s),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Serializes every key; `parse(to_kv())` gives back the same config.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        line("mesh", self.mesh.to_string());
        line("texture_resolution", self.texture_resolution.to_string());
        line("view_resolution", self.view_resolution.to_string());
        line("steps", self.steps.to_string());
        line("alpha_start", self.alpha_start.to_string());
        line("alpha_end", self.alpha_end.to_string());
        line("final_alpha", self.final_alpha.to_string());
        line("gamma", self.gamma.to_string());
        line("t_switch", opt_str(&self.t_switch, "auto"));
        line("sar", self.sar.to_string());
        line("beta", self.beta.to_string());
        line("t_ref", opt_str(&self.t_ref, "auto"));
        line("reference_view", self.reference_view.to_string());
        line("seed", self.seed.to_string());
        line(
            "mode",
            match self.mode {
                SyncMode::Mvd => "mvd",
                SyncMode::AsyncBaseline => "async-baseline",
            }
            .into(),
        );
        line(
            "sampler",
            match self.sampler {
                SamplerKind::Deterministic => "deterministic",
                SamplerKind::Ancestral => "ancestral",
            }
            .into(),
        );
        line("predictor", self.predictor.to_string());
        line("channels", opt_str(&self.channels, "auto"));
        line("equatorial_views", self.equatorial_views.to_string());
        line("elevated_views", self.elevated_views.to_string());
        line("elevation_deg", self.elevation_deg.to_string());
        line("spread", self.spread.to_string());
        line("perturbation", self.perturbation.to_string());
        line("front_back_bias", self.front_back_bias.to_string());
        line("weights_seed", self.weights_seed.to_string());
        line("prompt", self.prompt.clone());
        line("conditioning", self.conditioning.as_str().into());
        line("snapshots", self.snapshots.to_string());
        line("d0_threshold", opt_str(&self.d0_threshold, "none"));
        line("output", self.output.display().to_string());
        out
    }

    pub fn channels(&self) -> usize {
        self.channels.unwrap_or(match self.predictor {
            PredictorKind::Bridge(_) => 4,
            _ => 3,
        })
    }

    pub fn t_switch(&self) -> usize {
        self.t_switch.unwrap_or((self.steps as f64 * 0.2).round() as usize)
    }

    pub fn t_ref(&self) -> usize {
        self.t_ref.unwrap_or(self.steps / 2)
    }

    pub fn view_count(&self) -> usize {
        self.equatorial_views + self.elevated_views
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.texture_resolution == 0 || self.view_resolution == 0 {
            return bad("resolutions must be positive".into());
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.t_switch() > self.steps {
            return bad(format!("t_switch {} outside [0, {}]", self.t_switch(), self.steps));
        }
        if self.view_count() == 0 {
            return bad("the camera rig needs at least one view".into());
        }
        if self.reference_view >= self.view_count() {
            return bad(format!("reference_view {} out of range", self.reference_view));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        if !(self.spread >= 0.0 && self.perturbation >= 0.0) {
            return bad("spread and perturbation must be >= 0".into());
        }
        if self.predictor == PredictorKind::TinyAttention && !self.view_resolution.is_multiple_of(8) {
            return bad("tiny-attention needs a view resolution divisible by 8".into());
        }
        if self.channels() == 0 {
            return bad("channels must be positive".into());
        }
        self.engine_config()
            .validate(self.view_count())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            steps: self.steps,
            sampler: self.sampler,
            channels: self.channels(),
            texture_width: self.texture_resolution,
            texture_height: self.texture_resolution,
            alpha_start: self.alpha_start,
            alpha_end: self.alpha_end,
            final_alpha: self.final_alpha,
            gamma: self.gamma,
            t_switch: self.t_switch(),
            mode: self.mode,
            seed: self.seed,
            attention: AttentionSettings {
                reuse: self.sar,
                beta: self.beta,
                t_ref: self.t_ref(),
                reference_view: self.reference_view,
            },
            snapshots: self.snapshots,
        }
    }
}
