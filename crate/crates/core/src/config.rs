//! Experiment configuration: one tagged JSON document per run, with unknown
//! fields rejected. The canonical serialized form (sorted keys) feeds the
//! manifest's config hash.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpp::PassageSpec;
use crate::shape::EstimatorMode;

fn default_margin() -> f64 {
    crate::params::DEFAULT_MARGIN
}

fn default_directions() -> usize {
    16
}

fn default_n_seeds() -> usize {
    40
}

fn default_mc_samples() -> usize {
    4096
}

fn default_n_ref() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PppConfig {
    pub lambda: f64,
    #[serde(rename = "box")]
    pub half_width: f64,
    #[serde(default = "two")]
    pub d: usize,
    pub seed: u64,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RggConfig {
    pub lambda: f64,
    pub r: f64,
    #[serde(rename = "box")]
    pub half_width: f64,
    #[serde(default = "two")]
    pub d: usize,
    pub seed: u64,
    #[serde(default)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FppConfig {
    pub lambda: f64,
    pub r: f64,
    #[serde(default = "two")]
    pub d: usize,
    #[serde(rename = "box")]
    pub half_width: f64,
    pub passage: PassageSpec,
    pub seed: u64,
    /// Spatial point whose nearest giant vertex becomes the source.
    pub source: Vec<f64>,
    /// Optional reached-set snapshot time; enables SVG output in 2-d.
    #[serde(default)]
    pub svg_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeTask {
    Profile,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    Annealed,
    Quenched,
}

impl From<ModeConfig> for EstimatorMode {
    fn from(m: ModeConfig) -> EstimatorMode {
        match m {
            ModeConfig::Annealed => EstimatorMode::Annealed,
            ModeConfig::Quenched => EstimatorMode::Quenched,
        }
    }
}

fn default_mode() -> ModeConfig {
    ModeConfig::Annealed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeConfig {
    pub task: ShapeTask,
    pub lambda: f64,
    pub r: f64,
    #[serde(default = "two")]
    pub d: usize,
    #[serde(rename = "box")]
    pub half_width: f64,
    pub passage: PassageSpec,
    pub seed: u64,
    #[serde(default = "default_directions")]
    pub directions: usize,
    pub s_list: Vec<f64>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_mode")]
    pub mode: ModeConfig,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Times at which the shape error is evaluated (error task).
    #[serde(default)]
    pub t_list: Vec<f64>,
    /// Probe pitch for the error task; defaults to r / 4.
    #[serde(default)]
    pub pitch: Option<f64>,
    /// Optional SVG snapshot of the reached set at the last t (error task).
    #[serde(default)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercConfig {
    pub lambda: f64,
    pub r: f64,
    #[serde(default = "two")]
    pub d: usize,
    /// Open probabilities to sweep.
    pub p_grid: Vec<f64>,
    /// Box half-widths per sweep point.
    pub half_widths: Vec<f64>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    pub seed: u64,
    /// Emit an SVG snapshot of the open clusters at this open probability.
    #[serde(default)]
    pub svg_p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleTask {
    Kernels,
    Converge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub task: ScaleTask,
    pub lambda: f64,
    pub lambda_i: f64,
    pub r: f64,
    #[serde(default = "two")]
    pub d: usize,
    #[serde(rename = "box")]
    pub half_width: f64,
    pub seed: u64,
    /// Kernels task: the single intensity multiplier.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Converge task: the increasing alpha grid.
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub runs: Option<usize>,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
}

/// One experiment, dispatched by `kind`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Ppp(PppConfig),
    Rgg(RggConfig),
    Fpp(FppConfig),
    Shape(ShapeConfig),
    Perc(PercConfig),
    Scale(ScaleConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Ppp(_) => "ppp",
            ExperimentConfig::Rgg(_) => "rgg",
            ExperimentConfig::Fpp(_) => "fpp",
            ExperimentConfig::Shape(_) => "shape",
            ExperimentConfig::Perc(_) => "perc",
            ExperimentConfig::Scale(_) => "scale",
        }
    }

    pub fn root_seed(&self) -> u64 {
        match self {
            ExperimentConfig::Ppp(c) => c.seed,
            ExperimentConfig::Rgg(c) => c.seed,
            ExperimentConfig::Fpp(c) => c.seed,
            ExperimentConfig::Shape(c) => c.seed,
            ExperimentConfig::Perc(c) => c.seed,
            ExperimentConfig::Scale(c) => c.seed,
        }
    }

    /// Parses `{"kind": "...", ...}`; unknown fields anywhere are rejected.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let kind = obj
            .remove("kind")
            .and_then(|k| k.as_str().map(str::to_owned))
            .ok_or_else(|| Error::Config("config needs a string field 'kind'".into()))?;
        let inner = serde_json::Value::Object(obj.clone());
        let parse = |e: serde_json::Error| Error::Config(format!("{kind}: {e}"));
        Ok(match kind.as_str() {
            "ppp" => ExperimentConfig::Ppp(serde_json::from_value(inner).map_err(parse)?),
            "rgg" => ExperimentConfig::Rgg(serde_json::from_value(inner).map_err(parse)?),
            "fpp" => ExperimentConfig::Fpp(serde_json::from_value(inner).map_err(parse)?),
            "shape" => ExperimentConfig::Shape(serde_json::from_value(inner).map_err(parse)?),
            "perc" => ExperimentConfig::Perc(serde_json::from_value(inner).map_err(parse)?),
            "scale" => ExperimentConfig::Scale(serde_json::from_value(inner).map_err(parse)?),
            other => return Err(Error::Config(format!("unknown experiment kind '{other}'"))),
        })
    }

    /// Canonical JSON: sorted keys, `kind` included. Hash input and
    /// round-trip format.
    pub fn to_canonical_json(&self) -> Result<String> {
        let mut value = match self {
            ExperimentConfig::Ppp(c) => serde_json::to_value(c)?,
            ExperimentConfig::Rgg(c) => serde_json::to_value(c)?,
            ExperimentConfig::Fpp(c) => serde_json::to_value(c)?,
            ExperimentConfig::Shape(c) => serde_json::to_value(c)?,
            ExperimentConfig::Perc(c) => serde_json::to_value(c)?,
            ExperimentConfig::Scale(c) => serde_json::to_value(c)?,
        };
        value
            .as_object_mut()
            .expect("configs serialize to objects")
            .insert("kind".into(), serde_json::Value::String(self.kind().into()));
        Ok(serde_json::to_string(&value)?)
    }
}
