//! Run configuration file.
//!
//! TOML with three optional tables, `[solver]`, `[model]` and `[sim]`. Every
//! field is optional; an empty file yields the default planner parameters.
//! Steering angles are given in degrees and the steering weight per squared
//! degree; both are converted to radians on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abt::SolverConfig;
use crate::merge_model::{IdmParams, ModelConfig, RewardWeights};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub center: f64,
    pub vel: f64,
    pub acc: f64,
    pub steer_per_deg2: f64,
    pub crash: f64,
    pub cst: f64,
    pub end: f64,
    pub dist: f64,
    pub heuristic: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self {
            steer_per_deg2: 10.0,
            ..Self::from_weights(&RewardWeights::default())
        }
    }
}

impl RewardSection {
    fn from_weights(w: &RewardWeights) -> Self {
        Self {
            center: w.center,
            vel: w.vel,
            acc: w.acc,
            steer_per_deg2: w.steer / (180.0 / std::f64::consts::PI).powi(2),
            crash: w.crash,
            cst: w.cst,
            end: w.end,
            dist: w.dist,
            heuristic: w.heuristic,
        }
    }

    fn to_weights(&self) -> RewardWeights {
        RewardWeights {
            center: self.center,
            vel: self.vel,
            acc: self.acc,
            steer: self.steer_per_deg2 * (180.0 / std::f64::consts::PI).powi(2),
            crash: self.crash,
            cst: self.cst,
            end: self.end,
            dist: self.dist,
            heuristic: self.heuristic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub dt: f64,
    pub v_des: f64,
    pub idm: IdmParams,
    pub process_noise: [[f64; 2]; 2],
    pub obs_variance: [f64; 3],
    pub rewards: RewardSection,
    pub ego_width: f64,
    pub ego_length: f64,
    pub accelerations: Vec<f64>,
    pub steering_deg: Vec<f64>,
    pub max_steering_deg: f64,
    pub terminal_band: f64,
    pub velocity_floor: f64,
    pub min_time_left: f64,
    pub midpoint_check: bool,
    pub bounds_half_extents: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            rewards: RewardSection::default(),
            ..Self::from_model(&ModelConfig::default())
        }
    }
}

impl ModelSection {
    pub fn from_model(cfg: &ModelConfig) -> Self {
        Self {
            dt: cfg.dt,
            v_des: cfg.v_des,
            idm: cfg.idm,
            process_noise: cfg.process_noise,
            obs_variance: cfg.obs_variance,
            rewards: RewardSection::from_weights(&cfg.rewards),
            ego_width: cfg.ego_width,
            ego_length: cfg.ego_length,
            accelerations: cfg.accelerations.clone(),
            steering_deg: cfg.steering.iter().map(|r| r.to_degrees()).collect(),
            max_steering_deg: cfg.max_steering.to_degrees(),
            terminal_band: cfg.terminal_band,
            velocity_floor: cfg.velocity_floor,
            min_time_left: cfg.min_time_left,
            midpoint_check: cfg.midpoint_check,
            bounds_half_extents: cfg.bounds_half_extents,
        }
    }

    pub fn to_model(&self) -> ModelConfig {
        ModelConfig {
            dt: self.dt,
            v_des: self.v_des,
            idm: self.idm,
            process_noise: self.process_noise,
            obs_variance: self.obs_variance,
            rewards: self.rewards.to_weights(),
            ego_width: self.ego_width,
            ego_length: self.ego_length,
            accelerations: self.accelerations.clone(),
            steering: self.steering_deg.iter().map(|d| d.to_radians()).collect(),
            max_steering: self.max_steering_deg.to_radians(),
            terminal_band: self.terminal_band,
            velocity_floor: self.velocity_floor,
            min_time_left: self.min_time_left,
            midpoint_check: self.midpoint_check,
            bounds_half_extents: self.bounds_half_extents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// Worker threads of a batch.
    pub jobs: usize,
    pub runs: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            jobs: 1,
            runs: 30,
            seed: 0,
            out_dir: PathBuf::from("out"),
            map: None,
            scenario: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub model: ModelSection,
    pub sim: SimSection,
}

impl RunConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.solver
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.model_config()
            .validate()
            .map_err(ConfigError::Invalid)?;
        if self.sim.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        self.model.to_model()
    }

    /// Effective configuration as TOML.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}
