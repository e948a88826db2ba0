//! TOML run configuration shared by the simulator and the replay tool.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::NavError;
use crate::sensors::{LeverArm, LeverArmSet, NoiseConfig};
use crate::sim::MissionConfig;
use crate::ukfm::FilterConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{location}: {message}")]
    Parse { location: Location, message: String },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: NavError },
}

/// File and 1-based line of a parse error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub path: PathBuf,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.path.display(), self.line)
    }
}

/// Lever arms as body-frame `[x, y, z]` offsets in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeverArmConfig {
    pub dvl: [f64; 3],
    pub depth: [f64; 3],
    pub range: [f64; 3],
    pub gps: [f64; 3],
}

impl Default for LeverArmConfig {
    fn default() -> Self {
        let d = LeverArmSet::default();
        let a = |arm: &LeverArm| -> [f64; 3] { (*arm.offset()).into() };
        Self { dvl: a(&d.dvl), depth: a(&d.depth), range: a(&d.range), gps: a(&d.gps) }
    }
}

impl LeverArmConfig {
    pub fn to_set(&self) -> Result<LeverArmSet, NavError> {
        let arm = |v: &[f64; 3]| LeverArm::new(Vector3::from(*v));
        Ok(LeverArmSet { dvl: arm(&self.dvl)?, depth: arm(&self.depth)?, range: arm(&self.range)?, gps: arm(&self.gps)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Noise assumed by the filter, and used by the simulator unless overridden.
    pub noise: NoiseConfig,
    /// Noise actually injected by the simulator. Zero variances give noiseless streams.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulated_noise: Option<NoiseConfig>,
    pub lever_arms: LeverArmConfig,
}

impl SensorConfig {
    pub fn simulation_noise(&self) -> NoiseConfig {
        self.simulated_noise.unwrap_or(self.noise)
    }
}

/// Trace decimation. A rate of zero keeps every IMU epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub estimate_rate_hz: f64,
    pub truth_rate_hz: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { estimate_rate_hz: 10.0, truth_rate_hz: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "mission_without_patterns")]
    pub mission: MissionConfig,
    pub sensors: SensorConfig,
    pub filter: FilterConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), NavError> {
        self.mission.validate()?;
        self.sensors.noise.validate()?;
        self.sensors.lever_arms.to_set()?;
        self.filter.validate()?;
        for (name, rate) in [("estimate_rate_hz", self.output.estimate_rate_hz), ("truth_rate_hz", self.output.truth_rate_hz)] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(NavError::InvalidConfig(format!("output.{name} must be non-negative, got {rate}")));
            }
        }
        Ok(())
    }

    pub fn lever_arms(&self) -> LeverArmSet {
        self.sensors.lever_arms.to_set().expect("validated lever arms")
    }

    /// Parses and validates TOML text. `path` is only used in messages.
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            location: Location { path: path.to_path_buf(), line: e.span().map_or(1, |s| line_of(text, s.start)) },
            message: e.message().to_string(),
        })?;
        config.validate().map_err(|source| ConfigError::Invalid { path: path.to_path_buf(), source })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

fn mission_without_patterns() -> MissionConfig {
    MissionConfig { figure_eight: None, lawnmower: None, ..MissionConfig::default() }
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1
}
