//! YAML run configuration.
//!
//! ```yaml
//! dataset:
//!   path: recordings/run1          # relative paths resolve against the config file
//! output: out
//! log_level: info
//! sensors:
//!   lidar_left:
//!     extrinsic: { translation: [0.5, 0.4, 1.6], rpy_deg: [0, 0, 0] }
//!   camera_ir:
//!     extrinsic: { translation: [1.0, 0.0, 1.4], rpy_deg: [-90, 0, -90] }
//!     intrinsics: { fx: 400, fy: 400, cx: 320, cy: 256, width: 640, height: 512 }
//! aggregation: { batch_count: 16 }
//! stages: { depth: false }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::AggregationConfig;
use crate::calibration::{Calibrations, SensorCalibration, TransformSpec};
use crate::dataset::{SensorKind, Timestamp};
use crate::fail_check::FailCheckConfig;
use crate::fusion::FusionConfig;
use crate::geometry::CameraIntrinsics;
use crate::positioning::PositioningConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.into() }
    }
}

/// Independently switchable processing sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    FailCheck,
    Positioning,
    Aggregation,
    Fusion,
    IrTransfer,
    Depth,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::FailCheck, Stage::Positioning, Stage::Aggregation, Stage::Fusion, Stage::IrTransfer, Stage::Depth];

    pub fn name(self) -> &'static str {
        match self {
            Stage::FailCheck => "fail_check",
            Stage::Positioning => "positioning",
            Stage::Aggregation => "aggregation",
            Stage::Fusion => "fusion",
            Stage::IrTransfer => "ir_transfer",
            Stage::Depth => "depth",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
            format!("unknown stage `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields, default)]
pub struct StageFlags {
    pub fail_check: bool,
    pub positioning: bool,
    pub aggregation: bool,
    pub fusion: bool,
    pub ir_transfer: bool,
    pub depth: bool,
}

impl Default for StageFlags {
    fn default() -> Self {
        StageFlags { fail_check: true, positioning: true, aggregation: true, fusion: true, ir_transfer: true, depth: true }
    }
}

impl StageFlags {
    pub fn enabled(&self, s: Stage) -> bool {
        match s {
            Stage::FailCheck => self.fail_check,
            Stage::Positioning => self.positioning,
            Stage::Aggregation => self.aggregation,
            Stage::Fusion => self.fusion,
            Stage::IrTransfer => self.ir_transfer,
            Stage::Depth => self.depth,
        }
    }

    pub fn disable(&mut self, s: Stage) {
        let flag = match s {
            Stage::FailCheck => &mut self.fail_check,
            Stage::Positioning => &mut self.positioning,
            Stage::Aggregation => &mut self.aggregation,
            Stage::Fusion => &mut self.fusion,
            Stage::IrTransfer => &mut self.ir_transfer,
            Stage::Depth => &mut self.depth,
        };
        *flag = false;
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    #[serde(default)]
    pub extrinsic: TransformSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<CameraIntrinsics>,
    /// Accepted for compatibility with calibration exports; only all-zero values are
    /// supported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<Vec<f64>>,
}

/// The file as written; [`load_config`] turns it into a [`PipelineConfig`].
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_level: Option<String>,
    #[serde(default)]
    pub sensors: std::collections::BTreeMap<String, SensorSection>,
    #[serde(default)]
    pub positioning: PositioningConfig,
    #[serde(default)]
    pub aggregation: AggregationConfig,
    #[serde(default)]
    pub fail_check: FailCheckConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub stages: StageFlags,
    /// Seconds between aggregated-cloud PLY snapshots; absent disables snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset_path: PathBuf,
    pub output_dir: PathBuf,
    pub sensors: Calibrations,
    pub positioning: PositioningConfig,
    pub aggregation: AggregationConfig,
    pub fail_check: FailCheckConfig,
    pub fusion: FusionConfig,
    pub log_level: String,
    pub stages: StageFlags,
    pub snapshot_every: Option<f64>,
    /// Stop before the first packet later than this.
    pub until: Option<Timestamp>,
}

pub const LOG_LEVELS: [&str; 6] = ["off", "error", "warn", "info", "debug", "trace"];

impl PipelineConfig {
    /// Config with defaults everywhere and no sensors.
    pub fn with_paths(dataset_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            dataset_path: dataset_path.into(),
            output_dir: output_dir.into(),
            sensors: Calibrations::new(),
            positioning: PositioningConfig::default(),
            aggregation: AggregationConfig::default(),
            fail_check: FailCheckConfig::default(),
            fusion: FusionConfig::default(),
            log_level: "info".into(),
            stages: StageFlags::default(),
            snapshot_every: None,
            until: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let section = |r: Result<(), String>| {
            r.map_err(|m| {
                let field = m.split_whitespace().next().unwrap_or("").to_string();
                ConfigError::Invalid { field, message: m }
            })
        };
        section(self.positioning.validate())?;
        section(self.aggregation.validate())?;
        section(self.fail_check.validate())?;
        section(self.fusion.validate())?;
        if !LOG_LEVELS.contains(&self.log_level.as_str()) {
            return Err(ConfigError::invalid("log_level", format!("expected one of {}", LOG_LEVELS.join(", "))));
        }
        if let Some(s) = self.snapshot_every {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ConfigError::invalid("snapshot_every", "must be positive"));
            }
        }
        for (label, cal) in &self.sensors {
            let kind = SensorKind::from_label(label)
                .ok_or_else(|| ConfigError::invalid(format!("sensors.{label}"), "unknown sensor label"))?;
            if kind.is_camera() && cal.intrinsics.is_none() {
                return Err(ConfigError::invalid(format!("sensors.{label}.intrinsics"), "cameras need intrinsics"));
            }
        }
        Ok(())
    }
}

fn parse_error(e: serde_yaml::Error) -> ConfigError {
    ConfigError::Parse { line: e.location().map(|l| l.line()), message: e.to_string() }
}

/// Parses and validates YAML text. Relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<PipelineConfig, ConfigError> {
    let file: ConfigFile = if text.trim().is_empty() {
        ConfigFile::default()
    } else {
        serde_yaml::from_str(text).map_err(parse_error)?
    };
    let dataset = file
        .dataset
        .path
        .ok_or_else(|| ConfigError::invalid("dataset.path", "required field is missing"))?;
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

    let mut sensors = Calibrations::new();
    for (label, s) in file.sensors {
        let extrinsic = s
            .extrinsic
            .to_transform()
            .map_err(|m| ConfigError::invalid(format!("sensors.{label}.extrinsic"), m))?;
        if let Some(d) = &s.distortion {
            if d.iter().any(|c| *c != 0.0) {
                return Err(ConfigError::invalid(
                    format!("sensors.{label}.distortion"),
                    "only undistorted (all-zero) coefficients are supported",
                ));
            }
        }
        sensors.insert(label, SensorCalibration { extrinsic, intrinsics: s.intrinsics });
    }

    let cfg = PipelineConfig {
        dataset_path: resolve(dataset),
        output_dir: resolve(file.output.unwrap_or_else(|| PathBuf::from("out"))),
        sensors,
        positioning: file.positioning,
        aggregation: file.aggregation,
        fail_check: file.fail_check,
        fusion: file.fusion,
        log_level: file.log_level.unwrap_or_else(|| "info".into()),
        stages: file.stages,
        snapshot_every: file.snapshot_every,
        until: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}
