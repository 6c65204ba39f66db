//! Project configuration: one JSON document accepted by every command.

use crate::error::ConfigError;
use crate::sysid::{CornerPatternConfig, ExtrusionPatternConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardSpec {
    /// Inner corner grid dimensions.
    pub rows: usize,
    pub cols: usize,
    pub square_size_mm: f64,
}

impl Default for CheckerboardSpec {
    fn default() -> Self {
        CheckerboardSpec { rows: 5, cols: 7, square_size_mm: 10.0 }
    }
}

/// Per-region segmentation method flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BlurFlag {
    On,
    Off,
    #[default]
    Auto,
}

/// Region of interest in rectified coordinates (mm, origin at checkerboard
/// inner corner (0,0)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub name: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    #[serde(default)]
    pub blurry: BlurFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectConfig {
    /// Target printing speed (mm/min).
    pub target_speed: f64,
    /// Working extrusion ratio range.
    pub xi_low: f64,
    pub xi_high: f64,
    /// Nominal bead width (mm).
    pub nominal_width: f64,
    /// Spatial discretization step (mm).
    pub delta_s: f64,
    /// Control bounds for the tracking solver; `None` falls back to the
    /// identified ratio range.
    pub control_bounds: Option<(f64, f64)>,
    /// Interior turn angle treated as a corner (degrees).
    pub corner_angle_threshold: f64,
    pub checkerboard: CheckerboardSpec,
    /// Rectified sampling density (px per mm).
    pub px_per_mm: f64,
    /// Threshold multiplier for K-means segmentation.
    pub threshold_n: f64,
    pub rois: Vec<RoiSpec>,
    pub extrusion_pattern: ExtrusionPatternConfig,
    pub corner_pattern: CornerPatternConfig,
    pub seed: u64,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            target_speed: 3600.0,
            xi_low: 0.03,
            xi_high: 0.05,
            nominal_width: 0.68,
            delta_s: 0.1,
            control_bounds: Some((-2.0, 2.0)),
            corner_angle_threshold: 30.0,
            checkerboard: CheckerboardSpec::default(),
            px_per_mm: 20.0,
            threshold_n: 2.0,
            rois: Vec::new(),
            extrusion_pattern: ExtrusionPatternConfig::default(),
            corner_pattern: CornerPatternConfig::default(),
            seed: 0,
        }
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let config: ProjectConfig = serde_json::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.display().to_string(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("target_speed", self.target_speed),
            ("nominal_width", self.nominal_width),
            ("delta_s", self.delta_s),
            ("px_per_mm", self.px_per_mm),
            ("checkerboard.square_size_mm", self.checkerboard.square_size_mm),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.xi_low < self.xi_high) {
            return Err(ConfigError::Invalid(format!(
                "xi_low {} must be below xi_high {}",
                self.xi_low, self.xi_high
            )));
        }
        if let Some((lo, hi)) = self.control_bounds {
            if !(lo < hi) {
                return Err(ConfigError::Invalid(format!(
                    "control_bounds must be ordered, got ({lo}, {hi})"
                )));
            }
        }
        if !(self.corner_angle_threshold > 0.0 && self.corner_angle_threshold < 180.0) {
            return Err(ConfigError::Invalid(format!(
                "corner_angle_threshold must be in (0, 180), got {}",
                self.corner_angle_threshold
            )));
        }
        if self.checkerboard.rows < 2 || self.checkerboard.cols < 2 {
            return Err(ConfigError::Invalid(
                "checkerboard needs at least a 2x2 inner corner grid".to_string(),
            ));
        }
        for roi in &self.rois {
            if !(roi.x0 < roi.x1 && roi.y0 < roi.y1) {
                return Err(ConfigError::Invalid(format!("roi '{}' has an empty extent", roi.name)));
            }
        }
        Ok(())
    }

    /// Target speed in mm/s.
    pub fn target_speed_mm_s(&self) -> f64 {
        self.target_speed / 60.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = ProjectConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ProjectConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ProjectConfig = serde_json::from_str(r#"{"target_speed": 900.0}"#).unwrap();
        assert_eq!(cfg.target_speed, 900.0);
        assert_eq!(cfg.xi_low, 0.03);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg: ProjectConfig =
            serde_json::from_str(r#"{"xi_low": 0.05, "xi_high": 0.03}"#).unwrap();
        assert!(cfg.validate().is_err());
    }
}
