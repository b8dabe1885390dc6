//! Run configuration: a TOML key-value file merged with command-line flags.
//!
//! ```toml
//! input = "records.jsonl"
//! output = "out"
//! workers = 4
//! z_threshold = 3.0
//! keypoint_angle_deg = 25.0
//! emit_plots = true
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::PipelineError;
use crate::types::{RefinementConfig, COMPLETE_LEN};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Directory receiving `records.jsonl`, `summary.json`, `summary.txt`
    /// and `plots/`.
    pub output: PathBuf,
    pub refinement: RefinementConfig,
    /// When false, normalized predictions are scored as-is.
    pub refine: bool,
    pub target_len: usize,
    pub workers: usize,
    pub seed: u64,
    pub emit_plots: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            refinement: RefinementConfig::default(),
            refine: true,
            target_len: COMPLETE_LEN,
            workers: 1,
            seed: 0,
            emit_plots: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.to_string()));
        if self.input.as_os_str().is_empty() {
            return bad("input path is empty");
        }
        if self.output.as_os_str().is_empty() {
            return bad("output path is empty");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.target_len == 0 {
            return bad("target_len must be at least 1");
        }
        self.refinement
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// Partial settings; every field is optional so a file and the command line
/// can each supply a subset.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub target_len: Option<usize>,
    pub z_threshold: Option<f64>,
    pub min_window: Option<usize>,
    pub max_window: Option<usize>,
    pub poly_order: Option<usize>,
    pub keypoint_angle_deg: Option<f64>,
    pub keypoint_weight: Option<f64>,
    pub emit_plots: Option<bool>,
    pub refine: Option<bool>,
}

impl RunSettings {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Values set in `other` win.
    pub fn overridden_by(self, other: RunSettings) -> RunSettings {
        RunSettings {
            input: other.input.or(self.input),
            output: other.output.or(self.output),
            workers: other.workers.or(self.workers),
            seed: other.seed.or(self.seed),
            target_len: other.target_len.or(self.target_len),
            z_threshold: other.z_threshold.or(self.z_threshold),
            min_window: other.min_window.or(self.min_window),
            max_window: other.max_window.or(self.max_window),
            poly_order: other.poly_order.or(self.poly_order),
            keypoint_angle_deg: other.keypoint_angle_deg.or(self.keypoint_angle_deg),
            keypoint_weight: other.keypoint_weight.or(self.keypoint_weight),
            emit_plots: other.emit_plots.or(self.emit_plots),
            refine: other.refine.or(self.refine),
        }
    }

    pub fn refinement(&self) -> RefinementConfig {
        let d = RefinementConfig::default();
        RefinementConfig {
            z_threshold: self.z_threshold.unwrap_or(d.z_threshold),
            min_window: self.min_window.unwrap_or(d.min_window),
            max_window: self.max_window.unwrap_or(d.max_window),
            poly_order: self.poly_order.unwrap_or(d.poly_order),
            keypoint_angle_deg: self.keypoint_angle_deg.unwrap_or(d.keypoint_angle_deg),
            keypoint_weight: self.keypoint_weight.unwrap_or(d.keypoint_weight),
        }
    }

    pub fn into_run_config(self) -> Result<RunConfig, PipelineError> {
        let input = self
            .input
            .clone()
            .ok_or_else(|| PipelineError::Config("missing input path".into()))?;
        let output = self
            .output
            .clone()
            .ok_or_else(|| PipelineError::Config("missing output path".into()))?;
        let mut cfg = RunConfig::new(input, output);
        cfg.refinement = self.refinement();
        cfg.refine = self.refine.unwrap_or(true);
        cfg.target_len = self.target_len.unwrap_or(COMPLETE_LEN);
        cfg.workers = self.workers.unwrap_or(1);
        cfg.seed = self.seed.unwrap_or(0);
        cfg.emit_plots = self.emit_plots.unwrap_or(false);
        cfg.validate()?;
        Ok(cfg)
    }
}
