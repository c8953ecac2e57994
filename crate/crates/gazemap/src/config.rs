//! Run configuration file. Every key is optional and defaults to the library
//! default; unknown keys are rejected. The resolved configuration is echoed
//! into every trial report.

use std::path::{Path, PathBuf};

use gazemap_core::alignment::DEFAULT_MAX_STALENESS_US;
use gazemap_core::fixation::{HitConfig, DEFAULT_DISPERSION_PX, DEFAULT_MIN_CONSECUTIVE, DEFAULT_MIN_DURATION_MS};
use gazemap_core::mask::DEFAULT_SCORE_THRESHOLD;
use gazemap_core::{AlignmentPolicy, DurationConvention, IdtConfig, MappingConfig, RunConfig, TieBreak};
use serde::{Deserialize, Serialize};

const MAX_DILATION_RADIUS: u32 = 256;
const MAX_MIN_DURATION_MS: f64 = 60_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakName {
    ScoreAreaId,
    AreaScoreId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationName {
    Inclusive,
    TimestampDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub score_threshold: f64,
    pub tie_break: TieBreakName,
    pub min_consecutive: u32,
    pub gap_tolerance: u32,
    pub duration_convention: DurationName,
    pub dispersion_px: f64,
    pub min_duration_ms: f64,
    pub dilation_radius: u32,
    pub max_staleness_us: i64,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        Self {
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            tie_break: TieBreakName::ScoreAreaId,
            min_consecutive: DEFAULT_MIN_CONSECUTIVE,
            gap_tolerance: 0,
            duration_convention: DurationName::Inclusive,
            dispersion_px: DEFAULT_DISPERSION_PX,
            min_duration_ms: DEFAULT_MIN_DURATION_MS,
            dilation_radius: 0,
            max_staleness_us: DEFAULT_MAX_STALENESS_US,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("config: {0}")]
    Range(String),
}

fn range(msg: &str) -> ConfigError {
    ConfigError::Range(msg.to_string())
}

impl RunConfigFile {
    pub fn check(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(range("score_threshold must lie in [0, 1]"));
        }
        if self.min_consecutive == 0 {
            return Err(range("min_consecutive must be at least 1"));
        }
        if !(self.dispersion_px.is_finite() && self.dispersion_px > 0.0) {
            return Err(range("dispersion_px must be positive"));
        }
        if !(self.min_duration_ms > 0.0 && self.min_duration_ms <= MAX_MIN_DURATION_MS) {
            return Err(range("min_duration_ms must lie in (0, 60000]"));
        }
        if self.dilation_radius > MAX_DILATION_RADIUS {
            return Err(range("dilation_radius must not exceed 256"));
        }
        if self.max_staleness_us <= 0 {
            return Err(range("max_staleness_us must be positive"));
        }
        Ok(())
    }

    pub fn mapping(&self) -> Result<MappingConfig, ConfigError> {
        self.check()?;
        Ok(MappingConfig {
            hit: HitConfig {
                score_threshold: self.score_threshold,
                tie_break: match self.tie_break {
                    TieBreakName::ScoreAreaId => TieBreak::ScoreAreaId,
                    TieBreakName::AreaScoreId => TieBreak::AreaScoreId,
                },
            },
            run: RunConfig {
                min_consecutive: self.min_consecutive,
                gap_tolerance_frames: self.gap_tolerance,
                duration: self.duration(),
            },
            idt: IdtConfig {
                dispersion_px: self.dispersion_px,
                min_duration_ms: self.min_duration_ms,
            },
            alignment: AlignmentPolicy::new(self.max_staleness_us).map_err(|e| ConfigError::Range(e.to_string()))?,
            dilation_radius: self.dilation_radius,
        })
    }

    pub fn duration(&self) -> DurationConvention {
        match self.duration_convention {
            DurationName::Inclusive => DurationConvention::Inclusive,
            DurationName::TimestampDifference => DurationConvention::TimestampDifference,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfigFile, ConfigError> {
    let cfg: RunConfigFile = serde_json::from_str(text)?;
    cfg.check()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
