//! Video metadata file: `{"fps": 25.0, "frame_count": 703, "t0_us": 0, "resolution": [1920, 1080]}`.

use std::path::{Path, PathBuf};

use gazemap_core::{AlignmentError, FrameTimeline, Resolution};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub fps: f64,
    pub frame_count: u32,
    pub t0_us: i64,
    pub resolution: [u32; 2],
}

#[derive(Debug, thiserror::Error)]
pub enum MetaError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("metadata syntax: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("metadata invalid: {0}")]
    Invalid(#[from] AlignmentError),
}

impl VideoMeta {
    pub fn from_timeline(t: &FrameTimeline) -> Self {
        Self {
            fps: t.fps,
            frame_count: t.frame_count,
            t0_us: t.t0_us,
            resolution: [t.resolution.width, t.resolution.height],
        }
    }

    pub fn timeline(&self) -> Result<FrameTimeline, AlignmentError> {
        FrameTimeline::new(
            self.fps,
            self.frame_count,
            self.t0_us,
            Resolution::new(self.resolution[0], self.resolution[1]),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("metadata serializes");
        s.push('\n');
        s
    }
}

pub fn parse_meta(text: &str) -> Result<FrameTimeline, MetaError> {
    let meta: VideoMeta = serde_json::from_str(text)?;
    Ok(meta.timeline()?)
}

pub fn load_meta(path: &Path) -> Result<FrameTimeline, MetaError> {
    let text = std::fs::read_to_string(path).map_err(|source| MetaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_meta(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let meta = VideoMeta {
            fps: 25.0,
            frame_count: 703,
            t0_us: 0,
            resolution: [1920, 1080],
        };
        let t = parse_meta(&meta.to_json()).unwrap();
        assert_eq!(t.frame_count, 703);
        assert_eq!(VideoMeta::from_timeline(&t), meta);
    }

    #[test]
    fn zero_fps_rejected() {
        let text = r#"{"fps": 0, "frame_count": 1, "t0_us": 0, "resolution": [2, 2]}"#;
        assert!(matches!(parse_meta(text), Err(MetaError::Invalid(_))));
    }
}
