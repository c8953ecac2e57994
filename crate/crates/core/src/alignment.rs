//! Video frame timeline and nearest-sample gaze lookup.

use crate::gaze::TrackPoint;
use crate::point::{NormPoint, Pixel, Resolution};

pub const DEFAULT_MAX_STALENESS_US: i64 = 20_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignmentError {
    #[error("frame {index} out of range (frame_count {frame_count})")]
    FrameOutOfRange { index: u32, frame_count: u32 },
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("max_staleness_us must be positive, got {0}")]
    InvalidStaleness(i64),
}

/// Frame clock of the scene-camera video expressed in the gaze clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTimeline {
    pub fps: f64,
    pub frame_count: u32,
    /// Timestamp of frame 0 in the gaze clock.
    pub t0_us: i64,
    pub resolution: Resolution,
}

impl FrameTimeline {
    pub fn new(fps: f64, frame_count: u32, t0_us: i64, resolution: Resolution) -> Result<Self, AlignmentError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(AlignmentError::InvalidFps(fps));
        }
        Ok(Self {
            fps,
            frame_count,
            t0_us,
            resolution,
        })
    }

    pub fn frame_timestamp(&self, index: u32) -> Result<i64, AlignmentError> {
        if index >= self.frame_count {
            return Err(AlignmentError::FrameOutOfRange {
                index,
                frame_count: self.frame_count,
            });
        }
        Ok(self.timestamp_unchecked(index))
    }

    pub(crate) fn timestamp_unchecked(&self, index: u32) -> i64 {
        self.t0_us + libm::round(f64::from(index) * 1e6 / self.fps) as i64
    }

    /// Frame period rounded to whole microseconds.
    pub fn frame_period_us(&self) -> i64 {
        libm::round(1e6 / self.fps) as i64
    }

    pub fn trial_duration_us(&self) -> i64 {
        i64::from(self.frame_count) * self.frame_period_us()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignmentMode {
    #[default]
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentPolicy {
    pub mode: AlignmentMode,
    pub max_staleness_us: i64,
}

impl AlignmentPolicy {
    pub fn new(max_staleness_us: i64) -> Result<Self, AlignmentError> {
        if max_staleness_us <= 0 {
            return Err(AlignmentError::InvalidStaleness(max_staleness_us));
        }
        Ok(Self {
            mode: AlignmentMode::Nearest,
            max_staleness_us,
        })
    }
}

impl Default for AlignmentPolicy {
    fn default() -> Self {
        Self {
            mode: AlignmentMode::Nearest,
            max_staleness_us: DEFAULT_MAX_STALENESS_US,
        }
    }
}

/// The track point closest in time to `frame_ts`, ties going to the earlier
/// sample, or `None` if even the closest is staler than the policy allows.
/// `track` must be sorted by timestamp.
pub fn gaze_at_frame(track: &[TrackPoint], frame_ts: i64, policy: &AlignmentPolicy) -> Option<TrackPoint> {
    let after = track.partition_point(|p| p.ts_us < frame_ts);
    let before = after.checked_sub(1).map(|i| {
        // first of any run of equal timestamps
        let ts = track[i].ts_us;
        track[..i].partition_point(|p| p.ts_us < ts)
    });
    let candidates = [before, (after < track.len()).then_some(after)];
    candidates
        .into_iter()
        .flatten()
        .map(|i| track[i])
        .min_by_key(|p| (p.ts_us - frame_ts).abs())
        .filter(|p| (p.ts_us - frame_ts).abs() <= policy.max_staleness_us)
}

/// Normalized gaze to pixel, clamped into the image.
pub fn to_pixel(gp: NormPoint, resolution: Resolution) -> Pixel {
    let scale = |v: f64, extent: u32| -> u32 {
        let scaled = libm::floor(v * f64::from(extent));
        if scaled.is_nan() || scaled < 0.0 {
            0
        } else {
            (scaled as u64).min(u64::from(extent.saturating_sub(1))) as u32
        }
    };
    Pixel::new(scale(gp.x, resolution.width), scale(gp.y, resolution.height))
}
