//! End-to-end mapping of one trial: gaze track + masks + timeline to a
//! [`TrialRecord`].

use alloc::borrow::Cow;

use crate::alignment::{AlignmentPolicy, FrameTimeline};
use crate::fixation::{
    build_trial, classify_frames, detect_aoi_fixations, detect_offtarget_fixations, FixationError, HitConfig,
    IdtConfig, RunConfig, TrialRecord,
};
use crate::gaze::TrackPoint;
use crate::mask::MaskSet;

/// Every tunable of the mapping, with the documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MappingConfig {
    pub hit: HitConfig,
    pub run: RunConfig,
    pub idt: IdtConfig,
    pub alignment: AlignmentPolicy,
    /// Square dilation applied to every mask before hit testing.
    pub dilation_radius: u32,
}

impl MappingConfig {
    pub fn validate(&self) -> Result<(), FixationError> {
        if !(0.0..=1.0).contains(&self.hit.score_threshold) {
            return Err(FixationError::Config("score_threshold must lie in [0,1]"));
        }
        if self.alignment.max_staleness_us <= 0 {
            return Err(FixationError::Config("max_staleness_us must be positive"));
        }
        self.run.validate()?;
        self.idt.validate()
    }
}

pub fn map_trial(
    timeline: &FrameTimeline,
    track: &[TrackPoint],
    masks: &MaskSet,
    config: &MappingConfig,
) -> Result<TrialRecord, FixationError> {
    config.validate()?;
    let masks = if config.dilation_radius > 0 {
        Cow::Owned(masks.dilated(config.dilation_radius))
    } else {
        Cow::Borrowed(masks)
    };
    let hits = classify_frames(timeline, track, &masks, &config.hit, &config.alignment)?;
    let aoi = detect_aoi_fixations(&hits, &config.run, timeline);
    let off = detect_offtarget_fixations(&hits, &aoi, &config.idt, config.run.duration, timeline);
    build_trial(hits, aoi, off, timeline, masks.class_table.keys().cloned())
}
