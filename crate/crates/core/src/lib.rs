//! Mapping of wearable eye-tracker gaze onto per-frame instance masks.
//!
//! This crate holds the pure algorithmic layer: gaze stream types, the
//! run-length mask codec and hit testing, frame/gaze alignment, fixation
//! detection and attention metrics. It needs `alloc` but not `std`; file
//! formats, the scenario simulator and the command line live in the
//! `gazemap` crate.

#![no_std]

extern crate alloc;

pub mod alignment;
pub mod fixation;
pub mod gaze;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod point;
pub mod rle;

pub use alignment::{AlignmentError, AlignmentPolicy, FrameTimeline};
pub use fixation::{
    DurationConvention, Fixation, FixationError, FixationTarget, FrameHit, IdtConfig, RunConfig, Target, TrialRecord,
};
pub use gaze::{Eye, GazeSample, GazeStream, SampleKind, StreamStats, TrackPoint};
pub use mask::{FrameMasks, Instance, MaskError, MaskSet, TieBreak, Violation};
pub use metrics::{Location, Observation, TrialMetrics, ValidationReport, ValidationRow};
pub use pipeline::MappingConfig;
pub use point::{BBox, NormPoint, Pixel, Resolution};
pub use rle::{Bitmap, RleError, RleMask};
