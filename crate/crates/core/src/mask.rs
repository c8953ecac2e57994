//! Detected AOI instances per frame and point-membership queries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::point::{BBox, Pixel, Resolution};
use crate::rle::{RleError, RleMask};

pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaskError {
    #[error("pixel ({}, {}) outside {}x{} image", .pixel.x, .pixel.y, .resolution.width, .resolution.height)]
    OutOfBounds { pixel: Pixel, resolution: Resolution },
    #[error("instance mask is empty")]
    EmptyMask,
}

/// One detected AOI instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub label: String,
    pub score: f64,
    pub mask: RleMask,
    pub bbox: BBox,
}

impl Instance {
    /// Builds an instance whose bbox is derived from the mask.
    pub fn from_mask(
        id: impl Into<String>,
        label: impl Into<String>,
        score: f64,
        mask: RleMask,
    ) -> Result<Self, MaskError> {
        let bbox = mask.bbox().ok_or(MaskError::EmptyMask)?;
        Ok(Self {
            id: id.into(),
            label: label.into(),
            score,
            mask,
            bbox,
        })
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.mask.width, self.mask.height)
    }

    fn contains(&self, p: Pixel) -> bool {
        self.bbox.contains(p) && self.mask.get(p)
    }
}

/// Whether the instance mask covers `p`. The bbox only rejects early.
pub fn point_in_instance(p: Pixel, inst: &Instance) -> Result<bool, MaskError> {
    let resolution = inst.resolution();
    if !resolution.contains(p) {
        return Err(MaskError::OutOfBounds { pixel: p, resolution });
    }
    Ok(inst.contains(p))
}

/// Winner selection among instances that all contain the query point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Highest score, then smaller mask area, then instance id.
    #[default]
    ScoreAreaId,
    /// Smaller mask area, then highest score, then instance id.
    AreaScoreId,
}

impl TieBreak {
    fn compare(&self, a: &Instance, b: &Instance) -> Ordering {
        let by_score = b.score.total_cmp(&a.score);
        let by_area = a.mask.area().cmp(&b.mask.area());
        let first = match self {
            Self::ScoreAreaId => by_score.then(by_area),
            Self::AreaScoreId => by_area.then(by_score),
        };
        first.then_with(|| a.id.cmp(&b.id))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMasks {
    pub frame_index: u32,
    pub instances: Vec<Instance>,
}

impl FrameMasks {
    pub fn new(frame_index: u32, instances: Vec<Instance>) -> Self {
        Self { frame_index, instances }
    }
}

/// The winning instance among those at or above `score_threshold` that
/// contain `p`; `None` when no instance contains it.
pub fn hit_test(p: Pixel, frame: &FrameMasks, score_threshold: f64, tie_break: TieBreak) -> Option<&Instance> {
    frame
        .instances
        .iter()
        .filter(|inst| inst.score >= score_threshold && inst.contains(p))
        .min_by(|a, b| tie_break.compare(a, b))
}

pub fn dilate_instance(inst: &Instance, radius: u32) -> Instance {
    if radius == 0 {
        return inst.clone();
    }
    let mask = inst.mask.dilate(radius);
    let bbox = mask.bbox().unwrap_or(inst.bbox);
    Instance {
        mask,
        bbox,
        ..inst.clone()
    }
}

/// Per-frame instance masks of a whole video.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub resolution: Resolution,
    pub frames: BTreeMap<u32, FrameMasks>,
    pub class_table: BTreeMap<String, String>,
}

impl MaskSet {
    pub fn new(resolution: Resolution, class_table: BTreeMap<String, String>) -> Self {
        Self {
            resolution,
            frames: BTreeMap::new(),
            class_table,
        }
    }

    /// Detections for a frame. Frames absent from the set have none.
    pub fn frame(&self, index: u32) -> Option<&FrameMasks> {
        self.frames.get(&index)
    }

    pub fn insert(&mut self, frame: FrameMasks) -> Option<FrameMasks> {
        self.frames.insert(frame.frame_index, frame)
    }

    pub fn instance_count(&self) -> usize {
        self.frames.values().map(|f| f.instances.len()).sum()
    }

    pub fn dilated(&self, radius: u32) -> MaskSet {
        if radius == 0 {
            return self.clone();
        }
        let frames = self
            .frames
            .iter()
            .map(|(i, f)| {
                let instances = f.instances.iter().map(|inst| dilate_instance(inst, radius)).collect();
                (*i, FrameMasks::new(*i, instances))
            })
            .collect();
        MaskSet { frames, ..self.clone() }
    }

    /// Every invariant violation, in frame/instance order.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let res = self.resolution;
        if res.width == 0 || res.height == 0 {
            out.push(Violation::new(None, None, ViolationKind::EmptyResolution));
        }
        for (&key, frame) in &self.frames {
            if key != frame.frame_index {
                out.push(Violation::new(
                    Some(key),
                    None,
                    ViolationKind::FrameKeyMismatch(frame.frame_index),
                ));
            }
            let mut ids: Vec<&str> = Vec::new();
            for (i, inst) in frame.instances.iter().enumerate() {
                let mut push = |kind| out.push(Violation::new(Some(key), Some(i), kind));
                if ids.contains(&inst.id.as_str()) {
                    push(ViolationKind::DuplicateId(inst.id.clone()));
                }
                ids.push(&inst.id);
                if inst.label.is_empty() {
                    push(ViolationKind::EmptyLabel);
                } else if !self.class_table.is_empty() && !self.class_table.contains_key(&inst.label) {
                    push(ViolationKind::UnknownLabel(inst.label.clone()));
                }
                if !(0.0..=1.0).contains(&inst.score) {
                    push(ViolationKind::ScoreOutOfRange(inst.score));
                }
                if inst.mask.width != res.width || inst.mask.height != res.height {
                    push(ViolationKind::SizeMismatch {
                        mask: Resolution::new(inst.mask.width, inst.mask.height),
                        expected: res,
                    });
                    continue;
                }
                if let Err(e) = inst.mask.check_canonical() {
                    let sum_ok = !matches!(e, RleError::SizeMismatch { .. });
                    push(ViolationKind::Rle(e));
                    if !sum_ok {
                        continue;
                    }
                }
                match inst.mask.bbox() {
                    None => push(ViolationKind::EmptyMask),
                    Some(tight) if tight != inst.bbox => push(ViolationKind::BBoxNotTight {
                        declared: inst.bbox,
                        tight,
                    }),
                    Some(_) => {}
                }
            }
        }
        out
    }
}

/// A single invariant violation located by frame and instance position.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub frame: Option<u32>,
    pub instance: Option<usize>,
    pub kind: ViolationKind,
}

impl Violation {
    pub fn new(frame: Option<u32>, instance: Option<usize>, kind: ViolationKind) -> Self {
        Self { frame, instance, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    EmptyResolution,
    DuplicateFrame,
    FrameKeyMismatch(u32),
    DuplicateId(String),
    EmptyLabel,
    UnknownLabel(String),
    ScoreOutOfRange(f64),
    SizeMismatch { mask: Resolution, expected: Resolution },
    Rle(RleError),
    EmptyMask,
    BBoxNotTight { declared: BBox, tight: BBox },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.frame, self.instance) {
            (Some(fr), Some(i)) => write!(f, "frame {fr}, instance {i}: ")?,
            (Some(fr), None) => write!(f, "frame {fr}: ")?,
            _ => {}
        }
        match &self.kind {
            ViolationKind::EmptyResolution => write!(f, "resolution must be positive"),
            ViolationKind::DuplicateFrame => write!(f, "duplicate frame index"),
            ViolationKind::FrameKeyMismatch(i) => write!(f, "stored under a different index ({i})"),
            ViolationKind::DuplicateId(id) => write!(f, "duplicate instance id {id:?}"),
            ViolationKind::EmptyLabel => write!(f, "empty label"),
            ViolationKind::UnknownLabel(l) => write!(f, "label {l:?} not in class table"),
            ViolationKind::ScoreOutOfRange(s) => write!(f, "score {s} outside [0,1]"),
            ViolationKind::SizeMismatch { mask, expected } => write!(
                f,
                "mask size {}x{} differs from resolution {}x{}",
                mask.width, mask.height, expected.width, expected.height
            ),
            ViolationKind::Rle(e) => write!(f, "{e}"),
            ViolationKind::EmptyMask => write!(f, "mask has no pixels"),
            ViolationKind::BBoxNotTight { declared, tight } => write!(
                f,
                "bbox [{}, {}, {}, {}] is not the tight box [{}, {}, {}, {}]",
                declared.x0, declared.y0, declared.x1, declared.y1, tight.x0, tight.y0, tight.x1, tight.y1
            ),
        }
    }
}
