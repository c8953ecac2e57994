//! Synthetic trials with exact ground truth.
//!
//! A scenario scripts moving AOI actors and a gaze path made of dwell,
//! saccade and dropout segments. Generation emits a gaze log at 100 Hz, a
//! mask file with one instance per actor per frame, the video metadata and
//! the expected result of mapping under the default configuration.
//!
//! Every 10 ms gaze tick belongs to the frame whose timestamp is nearest.
//! The tick nearest a frame's timestamp is at most 5 ms away and, with
//! frames at least 40 ms apart, always belongs to that frame, so the expected
//! gaze pixel of a frame is known without running the alignment. Ticks within
//! the staleness bound of a dropout frame are marked invalid.

use std::collections::BTreeMap;
use std::path::Path;

use gazemap_core::alignment::DEFAULT_MAX_STALENESS_US;
use gazemap_core::fixation::{DEFAULT_DISPERSION_PX, DEFAULT_MIN_CONSECUTIVE, DEFAULT_MIN_DURATION_MS};
use gazemap_core::gaze::DEFAULT_RATE_HZ;
use gazemap_core::mask::DEFAULT_SCORE_THRESHOLD;
use gazemap_core::{BBox, Eye, FrameMasks, GazeSample, GazeStream, Instance, MaskSet, Resolution, RleMask, SampleKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gaze_log::write_gaze_log;
use crate::mask_file::write_maskset;
use crate::meta::VideoMeta;
use crate::report::{to_json, FixationEntry, LocatedFrame, MetricsEntry, Millis, NO_GAZE, OFF_TARGET};

const TICK_US: i64 = 10_000;
const MAX_FPS: f64 = 25.0;
const MIN_FPS: f64 = 8.0;
const MAX_SACCADE_FRAMES: u32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario: {0}")]
    Invalid(String),
    #[error("scenario file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineSpec {
    pub fps: f64,
    pub frame_count: u32,
    #[serde(default)]
    pub t0_us: i64,
    pub resolution: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rect { w: f64, h: f64 },
    Ellipse { rx: f64, ry: f64 },
}

impl Shape {
    fn half_extent(&self) -> (f64, f64) {
        match *self {
            Shape::Rect { w, h } => (w / 2.0, h / 2.0),
            Shape::Ellipse { rx, ry } => (rx, ry),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionPath {
    Static {
        center: [f64; 2],
    },
    /// Moves at constant speed from the first to the last frame.
    Linear {
        from: [f64; 2],
        to: [f64; 2],
    },
}

/// Detection score from `from_frame` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreChange {
    pub from_frame: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub id: String,
    pub label: String,
    pub shape: Shape,
    pub path: MotionPath,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub score_schedule: Vec<ScoreChange>,
}

impl ActorSpec {
    fn center(&self, frame: u32, frame_count: u32) -> (f64, f64) {
        match &self.path {
            MotionPath::Static { center } => (center[0], center[1]),
            MotionPath::Linear { from, to } => {
                let u = if frame_count > 1 {
                    f64::from(frame) / f64::from(frame_count - 1)
                } else {
                    0.0
                };
                (from[0] + (to[0] - from[0]) * u, from[1] + (to[1] - from[1]) * u)
            }
        }
    }

    fn score_at(&self, frame: u32) -> f64 {
        self.score_schedule
            .iter()
            .filter(|c| c.from_frame <= frame)
            .max_by_key(|c| c.from_frame)
            .map_or(self.score, |c| c.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeRef {
    Actor(String),
    Point([u32; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Dwell { on: GazeRef, frames: u32 },
    Saccade { from: GazeRef, to: GazeRef, frames: u32 },
    Dropout { frames: u32 },
}

impl Segment {
    pub fn frames(&self) -> u32 {
        match self {
            Segment::Dwell { frames, .. } | Segment::Saccade { frames, .. } | Segment::Dropout { frames } => *frames,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub timeline: TimelineSpec,
    /// AOI classes reported in the mask file; derived from actor labels when
    /// empty.
    #[serde(default)]
    pub classes: BTreeMap<String, String>,
    /// Uniform per-axis gaze noise on dwell samples, in pixels.
    #[serde(default)]
    pub jitter_px: u32,
    /// Also emit pupil and 3-D gaze rows alongside the 2-D gaze.
    #[serde(default = "default_true")]
    pub extra_channels: bool,
    #[serde(default)]
    pub actors: Vec<ActorSpec>,
    pub gaze_script: Vec<Segment>,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    fn resolution(&self) -> Resolution {
        Resolution::new(self.timeline.resolution[0], self.timeline.resolution[1])
    }

    fn frame_ts(&self, frame: u32) -> i64 {
        self.timeline.t0_us + (f64::from(frame) * 1e6 / self.timeline.fps).round() as i64
    }

    fn period_us(&self) -> i64 {
        (1e6 / self.timeline.fps).round() as i64
    }

    fn actor(&self, id: &str) -> Option<(usize, &ActorSpec)> {
        self.actors.iter().enumerate().find(|(_, a)| a.id == id)
    }

    fn check_static(&self) -> Result<(), ScenarioError> {
        let t = &self.timeline;
        if !(t.fps.is_finite() && (MIN_FPS..=MAX_FPS).contains(&t.fps)) {
            return Err(invalid(format!(
                "fps must lie in [{MIN_FPS}, {MAX_FPS}], got {}",
                t.fps
            )));
        }
        if t.frame_count == 0 {
            return Err(invalid("frame_count must be positive"));
        }
        if t.t0_us < 0 {
            return Err(invalid("t0_us must not be negative"));
        }
        if t.resolution[0] == 0 || t.resolution[1] == 0 {
            return Err(invalid("resolution must be positive"));
        }
        if f64::from(4 * self.jitter_px) > DEFAULT_DISPERSION_PX {
            return Err(invalid("jitter_px too large: dwells would exceed the dispersion limit"));
        }
        let (w, h) = (f64::from(t.resolution[0]), f64::from(t.resolution[1]));
        for (i, a) in self.actors.iter().enumerate() {
            if a.id.is_empty() || a.label.is_empty() {
                return Err(invalid(format!("actor {i}: empty id or label")));
            }
            if self.actors[..i].iter().any(|b| b.id == a.id) {
                return Err(invalid(format!("duplicate actor id {:?}", a.id)));
            }
            if !self.classes.is_empty() && !self.classes.contains_key(&a.label) {
                return Err(invalid(format!("actor {:?}: label {:?} not in classes", a.id, a.label)));
            }
            let scores = std::iter::once(a.score).chain(a.score_schedule.iter().map(|c| c.score));
            for s in scores {
                if !(0.0..=1.0).contains(&s) {
                    return Err(invalid(format!("actor {:?}: score {s} outside [0,1]", a.id)));
                }
            }
            let (hx, hy) = a.shape.half_extent();
            if !(hx.is_finite() && hy.is_finite() && hx > 0.0 && hy > 0.0) {
                return Err(invalid(format!("actor {:?}: shape extents must be positive", a.id)));
            }
            let ends = match &a.path {
                MotionPath::Static { center } => vec![*center],
                MotionPath::Linear { from, to } => vec![*from, *to],
            };
            for [cx, cy] in ends {
                if !(cx - hx >= 0.0 && cx + hx <= w && cy - hy >= 0.0 && cy + hy <= h) {
                    return Err(invalid(format!("actor {:?} leaves the image", a.id)));
                }
            }
        }
        let total: u64 = self.gaze_script.iter().map(|s| u64::from(s.frames())).sum();
        if total != u64::from(t.frame_count) {
            return Err(invalid(format!(
                "gaze script covers {total} frames, timeline has {}",
                t.frame_count
            )));
        }
        for (i, seg) in self.gaze_script.iter().enumerate() {
            if seg.frames() == 0 {
                return Err(invalid(format!("segment {i} is empty")));
            }
            let refs: Vec<&GazeRef> = match seg {
                Segment::Dwell { on, .. } => vec![on],
                Segment::Saccade { from, to, frames } => {
                    if *frames > MAX_SACCADE_FRAMES {
                        return Err(invalid(format!(
                            "segment {i}: saccades last at most {MAX_SACCADE_FRAMES} frames"
                        )));
                    }
                    vec![from, to]
                }
                Segment::Dropout { .. } => vec![],
            };
            for r in refs {
                match r {
                    GazeRef::Actor(id) if self.actor(id).is_none() => {
                        return Err(invalid(format!("segment {i}: unknown actor {id:?}")));
                    }
                    GazeRef::Point([x, y]) if *x >= t.resolution[0] || *y >= t.resolution[1] => {
                        return Err(invalid(format!("segment {i}: point outside the image")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Pixels of one actor in one frame: an inclusive row range per column,
/// under the pixel-center rule.
#[derive(Debug, Clone)]
struct Raster {
    columns: Vec<(u32, u32, u32)>,
}

impl Raster {
    fn of(shape: &Shape, (cx, cy): (f64, f64)) -> Self {
        let (hx, _) = shape.half_extent();
        let x0 = (cx - hx - 0.5).ceil().max(0.0) as u32;
        let x1 = (cx + hx - 0.5).floor();
        let mut columns = Vec::new();
        if x1 < 0.0 {
            return Self { columns };
        }
        for x in x0..=x1 as u32 {
            let half = match *shape {
                Shape::Rect { h, .. } => h / 2.0,
                Shape::Ellipse { rx, ry } => {
                    let dx = (f64::from(x) + 0.5 - cx) / rx;
                    if dx * dx > 1.0 {
                        continue;
                    }
                    ry * (1.0 - dx * dx).sqrt()
                }
            };
            let y0 = (cy - half - 0.5).ceil().max(0.0);
            let y1 = (cy + half - 0.5).floor();
            if y1 >= y0 {
                columns.push((x, y0 as u32, y1 as u32));
            }
        }
        Self { columns }
    }

    fn contains(&self, x: u32, y: u32) -> bool {
        self.columns
            .binary_search_by_key(&x, |c| c.0)
            .is_ok_and(|i| (self.columns[i].1..=self.columns[i].2).contains(&y))
    }

    fn area(&self) -> u64 {
        self.columns.iter().map(|c| u64::from(c.2 - c.1 + 1)).sum()
    }

    fn bbox(&self) -> BBox {
        let x0 = self.columns.first().map_or(0, |c| c.0);
        let x1 = self.columns.last().map_or(0, |c| c.0);
        let y0 = self.columns.iter().map(|c| c.1).min().unwrap_or(0);
        let y1 = self.columns.iter().map(|c| c.2).max().unwrap_or(0);
        BBox::new(x0, y0, x1, y1)
    }

    /// Column-major run lengths starting with a background run.
    fn rle(&self, res: Resolution) -> RleMask {
        let h = u64::from(res.height);
        let total = h * u64::from(res.width);
        let mut runs: Vec<(u64, u64)> = Vec::new();
        for &(x, y0, y1) in &self.columns {
            let start = u64::from(x) * h + u64::from(y0);
            let end = u64::from(x) * h + u64::from(y1) + 1;
            match runs.last_mut() {
                Some(last) if last.1 == start => last.1 = end,
                _ => runs.push((start, end)),
            }
        }
        let mut counts = Vec::with_capacity(runs.len() * 2 + 1);
        let mut pos = 0;
        for (s, e) in runs {
            counts.push((s - pos) as u32);
            counts.push((e - s) as u32);
            pos = e;
        }
        if pos < total || counts.is_empty() {
            counts.push((total - pos) as u32);
        }
        RleMask {
            height: res.height,
            width: res.width,
            counts,
        }
    }
}

/// Expected outcome of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frames: Vec<LocatedFrame>,
    pub fixations: Vec<FixationEntry>,
    pub metrics: MetricsEntry,
    pub ledger: Ledger,
}

/// Tallies of what the scenario planted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    /// Frames per expected target (AOI label, `off-target`, `no-gaze`).
    pub frames_by_target: BTreeMap<String, u32>,
    pub aoi_fixations: BTreeMap<String, u32>,
    pub offtarget_fixations: u32,
    pub gaze_ticks: u32,
    pub invalid_ticks: u32,
    pub dwell_segments: u32,
    pub saccade_segments: u32,
    pub dropout_segments: u32,
}

/// Everything `generate` produces, file contents included.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub gaze_log: String,
    pub masks: String,
    pub meta: String,
    pub truth: GroundTruth,
}

impl Scenario {
    pub fn ground_truth_json(&self) -> String {
        to_json(&self.truth)
    }

    pub const FILES: [&'static str; 4] = ["gaze.jsonl", "masks.json", "meta.json", "ground_truth.json"];

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(Self::FILES[0]), &self.gaze_log)?;
        std::fs::write(dir.join(Self::FILES[1]), &self.masks)?;
        std::fs::write(dir.join(Self::FILES[2]), &self.meta)?;
        std::fs::write(dir.join(Self::FILES[3]), self.ground_truth_json())
    }
}

#[derive(Debug, Clone, Copy)]
struct Tick {
    ts: i64,
    owner: u32,
    pos: (u32, u32),
    valid: bool,
}

fn clamp_px(v: f64, extent: u32) -> u32 {
    v.round().clamp(0.0, f64::from(extent - 1)) as u32
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    spec.check_static()?;
    let res = spec.resolution();
    let n = spec.timeline.frame_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let rasters: Vec<Vec<Raster>> = (0..n)
        .map(|f| {
            spec.actors
                .iter()
                .map(|a| Raster::of(&a.shape, a.center(f, n)))
                .collect()
        })
        .collect();
    for (f, frame) in rasters.iter().enumerate() {
        for (a, r) in frame.iter().enumerate() {
            if r.columns.is_empty() {
                return Err(invalid(format!(
                    "actor {:?} covers no pixel in frame {f}",
                    spec.actors[a].id
                )));
            }
        }
    }

    let mut segment_of = Vec::with_capacity(n as usize);
    for (i, seg) in spec.gaze_script.iter().enumerate() {
        segment_of.extend(std::iter::repeat_n(i, seg.frames() as usize));
    }

    // ticks and their owning frames
    let first_ts = spec.frame_ts(0);
    let last_ts = spec.frame_ts(n - 1);
    let k0 = ((first_ts - DEFAULT_MAX_STALENESS_US).max(0) + TICK_US - 1) / TICK_US;
    let k1 = (last_ts + DEFAULT_MAX_STALENESS_US) / TICK_US;
    let mut ticks = Vec::with_capacity((k1 - k0 + 1) as usize);
    let mut owner = 0u32;
    for k in k0..=k1 {
        let ts = k * TICK_US;
        while owner + 1 < n && (spec.frame_ts(owner + 1) - ts).abs() < (ts - spec.frame_ts(owner)).abs() {
            owner += 1;
        }
        ticks.push(Tick {
            ts,
            owner,
            pos: (res.width / 2, res.height / 2),
            valid: true,
        });
    }

    let anchor = |r: &GazeRef, frame: u32| -> (f64, f64) {
        match r {
            GazeRef::Point([x, y]) => (f64::from(*x), f64::from(*y)),
            GazeRef::Actor(id) => {
                let (_, a) = spec.actor(id).expect("checked");
                let (cx, cy) = a.center(frame, n);
                (cx.floor(), cy.floor())
            }
        }
    };
    let j = i64::from(spec.jitter_px);
    let mut start = 0usize;
    let mut first_frame = 0u32;
    for (si, seg) in spec.gaze_script.iter().enumerate() {
        let last_frame = first_frame + seg.frames() - 1;
        let mut end = start;
        while end < ticks.len() && segment_of[ticks[end].owner as usize] == si {
            end += 1;
        }
        let span = &mut ticks[start..end];
        match seg {
            Segment::Dwell { on, .. } => {
                for t in span.iter_mut() {
                    let (bx, by) = anchor(on, t.owner);
                    let (dx, dy) = if j > 0 {
                        (rng.random_range(-j..=j), rng.random_range(-j..=j))
                    } else {
                        (0, 0)
                    };
                    t.pos = (
                        clamp_px(bx + dx as f64, res.width),
                        clamp_px(by + dy as f64, res.height),
                    );
                }
            }
            Segment::Saccade { from, to, .. } => {
                let a = anchor(from, first_frame);
                let b = anchor(to, last_frame);
                // time runs from the frame before the saccade to the frame after it
                let ta = spec.frame_ts(first_frame) - spec.period_us();
                let tb = spec.frame_ts(last_frame + 1);
                for t in span.iter_mut() {
                    let u = ((t.ts - ta) as f64 / (tb - ta) as f64).clamp(0.0, 1.0);
                    t.pos = (
                        clamp_px(a.0 + (b.0 - a.0) * u, res.width),
                        clamp_px(a.1 + (b.1 - a.1) * u, res.height),
                    );
                }
            }
            Segment::Dropout { .. } => {}
        }
        start = end;
        first_frame = last_frame + 1;
    }
    for f in 0..n {
        if matches!(spec.gaze_script[segment_of[f as usize]], Segment::Dropout { .. }) {
            let ts = spec.frame_ts(f);
            for t in ticks
                .iter_mut()
                .filter(|t| (t.ts - ts).abs() <= DEFAULT_MAX_STALENESS_US)
            {
                t.valid = false;
            }
        }
    }

    // expected gaze pixel and verdict per frame
    let threshold = DEFAULT_SCORE_THRESHOLD;
    let mut frame_px: Vec<Option<(u32, u32)>> = Vec::with_capacity(n as usize);
    for f in 0..n {
        if matches!(spec.gaze_script[segment_of[f as usize]], Segment::Dropout { .. }) {
            frame_px.push(None);
            continue;
        }
        let ts = spec.frame_ts(f);
        let nearest = ticks
            .iter()
            .min_by_key(|t| ((t.ts - ts).abs(), t.ts))
            .expect("ticks cover every frame");
        if nearest.owner != f || !nearest.valid {
            return Err(invalid(format!("frame {f}: nearest gaze tick does not belong to it")));
        }
        frame_px.push(Some(nearest.pos));
    }
    let verdicts: Vec<String> = (0..n as usize)
        .map(|f| match frame_px[f] {
            None => NO_GAZE.to_string(),
            Some((x, y)) => spec
                .actors
                .iter()
                .enumerate()
                .filter(|(a, actor)| actor.score_at(f as u32) >= threshold && rasters[f][*a].contains(x, y))
                .min_by(|(i, a), (k, b)| {
                    b.score_at(f as u32)
                        .total_cmp(&a.score_at(f as u32))
                        .then(rasters[f][*i].area().cmp(&rasters[f][*k].area()))
                        .then(a.id.cmp(&b.id))
                })
                .map_or_else(|| OFF_TARGET.to_string(), |(_, actor)| actor.label.clone()),
        })
        .collect();

    // script consistency
    let mut first_frame = 0u32;
    for (si, seg) in spec.gaze_script.iter().enumerate() {
        let frames = first_frame..first_frame + seg.frames();
        match seg {
            Segment::Dwell {
                on: GazeRef::Actor(id), ..
            } => {
                let (_, actor) = spec.actor(id).expect("checked");
                for f in frames.clone() {
                    if actor.score_at(f) >= threshold && verdicts[f as usize] != actor.label {
                        return Err(invalid(format!(
                            "segment {si}: dwell on {id:?} lands on {} in frame {f}",
                            verdicts[f as usize]
                        )));
                    }
                }
            }
            Segment::Dwell {
                on: GazeRef::Point(p), ..
            } => {
                if let Some(f) = frames.clone().find(|f| verdicts[*f as usize] != OFF_TARGET) {
                    return Err(invalid(format!(
                        "segment {si}: point {p:?} lies on an AOI in frame {f}"
                    )));
                }
            }
            _ => {}
        }
        first_frame = frames.end;
    }
    for f in 1..n as usize {
        let (Some(a), Some(b)) = (frame_px[f - 1], frame_px[f]) else {
            continue;
        };
        let same_dwell =
            segment_of[f - 1] == segment_of[f] && matches!(spec.gaze_script[segment_of[f]], Segment::Dwell { .. });
        let l1 = a.0.abs_diff(b.0) + a.1.abs_diff(b.1);
        if !same_dwell && f64::from(l1) <= DEFAULT_DISPERSION_PX {
            return Err(invalid(format!(
                "frames {} and {f}: gaze moves only {l1} px between segments or within a saccade",
                f - 1
            )));
        }
    }

    // expected fixations
    let period = spec.period_us();
    let min_frames = {
        let min_us = DEFAULT_MIN_DURATION_MS * 1000.0;
        let mut k = 1u32;
        while ((i64::from(k) * period) as f64) < min_us {
            k += 1;
        }
        k
    };
    let mut spans: Vec<(String, u32, u32)> = Vec::new();
    let mut consumed = vec![false; n as usize];
    let mut f = 0usize;
    while f < n as usize {
        let label = &verdicts[f];
        let mut g = f;
        while g + 1 < n as usize && verdicts[g + 1] == *label {
            g += 1;
        }
        let is_aoi = label != OFF_TARGET && label != NO_GAZE;
        if is_aoi && (g - f + 1) as u32 >= DEFAULT_MIN_CONSECUTIVE {
            spans.push((label.clone(), f as u32, g as u32));
            consumed[f..=g].iter_mut().for_each(|c| *c = true);
        }
        f = g + 1;
    }
    let mut first_frame = 0u32;
    for (si, seg) in spec.gaze_script.iter().enumerate() {
        let last = first_frame + seg.frames() - 1;
        if matches!(seg, Segment::Dwell { .. }) {
            let mut f = first_frame;
            while f <= last {
                if consumed[f as usize] {
                    f += 1;
                    continue;
                }
                let mut g = f;
                while g < last && !consumed[g as usize + 1] {
                    g += 1;
                }
                if g - f + 1 >= min_frames {
                    let pts = &frame_px[f as usize..=g as usize];
                    let xs = pts.iter().map(|p| p.expect("dwells carry gaze").0);
                    let ys = pts.iter().map(|p| p.expect("dwells carry gaze").1);
                    let spread =
                        xs.clone().max().unwrap() - xs.min().unwrap() + ys.clone().max().unwrap() - ys.min().unwrap();
                    if f64::from(spread) > DEFAULT_DISPERSION_PX {
                        return Err(invalid(format!("segment {si}: dwell spreads over {spread} px")));
                    }
                    spans.push((OFF_TARGET.to_string(), f, g));
                }
                f = g + 1;
            }
        }
        first_frame = last + 1;
    }
    spans.sort_by_key(|s| s.1);

    let fixations: Vec<FixationEntry> = spans
        .iter()
        .map(|(target, a, b)| {
            let pts: Vec<(u32, u32)> = frame_px[*a as usize..=*b as usize].iter().flatten().copied().collect();
            let cx = pts.iter().map(|p| f64::from(p.0)).sum::<f64>() / pts.len() as f64;
            let cy = pts.iter().map(|p| f64::from(p.1)).sum::<f64>() / pts.len() as f64;
            let start = spec.frame_ts(*a);
            let duration = i64::from(b - a + 1) * period;
            FixationEntry {
                target: target.clone(),
                first_frame: *a,
                last_frame: *b,
                start_ms: Millis(start),
                end_ms: Millis(start + duration),
                duration_ms: Millis(duration),
                centroid_px: [cx, cy],
            }
        })
        .collect();

    let mut classes = spec.classes.clone();
    if classes.is_empty() {
        for a in &spec.actors {
            classes.insert(a.label.clone(), String::new());
        }
    }
    let mut dwell: BTreeMap<String, Millis> = classes.keys().map(|k| (k.clone(), Millis(0))).collect();
    let mut ledger = Ledger::default();
    for fx in fixations.iter().filter(|fx| fx.target != OFF_TARGET) {
        dwell.entry(fx.target.clone()).or_default().0 += fx.duration_ms.0;
        *ledger.aoi_fixations.entry(fx.target.clone()).or_default() += 1;
    }
    let fc = fixations.len() as u32;
    let on = fc - fixations.iter().filter(|fx| fx.target == OFF_TARGET).count() as u32;
    ledger.offtarget_fixations = fc - on;
    let hundredths = (on * 100).checked_div(fc).unwrap_or(0);
    let metrics = MetricsEntry {
        trial_duration_ms: Millis(i64::from(n) * period),
        dwell_ms: dwell,
        fixation_count: fc,
        on_target_count: on,
        tfr_exact: if fc == 0 { 0.0 } else { f64::from(on) / f64::from(fc) },
        tfr_reported: f64::from(hundredths) / 100.0,
    };
    for v in &verdicts {
        *ledger.frames_by_target.entry(v.clone()).or_default() += 1;
    }
    ledger.gaze_ticks = ticks.len() as u32;
    ledger.invalid_ticks = ticks.iter().filter(|t| !t.valid).count() as u32;
    for seg in &spec.gaze_script {
        match seg {
            Segment::Dwell { .. } => ledger.dwell_segments += 1,
            Segment::Saccade { .. } => ledger.saccade_segments += 1,
            Segment::Dropout { .. } => ledger.dropout_segments += 1,
        }
    }

    let frames = (0..n as usize)
        .map(|f| LocatedFrame {
            frame: f as u32,
            px: frame_px[f].map(|(x, y)| [x, y]),
            label: verdicts[f].clone(),
            remark: None,
        })
        .collect();

    // files
    let mut samples = Vec::with_capacity(ticks.len() * 5);
    for t in &ticks {
        let gx = (f64::from(t.pos.0) + 0.5) / f64::from(res.width);
        let gy = (f64::from(t.pos.1) + 0.5) / f64::from(res.height);
        samples.push(GazeSample::new(t.ts, SampleKind::Gp, None, vec![gx, gy], t.valid));
        if spec.extra_channels {
            let (dx, dy) = (gx - 0.5, gy - 0.5);
            let norm = (dx * dx + dy * dy + 1.0).sqrt();
            let pupil: f64 = 3.0 + rng.random::<f64>();
            samples.push(GazeSample::new(
                t.ts,
                SampleKind::Pd,
                Some(Eye::Left),
                vec![pupil],
                t.valid,
            ));
            samples.push(GazeSample::new(
                t.ts,
                SampleKind::Pc,
                Some(Eye::Left),
                vec![-30.0 + dx * 4.0, 10.0 + dy * 4.0, -20.0],
                t.valid,
            ));
            samples.push(GazeSample::new(
                t.ts,
                SampleKind::Gd,
                Some(Eye::Left),
                vec![dx / norm, dy / norm, 1.0 / norm],
                t.valid,
            ));
            samples.push(GazeSample::new(
                t.ts,
                SampleKind::Gp3,
                None,
                vec![dx * 600.0, dy * 600.0, 600.0],
                t.valid,
            ));
        }
    }
    let gaze_log = write_gaze_log(&GazeStream::new(samples, DEFAULT_RATE_HZ));

    let mut masks = MaskSet::new(res, classes);
    for (f, frame) in rasters.iter().enumerate() {
        let instances = spec
            .actors
            .iter()
            .zip(frame)
            .map(|(a, r)| Instance {
                id: a.id.clone(),
                label: a.label.clone(),
                score: a.score_at(f as u32),
                mask: r.rle(res),
                bbox: r.bbox(),
            })
            .collect();
        masks.insert(FrameMasks::new(f as u32, instances));
    }
    let meta = VideoMeta {
        fps: spec.timeline.fps,
        frame_count: n,
        t0_us: spec.timeline.t0_us,
        resolution: spec.timeline.resolution,
    };

    Ok(Scenario {
        gaze_log,
        masks: write_maskset(&masks),
        meta: meta.to_json(),
        truth: GroundTruth {
            frames,
            fixations,
            metrics,
            ledger,
        },
    })
}

/// Background points of the preset layout, away from every actor.
const PRESET_POINTS: [[u32; 2]; 8] = [
    [150, 150],
    [1780, 980],
    [160, 960],
    [1800, 140],
    [960, 960],
    [320, 620],
    [1760, 520],
    [980, 560],
];

fn preset_actors() -> Vec<ActorSpec> {
    vec![
        ActorSpec {
            id: "excavator-1".into(),
            label: "H1".into(),
            shape: Shape::Rect { w: 200.0, h: 140.0 },
            path: MotionPath::Linear {
                from: [1320.0, 736.0],
                to: [1370.0, 720.0],
            },
            score: 0.93,
            score_schedule: Vec::new(),
        },
        ActorSpec {
            id: "cable-1".into(),
            label: "H2".into(),
            shape: Shape::Rect { w: 420.0, h: 14.0 },
            path: MotionPath::Static { center: [960.0, 300.0] },
            score: 0.81,
            score_schedule: Vec::new(),
        },
        ActorSpec {
            id: "generator-1".into(),
            label: "H3".into(),
            shape: Shape::Ellipse { rx: 90.0, ry: 70.0 },
            path: MotionPath::Static { center: [600.0, 330.0] },
            score: 0.88,
            score_schedule: Vec::new(),
        },
    ]
}

/// Alternating off-target and on-target dwells joined by 2-frame saccades.
/// On-target dwells last exactly 7 frames; off-target dwells share the
/// remaining frames.
fn preset_script(frame_count: u32, h1: u32, h3: u32, off: u32) -> Vec<Segment> {
    const SACCADE: u32 = 2;
    const MINIMAL: u32 = 7;
    let on = h1 + h3;
    let dwells = on + off;
    let fixed = on * MINIMAL + (dwells - 1) * SACCADE;
    let spare = frame_count - fixed;
    let (base, extra) = (spare / off, spare % off);

    // spread the on-target dwells evenly among the off-target ones
    let mut order: Vec<Option<&str>> = Vec::with_capacity(dwells as usize);
    let mut placed = 0u32;
    for i in 0..off {
        order.push(None);
        while placed < ((i + 1) * on) / off {
            let generator = ((placed + 1) * h3) / on > (placed * h3) / on;
            order.push(Some(if generator { "generator-1" } else { "excavator-1" }));
            placed += 1;
        }
    }

    let mut script = Vec::new();
    let mut prev: Option<GazeRef> = None;
    let mut off_seen = 0u32;
    let mut point_index = 0usize;
    for slot in order {
        let (target, frames) = match slot {
            Some(id) => (GazeRef::Actor(id.to_string()), MINIMAL),
            None => {
                let frames = base + u32::from(off_seen < extra);
                off_seen += 1;
                point_index = (point_index + 3) % PRESET_POINTS.len();
                (GazeRef::Point(PRESET_POINTS[point_index]), frames)
            }
        };
        if let Some(from) = prev.take() {
            script.push(Segment::Saccade {
                from,
                to: target.clone(),
                frames: SACCADE,
            });
        }
        script.push(Segment::Dwell {
            on: target.clone(),
            frames,
        });
        prev = Some(target);
    }
    script
}

pub const PRESETS: [&str; 3] = ["participant1", "participant2", "participant3"];

/// Trials built to reproduce published per-participant metrics.
pub fn preset(name: &str) -> Option<ScenarioSpec> {
    let (seed, frames, h1, h3, off) = match name {
        "participant1" => (1, 703, 21, 5, 27),
        "participant2" => (2, 653, 12, 1, 42),
        "participant3" => (3, 630, 15, 5, 41),
        _ => return None,
    };
    let classes = [
        ("H1", "motion: excavator"),
        ("H2", "electrical: cables"),
        ("H3", "mechanical/electrical: generator"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    Some(ScenarioSpec {
        seed,
        timeline: TimelineSpec {
            fps: 25.0,
            frame_count: frames,
            t0_us: 0,
            resolution: [1920, 1080],
        },
        classes,
        jitter_px: 3,
        extra_channels: true,
        actors: preset_actors(),
        gaze_script: preset_script(frames, h1, h3, off),
    })
}

const RANDOM_RES: [u32; 2] = [256, 192];
const RANDOM_LABELS: [&str; 3] = ["H1", "H2", "H3"];

impl ScenarioSpec {
    /// A small random scenario that passes validation. Candidates are drawn
    /// from a stream seeded by `seed` until one validates.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let spec = random_candidate(&mut rng);
            if generate(&spec).is_ok() {
                return spec;
            }
        }
    }
}

fn random_candidate(rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let [w, h] = RANDOM_RES;
    let fps = [25.0, 25.0, 24.0, 20.0, 12.5][rng.random_range(0..5)];
    let frame_count: u32 = rng.random_range(120..=260);
    let jitter_px: u32 = rng.random_range(0..=3);
    let actor_count = rng.random_range(0..=3);
    let mut actors = Vec::new();
    for i in 0..actor_count {
        let shape = if rng.random_bool(0.5) {
            Shape::Rect {
                w: f64::from(rng.random_range(24..=64u32)),
                h: f64::from(rng.random_range(24..=64u32)),
            }
        } else {
            Shape::Ellipse {
                rx: f64::from(rng.random_range(12..=32u32)) + 0.5,
                ry: f64::from(rng.random_range(12..=32u32)),
            }
        };
        let (hx, hy) = shape.half_extent();
        let place = |rng: &mut ChaCha8Rng| {
            [
                rng.random_range(hx.ceil()..=f64::from(w) - hx.ceil()).floor() + 0.5,
                rng.random_range(hy.ceil()..=f64::from(h) - hy.ceil()).floor(),
            ]
        };
        let start = place(rng);
        let path = if rng.random_bool(0.4) {
            let to = [
                (start[0] + f64::from(rng.random_range(-12..=12i32))).clamp(hx.ceil(), f64::from(w) - hx.ceil()),
                (start[1] + f64::from(rng.random_range(-12..=12i32))).clamp(hy.ceil(), f64::from(h) - hy.ceil()),
            ];
            MotionPath::Linear { from: start, to }
        } else {
            MotionPath::Static { center: start }
        };
        let score = rng.random_range(0.6..=1.0);
        let score_schedule = if rng.random_bool(0.3) {
            vec![ScoreChange {
                from_frame: rng.random_range(0..frame_count),
                score: rng.random_range(0.5..=1.0),
            }]
        } else {
            Vec::new()
        };
        actors.push(ActorSpec {
            id: format!("a{i}"),
            label: RANDOM_LABELS[rng.random_range(0..RANDOM_LABELS.len())].to_string(),
            shape,
            path,
            score,
            score_schedule,
        });
    }

    let centre_of = |a: &ActorSpec, f: u32| {
        let (cx, cy) = a.center(f, frame_count);
        (cx.floor(), cy.floor())
    };
    let covers_any = |x: f64, y: f64, margin: f64| {
        actors.iter().any(|a| {
            let (hx, hy) = a.shape.half_extent();
            [a.center(0, frame_count), a.center(frame_count - 1, frame_count)]
                .iter()
                .any(|(cx, cy)| (x - cx).abs() <= hx + margin && (y - cy).abs() <= hy + margin)
        })
    };
    let step = DEFAULT_DISPERSION_PX + 4.0 * f64::from(jitter_px) + 4.0;

    let mut script = Vec::new();
    let mut used = 0u32;
    let mut prev: Option<(GazeRef, (f64, f64))> = None;
    while used < frame_count {
        let remaining = frame_count - used;
        if prev.is_some() && rng.random_bool(0.1) {
            let frames = rng.random_range(1..=4).min(remaining);
            script.push(Segment::Dropout { frames });
            used += frames;
            prev = None;
            continue;
        }
        let saccade = if prev.is_some() { rng.random_range(1..=3u32) } else { 0 };
        let dwell = rng.random_range(3..=14u32);
        let frame_at = used + saccade;
        let mut target = None;
        for _ in 0..40 {
            let candidate = if !actors.is_empty() && rng.random_bool(0.5) {
                let a = &actors[rng.random_range(0..actors.len())];
                (
                    GazeRef::Actor(a.id.clone()),
                    centre_of(a, frame_at.min(frame_count - 1)),
                )
            } else {
                let x = rng.random_range(4..w - 4);
                let y = rng.random_range(4..h - 4);
                if covers_any(f64::from(x), f64::from(y), f64::from(jitter_px) + 2.0) {
                    continue;
                }
                (GazeRef::Point([x, y]), (f64::from(x), f64::from(y)))
            };
            let far_enough = prev.as_ref().is_none_or(|(_, p)| {
                let l1 = (p.0 - candidate.1 .0).abs() + (p.1 - candidate.1 .1).abs();
                l1 > step * f64::from(saccade + 1)
            });
            if far_enough {
                target = Some(candidate);
                break;
            }
        }
        let Some((target, pos)) = target else {
            let frames = rng.random_range(1..=3).min(remaining);
            script.push(Segment::Dropout { frames });
            used += frames;
            prev = None;
            continue;
        };
        if saccade > 0 && saccade < remaining {
            let from = prev.take().expect("saccades follow a dwell").0;
            script.push(Segment::Saccade {
                from,
                to: target.clone(),
                frames: saccade,
            });
            used += saccade;
        }
        let frames = dwell.min(frame_count - used);
        script.push(Segment::Dwell {
            on: target.clone(),
            frames,
        });
        used += frames;
        prev = Some((target, pos));
    }

    ScenarioSpec {
        seed: rng.random(),
        timeline: TimelineSpec {
            fps,
            frame_count,
            t0_us: rng.random_range(0..=400_000),
            resolution: RANDOM_RES,
        },
        classes: BTreeMap::new(),
        jitter_px,
        extra_channels: rng.random_bool(0.5),
        actors,
        gaze_script: script,
    }
}
