//! Fixation detection over the per-frame gaze/mask verdict stream.
//!
//! AOI fixations are maximal runs of frames whose gaze falls on the same
//! AOI label, kept when they reach `min_consecutive` frames. A run is one
//! fixation however long it lasts. Frames left over (off-target, or AOI
//! contacts too short to count) go through a dispersion-threshold detector
//! that yields off-target fixations.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::alignment::{gaze_at_frame, to_pixel, AlignmentPolicy, FrameTimeline};
use crate::gaze::TrackPoint;
use crate::mask::{hit_test, MaskSet, TieBreak};
use crate::point::{Pixel, Resolution};

pub const DEFAULT_MIN_CONSECUTIVE: u32 = 7;
pub const DEFAULT_DISPERSION_PX: f64 = 50.0;
pub const DEFAULT_MIN_DURATION_MS: f64 = 280.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FixationError {
    #[error(
        "mask resolution {}x{} differs from video resolution {}x{}",
        .masks.width, .masks.height, .video.width, .video.height
    )]
    ResolutionMismatch { masks: Resolution, video: Resolution },
    #[error("frame {frame} belongs to more than one fixation")]
    Overlap { frame: u32 },
    #[error("invalid detector configuration: {0}")]
    Config(&'static str),
}

/// Where the gaze of one frame landed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Aoi(String),
    OffTarget,
    NoGaze,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameHit {
    pub frame_index: u32,
    pub gaze_px: Option<Pixel>,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FixationTarget {
    Aoi(String),
    OffTarget,
}

impl FixationTarget {
    pub fn is_on_target(&self) -> bool {
        matches!(self, Self::Aoi(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixation {
    pub target: FixationTarget,
    pub first_frame: u32,
    pub last_frame: u32,
    /// Start time S.
    pub start_us: i64,
    /// End time E; `end_us - start_us == duration_us`.
    pub end_us: i64,
    pub duration_us: i64,
    /// Mean gaze pixel over the frames that have gaze.
    pub centroid_px: (f64, f64),
}

impl Fixation {
    pub fn frame_count(&self) -> u32 {
        self.last_frame - self.first_frame + 1
    }
}

/// How a frame span turns into a duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DurationConvention {
    /// `frames x period`: 7 frames at 25 fps last 280 ms.
    #[default]
    Inclusive,
    /// Difference between first and last frame timestamps: 7 frames last 240 ms.
    TimestampDifference,
}

impl DurationConvention {
    pub fn duration_us(&self, frames: u32, period_us: i64) -> i64 {
        match self {
            Self::Inclusive => i64::from(frames) * period_us,
            Self::TimestampDifference => i64::from(frames.saturating_sub(1)) * period_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub min_consecutive: u32,
    /// Longest stretch of gaze-less frames bridged inside a run.
    pub gap_tolerance_frames: u32,
    pub duration: DurationConvention,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            min_consecutive: DEFAULT_MIN_CONSECUTIVE,
            gap_tolerance_frames: 0,
            duration: DurationConvention::Inclusive,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), FixationError> {
        if self.min_consecutive == 0 {
            return Err(FixationError::Config("min_consecutive must be at least 1"));
        }
        Ok(())
    }
}

/// Dispersion-threshold identification parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdtConfig {
    /// Limit on `(max_x - min_x) + (max_y - min_y)` in pixels.
    pub dispersion_px: f64,
    pub min_duration_ms: f64,
}

impl Default for IdtConfig {
    fn default() -> Self {
        Self {
            dispersion_px: DEFAULT_DISPERSION_PX,
            min_duration_ms: DEFAULT_MIN_DURATION_MS,
        }
    }
}

impl IdtConfig {
    pub fn validate(&self) -> Result<(), FixationError> {
        if !(self.dispersion_px > 0.0 && self.dispersion_px.is_finite()) {
            return Err(FixationError::Config("dispersion_px must be positive"));
        }
        if !(self.min_duration_ms > 0.0 && self.min_duration_ms.is_finite()) {
            return Err(FixationError::Config("min_duration_ms must be positive"));
        }
        Ok(())
    }

    /// Fewest frames whose duration reaches `min_duration_ms`.
    pub fn min_frames(&self, convention: DurationConvention, period_us: i64) -> u32 {
        let min_us = self.min_duration_ms * 1000.0;
        let mut n = 1;
        while (convention.duration_us(n, period_us) as f64) < min_us && n < u32::MAX {
            n += 1;
        }
        n
    }
}

/// Parameters of the per-frame mask lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitConfig {
    pub score_threshold: f64,
    pub tie_break: TieBreak,
}

impl Default for HitConfig {
    fn default() -> Self {
        Self {
            score_threshold: crate::mask::DEFAULT_SCORE_THRESHOLD,
            tie_break: TieBreak::default(),
        }
    }
}

/// One verdict per frame of the timeline.
pub fn classify_frames(
    timeline: &FrameTimeline,
    track: &[TrackPoint],
    masks: &MaskSet,
    hit: &HitConfig,
    policy: &AlignmentPolicy,
) -> Result<Vec<FrameHit>, FixationError> {
    if masks.resolution != timeline.resolution {
        return Err(FixationError::ResolutionMismatch {
            masks: masks.resolution,
            video: timeline.resolution,
        });
    }
    let hits = (0..timeline.frame_count)
        .map(|frame_index| {
            let ts = timeline.timestamp_unchecked(frame_index);
            let gaze_px = gaze_at_frame(track, ts, policy).map(|tp| to_pixel(tp.point, timeline.resolution));
            let target = match gaze_px {
                None => Target::NoGaze,
                Some(px) => masks
                    .frame(frame_index)
                    .and_then(|fm| hit_test(px, fm, hit.score_threshold, hit.tie_break))
                    .map_or(Target::OffTarget, |inst| Target::Aoi(inst.label.clone())),
            };
            FrameHit {
                frame_index,
                gaze_px,
                target,
            }
        })
        .collect();
    Ok(hits)
}

fn make_fixation(
    hits: &[FrameHit],
    first: usize,
    last: usize,
    target: FixationTarget,
    convention: DurationConvention,
    timeline: &FrameTimeline,
) -> Fixation {
    let span = &hits[first..=last];
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0u32);
    for px in span.iter().filter_map(|h| h.gaze_px) {
        sx += f64::from(px.x);
        sy += f64::from(px.y);
        n += 1;
    }
    let centroid_px = if n == 0 {
        (0.0, 0.0)
    } else {
        (sx / f64::from(n), sy / f64::from(n))
    };
    let first_frame = hits[first].frame_index;
    let last_frame = hits[last].frame_index;
    let start_us = timeline.timestamp_unchecked(first_frame);
    let duration_us = convention.duration_us(last_frame - first_frame + 1, timeline.frame_period_us());
    Fixation {
        target,
        first_frame,
        last_frame,
        start_us,
        end_us: start_us + duration_us,
        duration_us,
        centroid_px,
    }
}

/// One fixation per maximal same-AOI run of at least `min_consecutive`
/// on-target frames. Runs may bridge up to `gap_tolerance_frames` gaze-less
/// frames; bridged frames count toward the duration but not the minimum.
pub fn detect_aoi_fixations(hits: &[FrameHit], cfg: &RunConfig, timeline: &FrameTimeline) -> Vec<Fixation> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < hits.len() {
        let Target::Aoi(label) = &hits[i].target else {
            i += 1;
            continue;
        };
        let same = |h: &FrameHit| matches!(&h.target, Target::Aoi(l) if l == label);
        let (start, mut last, mut on_frames) = (i, i, 1u32);
        let mut j = i + 1;
        loop {
            if j < hits.len() && same(&hits[j]) {
                last = j;
                on_frames += 1;
                j += 1;
                continue;
            }
            let mut k = j;
            while k < hits.len() && k - j < cfg.gap_tolerance_frames as usize && hits[k].target == Target::NoGaze {
                k += 1;
            }
            if k > j && k < hits.len() && same(&hits[k]) {
                j = k;
                continue;
            }
            break;
        }
        if on_frames >= cfg.min_consecutive {
            out.push(make_fixation(
                hits,
                start,
                last,
                FixationTarget::Aoi(label.clone()),
                cfg.duration,
                timeline,
            ));
        }
        i = last + 1;
    }
    out
}

/// Dispersion-threshold fixations over frames that have gaze and are not
/// part of any fixation in `consumed`.
pub fn detect_offtarget_fixations(
    hits: &[FrameHit],
    consumed: &[Fixation],
    cfg: &IdtConfig,
    convention: DurationConvention,
    timeline: &FrameTimeline,
) -> Vec<Fixation> {
    let mut taken = vec![false; hits.len()];
    for f in consumed {
        for frame in f.first_frame..=f.last_frame {
            if let Some(slot) = taken.get_mut(frame as usize) {
                *slot = true;
            }
        }
    }
    let eligible = |i: usize| !taken[i] && hits[i].gaze_px.is_some();
    let min_frames = cfg.min_frames(convention, timeline.frame_period_us()) as usize;

    let mut out = Vec::new();
    let mut seg_start = 0;
    while seg_start < hits.len() {
        if !eligible(seg_start) {
            seg_start += 1;
            continue;
        }
        let mut seg_end = seg_start;
        while seg_end < hits.len() && eligible(seg_end) {
            seg_end += 1;
        }
        idt_segment(hits, seg_start, seg_end, min_frames, cfg.dispersion_px, |a, b| {
            out.push(make_fixation(
                hits,
                a,
                b,
                FixationTarget::OffTarget,
                convention,
                timeline,
            ));
        });
        seg_start = seg_end;
    }
    out
}

#[derive(Clone, Copy)]
struct Extent {
    min_x: u32,
    max_x: u32,
    min_y: u32,
    max_y: u32,
}

impl Extent {
    fn of(p: Pixel) -> Self {
        Self {
            min_x: p.x,
            max_x: p.x,
            min_y: p.y,
            max_y: p.y,
        }
    }

    fn with(self, p: Pixel) -> Self {
        Self {
            min_x: self.min_x.min(p.x),
            max_x: self.max_x.max(p.x),
            min_y: self.min_y.min(p.y),
            max_y: self.max_y.max(p.y),
        }
    }

    fn dispersion(&self) -> f64 {
        f64::from(self.max_x - self.min_x) + f64::from(self.max_y - self.min_y)
    }
}

/// Runs the dispersion-threshold scan over `hits[start..end]`, all of which
/// carry gaze, reporting inclusive index spans.
fn idt_segment(
    hits: &[FrameHit],
    start: usize,
    end: usize,
    min_frames: usize,
    max_dispersion: f64,
    mut emit: impl FnMut(usize, usize),
) {
    let px = |i: usize| hits[i].gaze_px.expect("eligible frames carry gaze");
    let mut i = start;
    while i + min_frames <= end {
        let window = (i + 1..i + min_frames).fold(Extent::of(px(i)), |e, k| e.with(px(k)));
        if window.dispersion() > max_dispersion {
            i += 1;
            continue;
        }
        let mut extent = window;
        let mut j = i + min_frames;
        while j < end {
            let grown = extent.with(px(j));
            if grown.dispersion() > max_dispersion {
                break;
            }
            extent = grown;
            j += 1;
        }
        emit(i, j - 1);
        i = j;
    }
}

/// Fixations and verdicts of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub hits: Vec<FrameHit>,
    /// Sorted by start time.
    pub fixations: Vec<Fixation>,
    pub trial_duration_us: i64,
    /// AOI labels reported even when never fixated.
    pub aoi_labels: BTreeSet<String>,
}

impl TrialRecord {
    pub fn aoi_fixations(&self) -> impl Iterator<Item = &Fixation> {
        self.fixations.iter().filter(|f| f.target.is_on_target())
    }
}

/// Merges both fixation lists in time order. Fails if any frame is claimed
/// twice.
pub fn build_trial(
    hits: Vec<FrameHit>,
    aoi_fixations: Vec<Fixation>,
    offtarget_fixations: Vec<Fixation>,
    timeline: &FrameTimeline,
    aoi_labels: impl IntoIterator<Item = String>,
) -> Result<TrialRecord, FixationError> {
    let mut claimed = vec![false; timeline.frame_count as usize];
    let mut fixations = aoi_fixations;
    fixations.extend(offtarget_fixations);
    for f in &fixations {
        for frame in f.first_frame..=f.last_frame {
            match claimed.get_mut(frame as usize) {
                Some(slot) if !*slot => *slot = true,
                _ => return Err(FixationError::Overlap { frame }),
            }
        }
    }
    fixations.sort_by_key(|f| (f.start_us, f.first_frame));
    let mut aoi_labels: BTreeSet<String> = aoi_labels.into_iter().collect();
    aoi_labels.extend(fixations.iter().filter_map(|f| match &f.target {
        FixationTarget::Aoi(l) => Some(l.clone()),
        FixationTarget::OffTarget => None,
    }));
    Ok(TrialRecord {
        hits,
        fixations,
        trial_duration_us: timeline.trial_duration_us(),
        aoi_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn tl(frames: u32) -> FrameTimeline {
        FrameTimeline::new(25.0, frames, 0, Resolution::new(1920, 1080)).unwrap()
    }

    fn hits_from(targets: &[Target]) -> Vec<FrameHit> {
        targets
            .iter()
            .enumerate()
            .map(|(i, t)| FrameHit {
                frame_index: i as u32,
                gaze_px: (*t != Target::NoGaze).then_some(Pixel::new(100 + 80 * i as u32, 500)),
                target: t.clone(),
            })
            .collect()
    }

    fn aoi(l: &str) -> Target {
        Target::Aoi(l.to_string())
    }

    fn run(label: &str, n: usize) -> Vec<Target> {
        vec![aoi(label); n]
    }

    #[test]
    fn six_frames_is_not_a_fixation() {
        let mut t = vec![Target::OffTarget];
        t.extend(run("H1", 6));
        t.push(Target::OffTarget);
        assert!(detect_aoi_fixations(&hits_from(&t), &RunConfig::default(), &tl(8)).is_empty());
    }

    #[test]
    fn seven_frames_is_one_fixation_of_280_ms() {
        let t = run("H1", 7);
        let fix = detect_aoi_fixations(&hits_from(&t), &RunConfig::default(), &tl(7));
        assert_eq!(fix.len(), 1);
        assert_eq!(fix[0].duration_us, 280_000);
        assert_eq!((fix[0].start_us, fix[0].end_us), (0, 280_000));
    }

    #[test]
    fn fourteen_frames_is_still_one_fixation() {
        let mut t = vec![Target::OffTarget; 3];
        t.extend(run("H1", 14));
        let fix = detect_aoi_fixations(&hits_from(&t), &RunConfig::default(), &tl(17));
        assert_eq!(fix.len(), 1);
        assert_eq!(fix[0].duration_us, 560_000);
        assert_eq!((fix[0].first_frame, fix[0].last_frame), (3, 16));
        assert_eq!(fix[0].start_us, 120_000);
    }

    #[test]
    fn timestamp_difference_convention() {
        let cfg = RunConfig {
            duration: DurationConvention::TimestampDifference,
            ..RunConfig::default()
        };
        let fix = detect_aoi_fixations(&hits_from(&run("H1", 7)), &cfg, &tl(7));
        assert_eq!(fix[0].duration_us, 240_000);
    }

    #[test]
    fn label_change_splits_run() {
        let mut t = run("H1", 7);
        t.extend(run("H3", 7));
        let fix = detect_aoi_fixations(&hits_from(&t), &RunConfig::default(), &tl(14));
        assert_eq!(fix.len(), 2);
        assert_eq!(fix[1].target, FixationTarget::Aoi("H3".into()));
    }

    #[test]
    fn single_dropout_splits_six_plus_six() {
        let mut t = run("H1", 6);
        t.push(Target::NoGaze);
        t.extend(run("H1", 6));
        let hits = hits_from(&t);
        assert!(detect_aoi_fixations(&hits, &RunConfig::default(), &tl(13)).is_empty());

        let bridged = RunConfig {
            gap_tolerance_frames: 1,
            ..RunConfig::default()
        };
        let fix = detect_aoi_fixations(&hits, &bridged, &tl(13));
        assert_eq!(fix.len(), 1);
        assert_eq!(fix[0].frame_count(), 13);
        assert_eq!(fix[0].duration_us, 13 * 40_000);
    }

    #[test]
    fn gap_tolerance_does_not_bridge_other_targets() {
        let mut t = run("H1", 4);
        t.push(Target::OffTarget);
        t.extend(run("H1", 4));
        let cfg = RunConfig {
            gap_tolerance_frames: 3,
            ..RunConfig::default()
        };
        assert!(detect_aoi_fixations(&hits_from(&t), &cfg, &tl(9)).is_empty());
    }

    #[test]
    fn run_at_trial_end_is_closed() {
        let mut t = vec![Target::OffTarget; 2];
        t.extend(run("H2", 8));
        let fix = detect_aoi_fixations(&hits_from(&t), &RunConfig::default(), &tl(10));
        assert_eq!(fix.len(), 1);
        assert_eq!(fix[0].last_frame, 9);
    }

    fn stationary(n: usize, at: Pixel) -> Vec<FrameHit> {
        (0..n)
            .map(|i| FrameHit {
                frame_index: i as u32,
                gaze_px: Some(at),
                target: Target::OffTarget,
            })
            .collect()
    }

    #[test]
    fn stationary_300_ms_is_one_offtarget_fixation() {
        // 300 ms at 25 fps spans 8 frames (7.5 rounded up).
        let hits = stationary(8, Pixel::new(300, 300));
        let fix = detect_offtarget_fixations(&hits, &[], &IdtConfig::default(), DurationConvention::Inclusive, &tl(8));
        assert_eq!(fix.len(), 1);
        assert_eq!(fix[0].target, FixationTarget::OffTarget);
        assert_eq!(fix[0].centroid_px, (300.0, 300.0));
    }

    #[test]
    fn fast_sweep_has_no_fixation() {
        // 2000 px/s at 25 fps moves 80 px per frame.
        let hits: Vec<FrameHit> = (0..25)
            .map(|i| FrameHit {
                frame_index: i,
                gaze_px: Some(Pixel::new(10 + 80 * i, 500)),
                target: Target::OffTarget,
            })
            .collect();
        let fix = detect_offtarget_fixations(
            &hits,
            &[],
            &IdtConfig::default(),
            DurationConvention::Inclusive,
            &tl(25),
        );
        assert!(fix.is_empty());
    }

    #[test]
    fn consumed_frames_are_skipped() {
        let hits = stationary(14, Pixel::new(300, 300));
        let aoi = detect_aoi_fixations(&hits_from(&run("H1", 7)), &RunConfig::default(), &tl(14));
        let fix = detect_offtarget_fixations(
            &hits,
            &aoi,
            &IdtConfig::default(),
            DurationConvention::Inclusive,
            &tl(14),
        );
        assert_eq!(fix.len(), 1);
        assert_eq!((fix[0].first_frame, fix[0].last_frame), (7, 13));
    }

    #[test]
    fn min_frames_follows_convention() {
        let cfg = IdtConfig::default();
        assert_eq!(cfg.min_frames(DurationConvention::Inclusive, 40_000), 7);
        assert_eq!(cfg.min_frames(DurationConvention::TimestampDifference, 40_000), 8);
    }

    #[test]
    fn empty_trial_keeps_duration() {
        let trial = build_trial(vec![], vec![], vec![], &tl(100), ["H1".to_string()]).unwrap();
        assert!(trial.fixations.is_empty());
        assert_eq!(trial.trial_duration_us, 4_000_000);
    }

    #[test]
    fn overlapping_fixations_are_rejected() {
        let hits = hits_from(&run("H1", 7));
        let a = detect_aoi_fixations(&hits, &RunConfig::default(), &tl(7));
        let err = build_trial(hits, a.clone(), a, &tl(7), []).unwrap_err();
        assert_eq!(err, FixationError::Overlap { frame: 0 });
    }
}
