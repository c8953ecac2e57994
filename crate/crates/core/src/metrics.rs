//! Dwell time, fixation count and on-target fixation ratio of a trial, and
//! frame-by-frame comparison against manually located fixations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::fixation::{Fixation, FixationTarget, Target, TrialRecord};
use crate::point::Pixel;

/// Summed duration of the fixations on `label`, in microseconds.
pub fn dwell_time_us(fixations: &[Fixation], label: &str) -> i64 {
    fixations
        .iter()
        .filter(|f| matches!(&f.target, FixationTarget::Aoi(l) if l == label))
        .map(|f| f.end_us - f.start_us)
        .sum()
}

/// On-target ratio as `(exact, truncated hundredths)`; both zero when there
/// are no fixations.
pub fn on_target_ratio(on_target: u32, total: u32) -> (f64, u32) {
    if total == 0 {
        return (0.0, 0);
    }
    let exact = f64::from(on_target) / f64::from(total);
    let hundredths = (u64::from(on_target) * 100 / u64::from(total)) as u32;
    (exact, hundredths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub trial_duration_us: i64,
    /// Dwell time per AOI label, including AOIs never fixated.
    pub dwell_us: BTreeMap<String, i64>,
    pub fixation_count: u32,
    pub on_target_count: u32,
    pub tfr_exact: f64,
    /// Ratio truncated (not rounded) to two decimals, in hundredths.
    pub tfr_hundredths: u32,
}

impl TrialMetrics {
    pub fn from_parts(
        trial_duration_us: i64,
        dwell_us: BTreeMap<String, i64>,
        fixation_count: u32,
        on_target_count: u32,
    ) -> Self {
        let (tfr_exact, tfr_hundredths) = on_target_ratio(on_target_count, fixation_count);
        Self {
            trial_duration_us,
            dwell_us,
            fixation_count,
            on_target_count,
            tfr_exact,
            tfr_hundredths,
        }
    }

    pub fn tfr_reported(&self) -> f64 {
        f64::from(self.tfr_hundredths) / 100.0
    }

    pub fn trial_duration_ms(&self) -> f64 {
        self.trial_duration_us as f64 / 1000.0
    }

    pub fn dwell_ms(&self, label: &str) -> f64 {
        self.dwell_us.get(label).copied().unwrap_or(0) as f64 / 1000.0
    }
}

pub fn compute_metrics(trial: &TrialRecord) -> TrialMetrics {
    let dwell_us = trial
        .aoi_labels
        .iter()
        .map(|l| (l.clone(), dwell_time_us(&trial.fixations, l)))
        .collect();
    let on_target = trial.aoi_fixations().count() as u32;
    TrialMetrics::from_parts(
        trial.trial_duration_us,
        dwell_us,
        trial.fixations.len() as u32,
        on_target,
    )
}

/// Gaze location relative to the AOIs, as judged by the system or by hand.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Aoi(String),
    OffTarget,
    NoGaze,
}

impl From<&Target> for Location {
    fn from(t: &Target) -> Self {
        match t {
            Target::Aoi(l) => Location::Aoi(l.clone()),
            Target::OffTarget => Location::OffTarget,
            Target::NoGaze => Location::NoGaze,
        }
    }
}

/// One located gaze point of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: u32,
    pub px: Option<Pixel>,
    pub location: Location,
    pub remark: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub frame_index: u32,
    pub sys_px: Option<Pixel>,
    pub sys_label: Location,
    pub gt_px: Option<Pixel>,
    pub gt_label: Location,
    pub matched: bool,
    pub remark: String,
}

impl ValidationRow {
    /// Euclidean distance between the two gaze pixels, when both exist.
    pub fn px_deviation(&self) -> Option<f64> {
        let (a, b) = (self.sys_px?, self.gt_px?);
        let dx = f64::from(a.x) - f64::from(b.x);
        let dy = f64::from(a.y) - f64::from(b.y);
        Some(libm::sqrt(dx * dx + dy * dy))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelDeviation {
    pub compared: usize,
    pub exact: usize,
    pub mean_px: f64,
    pub max_px: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Sorted by frame index.
    pub rows: Vec<ValidationRow>,
    pub matches: usize,
    pub accuracy: f64,
    pub deviation: PixelDeviation,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("no rows to compare")]
    Empty,
    #[error("frame {0} listed more than once")]
    DuplicateFrame(u32),
    #[error(
        "frame keys differ: missing from system {missing_in_system:?}, missing from ground truth {missing_in_truth:?}"
    )]
    KeyMismatch {
        missing_in_system: Vec<u32>,
        missing_in_truth: Vec<u32>,
    },
}

fn keyed(rows: &[Observation]) -> Result<BTreeMap<u32, &Observation>, ValidationError> {
    let mut map = BTreeMap::new();
    for r in rows {
        if map.insert(r.frame, r).is_some() {
            return Err(ValidationError::DuplicateFrame(r.frame));
        }
    }
    Ok(map)
}

/// Compares system and ground-truth rows keyed by frame index. The remark
/// comes from the ground truth row, then the system row; unexplained
/// mismatches are marked "label mismatch".
pub fn validate(system: &[Observation], truth: &[Observation]) -> Result<ValidationReport, ValidationError> {
    let sys = keyed(system)?;
    let gt = keyed(truth)?;
    let sys_keys: BTreeSet<u32> = sys.keys().copied().collect();
    let gt_keys: BTreeSet<u32> = gt.keys().copied().collect();
    if sys_keys != gt_keys {
        return Err(ValidationError::KeyMismatch {
            missing_in_system: gt_keys.difference(&sys_keys).copied().collect(),
            missing_in_truth: sys_keys.difference(&gt_keys).copied().collect(),
        });
    }
    if sys.is_empty() {
        return Err(ValidationError::Empty);
    }

    let rows: Vec<ValidationRow> = sys
        .iter()
        .map(|(frame, s)| {
            let g = gt[frame];
            let matched = s.location == g.location;
            let remark = g.remark.clone().or_else(|| s.remark.clone()).unwrap_or_else(|| {
                if matched {
                    String::new()
                } else {
                    "label mismatch".to_string()
                }
            });
            ValidationRow {
                frame_index: *frame,
                sys_px: s.px,
                sys_label: s.location.clone(),
                gt_px: g.px,
                gt_label: g.location.clone(),
                matched,
                remark,
            }
        })
        .collect();

    let matches = rows.iter().filter(|r| r.matched).count();
    let deviations: Vec<f64> = rows.iter().filter_map(ValidationRow::px_deviation).collect();
    let deviation = PixelDeviation {
        compared: deviations.len(),
        exact: deviations.iter().filter(|d| **d == 0.0).count(),
        mean_px: if deviations.is_empty() {
            0.0
        } else {
            deviations.iter().sum::<f64>() / deviations.len() as f64
        },
        max_px: deviations.iter().copied().fold(0.0, f64::max),
    };
    Ok(ValidationReport {
        accuracy: matches as f64 / rows.len() as f64,
        matches,
        rows,
        deviation,
    })
}
