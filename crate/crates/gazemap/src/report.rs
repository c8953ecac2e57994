//! Trial reports, tabular metric exports and validation documents.
//!
//! Durations are written in milliseconds: as integers when whole, otherwise
//! as decimals. Frame targets are AOI labels or the reserved words
//! `off-target` and `no-gaze`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gazemap_core::metrics::{compute_metrics, validate, ValidationError};
use gazemap_core::{
    Fixation, FixationTarget, FrameHit, Location, Observation, Pixel, Target, TrialMetrics, TrialRecord,
    ValidationReport,
};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::RunConfigFile;
use crate::meta::VideoMeta;

pub const OFF_TARGET: &str = "off-target";
pub const NO_GAZE: &str = "no-gaze";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Syntax { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Content(String),
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

/// A duration stored in microseconds and written in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Millis(pub i64);

impl Serialize for Millis {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 % 1000 == 0 {
            s.serialize_i64(self.0 / 1000)
        } else {
            s.serialize_f64(self.0 as f64 / 1000.0)
        }
    }
}

impl<'de> Deserialize<'de> for Millis {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let ms = f64::deserialize(d)?;
        if !ms.is_finite() {
            return Err(D::Error::custom("duration must be finite"));
        }
        Ok(Millis((ms * 1000.0).round() as i64))
    }
}

pub fn location_name(loc: &Location) -> &str {
    match loc {
        Location::Aoi(l) => l,
        Location::OffTarget => OFF_TARGET,
        Location::NoGaze => NO_GAZE,
    }
}

/// Parses a location label; the reserved words are matched case-insensitively
/// with `-` or `_` as separator.
pub fn parse_location(label: &str) -> Location {
    let norm = label.trim().to_ascii_lowercase().replace('_', "-");
    match norm.as_str() {
        OFF_TARGET => Location::OffTarget,
        NO_GAZE => Location::NoGaze,
        _ => Location::Aoi(label.trim().to_string()),
    }
}

fn px_pair(p: Option<Pixel>) -> Option<[u32; 2]> {
    p.map(|p| [p.x, p.y])
}

fn pair_px(p: Option<[u32; 2]>) -> Option<Pixel> {
    p.map(|[x, y]| Pixel::new(x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationEntry {
    pub target: String,
    pub first_frame: u32,
    pub last_frame: u32,
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub duration_ms: Millis,
    pub centroid_px: [f64; 2],
}

impl From<&Fixation> for FixationEntry {
    fn from(f: &Fixation) -> Self {
        Self {
            target: match &f.target {
                FixationTarget::Aoi(l) => l.clone(),
                FixationTarget::OffTarget => OFF_TARGET.to_string(),
            },
            first_frame: f.first_frame,
            last_frame: f.last_frame,
            start_ms: Millis(f.start_us),
            end_ms: Millis(f.end_us),
            duration_ms: Millis(f.duration_us),
            centroid_px: [f.centroid_px.0, f.centroid_px.1],
        }
    }
}

impl FixationEntry {
    pub fn is_on_target(&self) -> bool {
        self.target != OFF_TARGET
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame: u32,
    pub px: Option<[u32; 2]>,
    pub target: String,
}

impl From<&FrameHit> for FrameEntry {
    fn from(h: &FrameHit) -> Self {
        Self {
            frame: h.frame_index,
            px: px_pair(h.gaze_px),
            target: location_name(&Location::from(&h.target)).to_string(),
        }
    }
}

/// The metric block shared by trial reports and structured exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub trial_duration_ms: Millis,
    pub dwell_ms: BTreeMap<String, Millis>,
    pub fixation_count: u32,
    pub on_target_count: u32,
    pub tfr_exact: f64,
    pub tfr_reported: f64,
}

impl From<&TrialMetrics> for MetricsEntry {
    fn from(m: &TrialMetrics) -> Self {
        Self {
            trial_duration_ms: Millis(m.trial_duration_us),
            dwell_ms: m.dwell_us.iter().map(|(k, v)| (k.clone(), Millis(*v))).collect(),
            fixation_count: m.fixation_count,
            on_target_count: m.on_target_count,
            tfr_exact: m.tfr_exact,
            tfr_reported: m.tfr_reported(),
        }
    }
}

impl MetricsEntry {
    pub fn to_metrics(&self) -> TrialMetrics {
        TrialMetrics::from_parts(
            self.trial_duration_ms.0,
            self.dwell_ms.iter().map(|(k, v)| (k.clone(), v.0)).collect(),
            self.fixation_count,
            self.on_target_count,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub config: RunConfigFile,
    pub video: VideoMeta,
    #[serde(flatten)]
    pub metrics: MetricsEntry,
    pub fixations: Vec<FixationEntry>,
    pub frames: Vec<FrameEntry>,
}

impl TrialReport {
    pub fn new(config: &RunConfigFile, video: VideoMeta, trial: &TrialRecord) -> Self {
        Self {
            config: config.clone(),
            video,
            metrics: MetricsEntry::from(&compute_metrics(trial)),
            fixations: trial.fixations.iter().map(FixationEntry::from).collect(),
            frames: trial.hits.iter().map(FrameEntry::from).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.frames
            .iter()
            .map(|f| Observation {
                frame: f.frame,
                px: pair_px(f.px),
                location: parse_location(&f.target),
                remark: None,
            })
            .collect()
    }

    /// Checks that the stored metrics agree with the stored fixations.
    pub fn check(&self) -> Result<(), String> {
        let m = &self.metrics;
        if m.fixation_count as usize != self.fixations.len() {
            return Err(format!(
                "fixation_count {} but {} fixations listed",
                m.fixation_count,
                self.fixations.len()
            ));
        }
        let on = self.fixations.iter().filter(|f| f.is_on_target()).count();
        if m.on_target_count as usize != on {
            return Err(format!(
                "on_target_count {} but {on} AOI fixations listed",
                m.on_target_count
            ));
        }
        for (label, dwell) in &m.dwell_ms {
            let sum: i64 = self
                .fixations
                .iter()
                .filter(|f| &f.target == label)
                .map(|f| f.end_ms.0 - f.start_ms.0)
                .sum();
            if sum != dwell.0 {
                return Err(format!("dwell for {label} does not match its fixations"));
            }
        }
        Ok(())
    }
}

/// Pretty JSON with a trailing newline; field order is fixed by the types.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String, ReportError> {
    std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ReportError> {
    serde_json::from_str(text).map_err(|source| ReportError::Syntax {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_trial_report(path: &Path) -> Result<TrialReport, ReportError> {
    let report: TrialReport = parse(path, &read(path)?)?;
    report
        .check()
        .map_err(|e| ReportError::Content(format!("{}: {e}", path.display())))?;
    Ok(report)
}

/// A trial's metrics under a display name, as exported by `metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMetrics {
    pub trial: String,
    #[serde(flatten)]
    pub metrics: MetricsEntry,
}

pub fn metrics_json(trials: &[NamedMetrics]) -> String {
    to_json(&trials)
}

fn format_ms(us: i64) -> String {
    if us % 1000 == 0 {
        (us / 1000).to_string()
    } else {
        (us as f64 / 1000.0).to_string()
    }
}

fn format_tfr(hundredths: u32) -> String {
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// One row per trial: `trial,trial_duration_ms,DT_<label>...,FC,TFR`. The
/// dwell columns cover every label seen in any trial, sorted.
pub fn metrics_csv(trials: &[(String, TrialMetrics)]) -> String {
    let labels: std::collections::BTreeSet<&String> = trials.iter().flat_map(|(_, m)| m.dwell_us.keys()).collect();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["trial".to_string(), "trial_duration_ms".to_string()];
    header.extend(labels.iter().map(|l| format!("DT_{l}")));
    header.extend(["FC".to_string(), "TFR".to_string()]);
    w.write_record(&header).expect("in-memory write");
    for (name, m) in trials {
        let mut row = vec![name.clone(), format_ms(m.trial_duration_us)];
        row.extend(
            labels
                .iter()
                .map(|l| format_ms(m.dwell_us.get(*l).copied().unwrap_or(0))),
        );
        row.push(m.fixation_count.to_string());
        row.push(format_tfr(m.tfr_hundredths));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// One manually or automatically located gaze point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocatedFrame {
    pub frame: u32,
    pub px: Option<[u32; 2]>,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remark: Option<String>,
}

impl LocatedFrame {
    pub fn observation(&self) -> Observation {
        Observation {
            frame: self.frame,
            px: pair_px(self.px),
            location: parse_location(&self.label),
            remark: self.remark.clone().filter(|r| !r.trim().is_empty()),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LocatedFrames {
    List(Vec<LocatedFrame>),
    Doc { frames: Vec<LocatedFrame> },
}

/// Reads a list of located frames, bare or under a `frames` key as in a
/// simulator ground-truth file.
pub fn load_located_frames(path: &Path) -> Result<Vec<LocatedFrame>, ReportError> {
    match parse(path, &read(path)?)? {
        LocatedFrames::List(v) | LocatedFrames::Doc { frames: v } => Ok(v),
    }
}

/// System rows for validation: a trial report restricted to the frames of
/// the ground truth, or a plain list of located frames.
pub fn load_system_rows(path: &Path, truth: &[Observation]) -> Result<Vec<Observation>, ReportError> {
    let text = read(path)?;
    let value: serde_json::Value = parse(path, &text)?;
    if value.get("frames").is_some() {
        let report: TrialReport = parse(path, &text)?;
        let by_frame: BTreeMap<u32, Observation> = report.observations().into_iter().map(|o| (o.frame, o)).collect();
        let missing: Vec<u32> = truth
            .iter()
            .map(|t| t.frame)
            .filter(|f| !by_frame.contains_key(f))
            .collect();
        if !missing.is_empty() {
            return Err(ValidationError::KeyMismatch {
                missing_in_system: missing,
                missing_in_truth: Vec::new(),
            }
            .into());
        }
        Ok(truth.iter().map(|t| by_frame[&t.frame].clone()).collect())
    } else {
        let rows: Vec<LocatedFrame> = parse(path, &text)?;
        Ok(rows.iter().map(LocatedFrame::observation).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRowEntry {
    pub frame: u32,
    pub sys_px: Option<[u32; 2]>,
    pub sys_label: String,
    pub gt_px: Option<[u32; 2]>,
    pub gt_label: String,
    #[serde(rename = "match")]
    pub matched: bool,
    pub remark: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PxDeviationEntry {
    pub compared: usize,
    pub exact: usize,
    pub mean_px: f64,
    pub max_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationDoc {
    pub rows: usize,
    pub matches: usize,
    pub accuracy: f64,
    pub px_deviation: PxDeviationEntry,
    pub frames: Vec<ValidationRowEntry>,
}

impl From<&ValidationReport> for ValidationDoc {
    fn from(r: &ValidationReport) -> Self {
        Self {
            rows: r.rows.len(),
            matches: r.matches,
            accuracy: r.accuracy,
            px_deviation: PxDeviationEntry {
                compared: r.deviation.compared,
                exact: r.deviation.exact,
                mean_px: r.deviation.mean_px,
                max_px: r.deviation.max_px,
            },
            frames: r
                .rows
                .iter()
                .map(|row| ValidationRowEntry {
                    frame: row.frame_index,
                    sys_px: px_pair(row.sys_px),
                    sys_label: location_name(&row.sys_label).to_string(),
                    gt_px: px_pair(row.gt_px),
                    gt_label: location_name(&row.gt_label).to_string(),
                    matched: row.matched,
                    remark: row.remark.clone(),
                })
                .collect(),
        }
    }
}

fn px_cell(p: Option<[u32; 2]>) -> String {
    p.map_or_else(String::new, |[x, y]| format!("{x} {y}"))
}

pub fn validation_csv(r: &ValidationReport) -> String {
    let doc = ValidationDoc::from(r);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["frame", "sys_px", "sys_label", "gt_px", "gt_label", "match", "remark"])
        .expect("in-memory write");
    for row in &doc.frames {
        w.write_record([
            row.frame.to_string(),
            px_cell(row.sys_px),
            row.sys_label.clone(),
            px_cell(row.gt_px),
            row.gt_label.clone(),
            if row.matched { "yes" } else { "no" }.to_string(),
            row.remark.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Loads both sides and compares them.
pub fn validate_files(system: &Path, truth: &Path) -> Result<ValidationReport, ReportError> {
    let gt: Vec<Observation> = load_located_frames(truth)?
        .iter()
        .map(LocatedFrame::observation)
        .collect();
    let sys = load_system_rows(system, &gt)?;
    Ok(validate(&sys, &gt)?)
}

/// Ground-truth rows for every frame of a trial, as written by the simulator.
pub fn located_frames(hits: &[FrameHit]) -> Vec<LocatedFrame> {
    hits.iter()
        .map(|h| LocatedFrame {
            frame: h.frame_index,
            px: px_pair(h.gaze_px),
            label: match &h.target {
                Target::Aoi(l) => l.clone(),
                Target::OffTarget => OFF_TARGET.to_string(),
                Target::NoGaze => NO_GAZE.to_string(),
            },
            remark: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn metrics(dwell: &[(&str, i64)], fc: u32, on: u32) -> TrialMetrics {
        TrialMetrics::from_parts(
            25_410_000,
            dwell.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            fc,
            on,
        )
    }

    #[test]
    fn tabular_row_layout() {
        let m = metrics(&[("H1", 5_880_000), ("H2", 0), ("H3", 1_400_000)], 53, 26);
        let csv = metrics_csv(&[("Participant_1".into(), m)]);
        assert_eq!(
            csv,
            "trial,trial_duration_ms,DT_H1,DT_H2,DT_H3,FC,TFR\nParticipant_1,25410,5880,0,1400,53,0.49\n"
        );
    }

    #[test]
    fn empty_trial_is_a_row_of_zeros() {
        let m = TrialMetrics::from_parts(0, [("H1".to_string(), 0)].into_iter().collect(), 0, 0);
        let csv = metrics_csv(&[("t".into(), m)]);
        assert_eq!(csv.lines().nth(1), Some("t,0,0,0,0.00"));
    }

    #[test]
    fn millis_render_as_integers_when_whole() {
        assert_eq!(serde_json::to_string(&Millis(280_000)).unwrap(), "280");
        assert_eq!(serde_json::to_string(&Millis(280_500)).unwrap(), "280.5");
        assert_eq!(serde_json::from_str::<Millis>("280.5").unwrap(), Millis(280_500));
    }

    #[test]
    fn reserved_labels_parse_loosely() {
        assert_eq!(parse_location("Off_Target"), Location::OffTarget);
        assert_eq!(parse_location("no-gaze"), Location::NoGaze);
        assert_eq!(parse_location("Electrical"), Location::Aoi("Electrical".into()));
    }

    proptest! {
        #[test]
        fn structured_metrics_round_trip(
            dwell in prop::collection::btree_map("[A-Z][0-9]", 0i64..100_000, 0..4),
            fc in 0u32..200,
            on_frac in 0.0f64..=1.0,
            dur in 0i64..10_000_000,
        ) {
            let dwell: BTreeMap<String, i64> = dwell.into_iter().map(|(k, v)| (k, v * 40_000)).collect();
            let on = (f64::from(fc) * on_frac) as u32;
            let m = TrialMetrics::from_parts(dur * 1000, dwell, fc, on);
            let named = vec![NamedMetrics { trial: "t".into(), metrics: MetricsEntry::from(&m) }];
            let back: Vec<NamedMetrics> = serde_json::from_str(&metrics_json(&named)).unwrap();
            prop_assert_eq!(&back, &named);
            prop_assert_eq!(back[0].metrics.to_metrics(), m);
        }
    }
}
