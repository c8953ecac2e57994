//! Gaze samples, the time-ordered stream built from them, and the 2-D gaze
//! track consumed by alignment.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::point::NormPoint;

/// Default eye-tracker sampling rate.
pub const DEFAULT_RATE_HZ: f64 = 100.0;

/// Record type of a raw eye-tracker row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleKind {
    /// Pupil center.
    Pc,
    /// Pupil diameter.
    Pd,
    /// 2-D gaze position, normalized.
    Gp,
    /// 3-D gaze position, mm.
    Gp3,
    /// Gaze direction unit vector.
    Gd,
}

impl SampleKind {
    pub const ALL: [SampleKind; 5] = [Self::Pc, Self::Pd, Self::Gp, Self::Gp3, Self::Gd];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pc => "pc",
            Self::Pd => "pd",
            Self::Gp => "gp",
            Self::Gp3 => "gp3",
            Self::Gd => "gd",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }

    /// Number of values carried by a record of this kind.
    pub fn arity(&self) -> usize {
        match self {
            Self::Pd => 1,
            Self::Gp => 2,
            Self::Pc | Self::Gp3 | Self::Gd => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Eye {
    Left,
    Right,
    Combined,
}

impl Eye {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Combined => "combined",
        }
    }
}

/// One timestamped eye-tracker record.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSample {
    /// Microseconds since recording start.
    pub ts_us: i64,
    pub kind: SampleKind,
    /// `None` for binocular (combined) rows.
    pub eye: Option<Eye>,
    pub values: Vec<f64>,
    pub valid: bool,
}

impl GazeSample {
    /// Builds a sample, clearing `valid` for gaze positions outside the unit
    /// square. Out-of-range positions are kept, never clamped.
    pub fn new(ts_us: i64, kind: SampleKind, eye: Option<Eye>, values: Vec<f64>, status_ok: bool) -> Self {
        let in_range =
            kind != SampleKind::Gp || (values.len() == 2 && NormPoint::new(values[0], values[1]).in_unit_square());
        Self {
            ts_us,
            kind,
            eye,
            values,
            valid: status_ok && in_range,
        }
    }

    fn is_combined(&self) -> bool {
        matches!(self.eye, None | Some(Eye::Combined))
    }

    /// Total order used to make stream construction independent of input order.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.ts_us
            .cmp(&other.ts_us)
            .then(self.kind.cmp(&other.kind))
            .then(self.eye.cmp(&other.eye))
            .then(self.valid.cmp(&other.valid))
            .then_with(|| {
                for (a, b) in self.values.iter().zip(&other.values) {
                    match a.total_cmp(b) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                self.values.len().cmp(&other.values.len())
            })
    }
}

/// A point of the 2-D gaze track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub ts_us: i64,
    pub point: NormPoint,
}

/// Immutable, time-ordered sequence of gaze samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeStream {
    samples: Vec<GazeSample>,
    nominal_rate_hz: f64,
}

impl GazeStream {
    pub fn new(mut samples: Vec<GazeSample>, nominal_rate_hz: f64) -> Self {
        samples.sort_by(GazeSample::canonical_cmp);
        Self {
            samples,
            nominal_rate_hz,
        }
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn nominal_rate_hz(&self) -> f64 {
        self.nominal_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_us(&self) -> i64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(first), Some(last)) => last.ts_us - first.ts_us,
            _ => 0,
        }
    }

    /// Valid 2-D gaze positions in time order.
    ///
    /// Binocular rows win whenever the stream has any; otherwise the per-eye
    /// rows sharing a timestamp are averaged.
    pub fn gaze_track(&self) -> Vec<TrackPoint> {
        let gp = || self.samples.iter().filter(|s| s.kind == SampleKind::Gp);
        if gp().any(GazeSample::is_combined) {
            return gp()
                .filter(|s| s.valid && s.is_combined())
                .map(|s| TrackPoint {
                    ts_us: s.ts_us,
                    point: NormPoint::new(s.values[0], s.values[1]),
                })
                .collect();
        }

        let mut per_ts: BTreeMap<i64, (f64, f64, u32)> = BTreeMap::new();
        for s in gp().filter(|s| s.valid) {
            let e = per_ts.entry(s.ts_us).or_insert((0.0, 0.0, 0));
            e.0 += s.values[0];
            e.1 += s.values[1];
            e.2 += 1;
        }
        per_ts
            .into_iter()
            .map(|(ts_us, (x, y, n))| TrackPoint {
                ts_us,
                point: NormPoint::new(x / f64::from(n), y / f64::from(n)),
            })
            .collect()
    }

    pub fn stats(&self) -> StreamStats {
        let mut sample_counts: BTreeMap<SampleKind, usize> = SampleKind::ALL.iter().map(|k| (*k, 0)).collect();
        let mut invalid_count = 0;
        for s in &self.samples {
            *sample_counts.entry(s.kind).or_default() += 1;
            if !s.valid {
                invalid_count += 1;
            }
        }

        let mut gp_ts: Vec<i64> = self
            .samples
            .iter()
            .filter(|s| s.kind == SampleKind::Gp)
            .map(|s| s.ts_us)
            .collect();
        gp_ts.dedup();

        let gap_threshold_us = 2.0 * 1e6 / self.nominal_rate_hz;
        let gap_count = gp_ts
            .windows(2)
            .filter(|w| (w[1] - w[0]) as f64 > gap_threshold_us)
            .count();
        let measured_rate_hz = match (gp_ts.first(), gp_ts.last()) {
            (Some(a), Some(b)) if b > a => (gp_ts.len() - 1) as f64 * 1e6 / (b - a) as f64,
            _ => 0.0,
        };

        StreamStats {
            sample_counts,
            gap_count,
            invalid_count,
            measured_rate_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamStats {
    pub sample_counts: BTreeMap<SampleKind, usize>,
    /// Gaze-position inter-arrival gaps longer than twice the nominal period.
    pub gap_count: usize,
    pub invalid_count: usize,
    /// Zero when fewer than two distinct gaze-position timestamps exist.
    pub measured_rate_hz: f64,
}

impl StreamStats {
    pub fn count(&self, kind: SampleKind) -> usize {
        self.sample_counts.get(&kind).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn gp(ts: i64, x: f64, y: f64) -> GazeSample {
        GazeSample::new(ts, SampleKind::Gp, None, vec![x, y], true)
    }

    #[test]
    fn out_of_range_gp_is_flagged_not_clamped() {
        let s = gp(0, 1.2, 0.5);
        assert!(!s.valid);
        assert_eq!(s.values, vec![1.2, 0.5]);
    }

    #[test]
    fn track_keeps_only_valid_gp() {
        let samples = vec![
            GazeSample::new(0, SampleKind::Pc, Some(Eye::Left), vec![1.0, 2.0, 3.0], true),
            GazeSample::new(0, SampleKind::Pd, Some(Eye::Left), vec![3.1], true),
            gp(10_000, 0.25, 0.75),
            GazeSample::new(10_000, SampleKind::Gd, Some(Eye::Left), vec![0.0, 0.0, 1.0], true),
        ];
        let stream = GazeStream::new(samples, DEFAULT_RATE_HZ);
        let track = stream.gaze_track();
        assert_eq!(track.len(), 1);
        assert_eq!(track[0].point, NormPoint::new(0.25, 0.75));
    }

    #[test]
    fn invalid_only_track_is_empty() {
        let samples = vec![GazeSample::new(0, SampleKind::Gp, None, vec![0.5, 0.5], false)];
        assert!(GazeStream::new(samples, DEFAULT_RATE_HZ).gaze_track().is_empty());
    }

    #[test]
    fn per_eye_rows_ignored_when_combined_present() {
        let samples = vec![
            gp(0, 0.5, 0.5),
            GazeSample::new(0, SampleKind::Gp, Some(Eye::Left), vec![0.1, 0.1], true),
        ];
        let track = GazeStream::new(samples, DEFAULT_RATE_HZ).gaze_track();
        assert_eq!(track.len(), 1);
        assert_eq!(track[0].point, NormPoint::new(0.5, 0.5));
    }

    #[test]
    fn per_eye_rows_are_averaged() {
        let samples = vec![
            GazeSample::new(0, SampleKind::Gp, Some(Eye::Left), vec![0.2, 0.4], true),
            GazeSample::new(0, SampleKind::Gp, Some(Eye::Right), vec![0.4, 0.6], true),
            GazeSample::new(10_000, SampleKind::Gp, Some(Eye::Right), vec![0.3, 0.3], true),
        ];
        let track = GazeStream::new(samples, DEFAULT_RATE_HZ).gaze_track();
        assert_eq!(track.len(), 2);
        assert!((track[0].point.x - 0.3).abs() < 1e-12);
        assert!((track[0].point.y - 0.5).abs() < 1e-12);
        assert_eq!(track[1].point, NormPoint::new(0.3, 0.3));
    }

    #[test]
    fn gapless_stream_has_no_gaps() {
        let samples = (0..101).map(|i| gp(i * 10_000, 0.5, 0.5)).collect();
        let stats = GazeStream::new(samples, DEFAULT_RATE_HZ).stats();
        assert_eq!(stats.gap_count, 0);
        assert!((stats.measured_rate_hz - 100.0).abs() < 1e-9);
    }

    #[test]
    fn fifty_ms_hole_is_one_gap() {
        let mut ts: Vec<i64> = (0..10).map(|i| i * 10_000).collect();
        ts.extend((0..10).map(|i| 140_000 + i * 10_000));
        let samples = ts.into_iter().map(|t| gp(t, 0.5, 0.5)).collect();
        let stats = GazeStream::new(samples, DEFAULT_RATE_HZ).stats();
        assert_eq!(stats.gap_count, 1);
    }

    #[test]
    fn duration_spans_first_to_last() {
        let samples = vec![gp(30, 0.1, 0.1), gp(10, 0.1, 0.1), gp(20, 0.1, 0.1)];
        let stream = GazeStream::new(samples, DEFAULT_RATE_HZ);
        assert_eq!(stream.duration_us(), 20);
        assert_eq!(stream.samples()[0].ts_us, 10);
    }
}
