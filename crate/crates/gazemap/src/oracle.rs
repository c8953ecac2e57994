//! Brute-force reference mapping for differential testing.
//!
//! Shares only the file parsers with the main pipeline. Every mask is
//! decoded into a full bitmap, gaze lookup scans the whole track, and
//! fixations come from plain loops over the per-frame verdicts.

use std::collections::{BTreeMap, BTreeSet};

use gazemap_core::{
    Eye, Fixation, FixationTarget, FrameHit, GazeSample, GazeStream, MaskSet, Pixel, SampleKind, Target, TrialMetrics,
    TrialRecord,
};

use crate::config::{DurationName, RunConfigFile, TieBreakName};
use crate::gaze_log::{parse_gaze_str, GazeLogError};
use crate::mask_file::{parse_maskset, MaskFileError};
use crate::meta::{MetaError, VideoMeta};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Gaze(#[from] GazeLogError),
    #[error(transparent)]
    Masks(#[from] MaskFileError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error("mask and video resolution differ")]
    Resolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub record: TrialRecord,
    pub metrics: TrialMetrics,
}

struct Decoded {
    label: String,
    id: String,
    score: f64,
    area: u64,
    bits: Vec<bool>,
}

fn decode(counts: &[u32], len: usize) -> Vec<bool> {
    let mut bits = Vec::with_capacity(len);
    let mut value = false;
    for &c in counts {
        for _ in 0..c {
            bits.push(value);
        }
        value = !value;
    }
    bits.resize(len, false);
    bits
}

/// Square dilation by brute force: a pixel is set when any pixel within
/// Chebyshev distance `r` is set.
fn dilate(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let mut rows = vec![false; bits.len()];
    for x in 0..w {
        for y in 0..h {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            rows[x * h + y] = (lo..=hi).any(|xx| bits[xx * h + y]);
        }
    }
    let mut out = vec![false; bits.len()];
    for x in 0..w {
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r).min(h - 1);
            out[x * h + y] = (lo..=hi).any(|yy| rows[x * h + yy]);
        }
    }
    out
}

fn track(stream: &GazeStream) -> Vec<(i64, f64, f64)> {
    let gp: Vec<&GazeSample> = stream.samples().iter().filter(|s| s.kind == SampleKind::Gp).collect();
    let binocular = |s: &GazeSample| matches!(s.eye, None | Some(Eye::Combined));
    if gp.iter().any(|s| binocular(s)) {
        return gp
            .iter()
            .filter(|s| s.valid && binocular(s))
            .map(|s| (s.ts_us, s.values[0], s.values[1]))
            .collect();
    }
    let mut sums: BTreeMap<i64, (f64, f64, f64)> = BTreeMap::new();
    for s in gp.iter().filter(|s| s.valid) {
        let e = sums.entry(s.ts_us).or_default();
        e.0 += s.values[0];
        e.1 += s.values[1];
        e.2 += 1.0;
    }
    sums.into_iter().map(|(t, (x, y, n))| (t, x / n, y / n)).collect()
}

fn to_px(v: f64, extent: u32) -> u32 {
    let f = (v * f64::from(extent)).floor();
    if f.is_nan() || f < 0.0 {
        0
    } else if f >= f64::from(extent) {
        extent - 1
    } else {
        f as u32
    }
}

pub fn oracle_map(
    gaze_text: &str,
    masks_text: &str,
    meta_text: &str,
    config: &RunConfigFile,
) -> Result<OracleOutput, OracleError> {
    let (stream, _) = parse_gaze_str(gaze_text)?;
    let masks: MaskSet = parse_maskset(masks_text)?;
    let meta: VideoMeta = serde_json::from_str(meta_text).map_err(MetaError::from)?;
    meta.timeline().map_err(MetaError::from)?;
    let [w, h] = meta.resolution;
    if masks.resolution.width != w || masks.resolution.height != h {
        return Err(OracleError::Resolution);
    }
    Ok(map_parsed(&stream, &masks, &meta, config))
}

fn map_parsed(stream: &GazeStream, masks: &MaskSet, meta: &VideoMeta, config: &RunConfigFile) -> OracleOutput {
    let [w, h] = meta.resolution;
    let (wu, hu) = (w as usize, h as usize);
    let n = meta.frame_count;
    let frame_ts = |i: u32| meta.t0_us + (f64::from(i) * 1e6 / meta.fps).round() as i64;
    let period = (1e6 / meta.fps).round() as i64;
    let track = track(stream);

    let mut hits = Vec::with_capacity(n as usize);
    for i in 0..n {
        let ts = frame_ts(i);
        let mut best: Option<(i64, f64, f64)> = None;
        for &(t, x, y) in &track {
            let d = (t - ts).abs();
            if best.is_none_or(|b| d < (b.0 - ts).abs()) {
                best = Some((t, x, y));
            }
        }
        let px = best
            .filter(|b| (b.0 - ts).abs() <= config.max_staleness_us)
            .map(|b| Pixel::new(to_px(b.1, w), to_px(b.2, h)));

        let decoded: Vec<Decoded> = masks
            .frame(i)
            .map(|fm| {
                fm.instances
                    .iter()
                    .map(|inst| {
                        let mut bits = decode(&inst.mask.counts, wu * hu);
                        if config.dilation_radius > 0 {
                            bits = dilate(&bits, wu, hu, config.dilation_radius as usize);
                        }
                        Decoded {
                            label: inst.label.clone(),
                            id: inst.id.clone(),
                            score: inst.score,
                            area: bits.iter().filter(|b| **b).count() as u64,
                            bits,
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        let target = match px {
            None => Target::NoGaze,
            Some(p) => {
                let mut covering: Vec<&Decoded> = decoded
                    .iter()
                    .filter(|d| d.score >= config.score_threshold && d.bits[p.x as usize * hu + p.y as usize])
                    .collect();
                covering.sort_by(|a, b| {
                    let score = b.score.total_cmp(&a.score);
                    let area = a.area.cmp(&b.area);
                    match config.tie_break {
                        TieBreakName::ScoreAreaId => score.then(area),
                        TieBreakName::AreaScoreId => area.then(score),
                    }
                    .then(a.id.cmp(&b.id))
                });
                covering
                    .first()
                    .map_or(Target::OffTarget, |d| Target::Aoi(d.label.clone()))
            }
        };
        hits.push(FrameHit {
            frame_index: i,
            gaze_px: px,
            target,
        });
    }

    let duration = |frames: u32| match config.duration_convention {
        DurationName::Inclusive => i64::from(frames) * period,
        DurationName::TimestampDifference => i64::from(frames - 1) * period,
    };
    let fixation = |a: usize, b: usize, target: FixationTarget| {
        let pts: Vec<Pixel> = hits[a..=b].iter().filter_map(|h| h.gaze_px).collect();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for p in &pts {
            cx += f64::from(p.x);
            cy += f64::from(p.y);
        }
        let centroid_px = if pts.is_empty() {
            (0.0, 0.0)
        } else {
            (cx / pts.len() as f64, cy / pts.len() as f64)
        };
        let start = frame_ts(a as u32);
        let d = duration((b - a + 1) as u32);
        Fixation {
            target,
            first_frame: a as u32,
            last_frame: b as u32,
            start_us: start,
            end_us: start + d,
            duration_us: d,
            centroid_px,
        }
    };

    // AOI runs
    let mut fixations = Vec::new();
    let mut consumed = vec![false; n as usize];
    let mut i = 0;
    while i < hits.len() {
        let Target::Aoi(label) = &hits[i].target else {
            i += 1;
            continue;
        };
        let mut last = i;
        let mut on = 1;
        loop {
            let mut k = last + 1;
            let mut skipped = 0;
            while k < hits.len() && hits[k].target == Target::NoGaze && skipped < config.gap_tolerance {
                k += 1;
                skipped += 1;
            }
            if k < hits.len() && hits[k].target == Target::Aoi(label.clone()) {
                last = k;
                on += 1;
            } else {
                break;
            }
        }
        if on >= config.min_consecutive {
            fixations.push(fixation(i, last, FixationTarget::Aoi(label.clone())));
            consumed[i..=last].iter_mut().for_each(|c| *c = true);
        }
        i = last + 1;
    }

    // dispersion threshold over the remaining frames
    let mut min_frames = 1u32;
    while (duration(min_frames) as f64) < config.min_duration_ms * 1000.0 {
        min_frames += 1;
    }
    let min_frames = min_frames as usize;
    let spread = |a: usize, b: usize| -> f64 {
        let pts: Vec<Pixel> = hits[a..=b].iter().map(|h| h.gaze_px.expect("eligible")).collect();
        let xs = pts.iter().map(|p| p.x);
        let ys = pts.iter().map(|p| p.y);
        f64::from(xs.clone().max().unwrap() - xs.min().unwrap())
            + f64::from(ys.clone().max().unwrap() - ys.min().unwrap())
    };
    let eligible = |k: usize| !consumed[k] && hits[k].gaze_px.is_some();
    let mut s = 0;
    while s < hits.len() {
        if !eligible(s) {
            s += 1;
            continue;
        }
        let mut e = s;
        while e + 1 < hits.len() && eligible(e + 1) {
            e += 1;
        }
        let mut a = s;
        while a + min_frames - 1 <= e {
            if spread(a, a + min_frames - 1) > config.dispersion_px {
                a += 1;
                continue;
            }
            let mut b = a + min_frames - 1;
            while b < e && spread(a, b + 1) <= config.dispersion_px {
                b += 1;
            }
            fixations.push(fixation(a, b, FixationTarget::OffTarget));
            a = b + 1;
        }
        s = e + 1;
    }
    fixations.sort_by_key(|f| (f.start_us, f.first_frame));

    let mut aoi_labels: BTreeSet<String> = masks.class_table.keys().cloned().collect();
    for f in &fixations {
        if let FixationTarget::Aoi(l) = &f.target {
            aoi_labels.insert(l.clone());
        }
    }
    let trial_duration_us = i64::from(n) * period;

    let mut dwell_us: BTreeMap<String, i64> = aoi_labels.iter().map(|l| (l.clone(), 0)).collect();
    let mut on_target = 0u32;
    for f in &fixations {
        if let FixationTarget::Aoi(l) = &f.target {
            *dwell_us.get_mut(l).expect("label collected") += f.end_us - f.start_us;
            on_target += 1;
        }
    }
    let fc = fixations.len() as u32;
    let metrics = TrialMetrics {
        trial_duration_us,
        dwell_us,
        fixation_count: fc,
        on_target_count: on_target,
        tfr_exact: if fc == 0 {
            0.0
        } else {
            f64::from(on_target) / f64::from(fc)
        },
        tfr_hundredths: (on_target * 100).checked_div(fc).unwrap_or(0),
    };
    OracleOutput {
        record: TrialRecord {
            hits,
            fixations,
            trial_duration_us,
            aoi_labels,
        },
        metrics,
    }
}
