//! Newline-delimited gaze log reader and writer.
//!
//! One JSON object per line with `ts` (integer microseconds), `type`
//! (`pc|pd|gp|gp3|gd`), `s` (0 = valid) and a value under the key named by
//! the type. `eye` (`left|right`) is optional. Lines starting with `#` are
//! comments. Malformed lines are skipped and recorded; more than half of the
//! records being malformed is fatal.

use std::fmt::Write as _;
use std::io::BufRead;

use gazemap_core::gaze::DEFAULT_RATE_HZ;
use gazemap_core::{Eye, GazeSample, GazeStream, SampleKind};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum GazeLogError {
    #[error("reading gaze log: {0}")]
    Io(#[from] std::io::Error),
    #[error("no records")]
    NoRecords,
    #[error("{malformed} of {total} records malformed; not a gaze log? (first: {first})")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        first: ParseIssue,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Soft errors collected while parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub records: usize,
    pub comments: usize,
    pub malformed: Vec<ParseIssue>,
}

#[derive(Deserialize)]
struct RawRecord {
    ts: i64,
    #[serde(rename = "type")]
    kind: String,
    s: i64,
    #[serde(default)]
    eye: Option<String>,
    #[serde(default)]
    pc: Option<Vec<f64>>,
    #[serde(default)]
    pd: Option<f64>,
    #[serde(default)]
    gp: Option<Vec<f64>>,
    #[serde(default)]
    gp3: Option<Vec<f64>>,
    #[serde(default)]
    gd: Option<Vec<f64>>,
}

fn parse_record(line: &str) -> Result<GazeSample, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if raw.ts < 0 {
        return Err(format!("negative timestamp {}", raw.ts));
    }
    let kind = SampleKind::from_name(&raw.kind).ok_or_else(|| format!("unknown type {:?}", raw.kind))?;
    let eye = match raw.eye.as_deref() {
        None => None,
        Some("left") => Some(Eye::Left),
        Some("right") => Some(Eye::Right),
        Some(other) => return Err(format!("unknown eye {other:?}")),
    };
    let values = match kind {
        SampleKind::Pc => raw.pc,
        SampleKind::Pd => raw.pd.map(|v| vec![v]),
        SampleKind::Gp => raw.gp,
        SampleKind::Gp3 => raw.gp3,
        SampleKind::Gd => raw.gd,
    }
    .ok_or_else(|| format!("missing {:?} value", kind.as_str()))?;
    if values.len() != kind.arity() {
        return Err(format!(
            "{} expects {} values, got {}",
            kind.as_str(),
            kind.arity(),
            values.len()
        ));
    }
    Ok(GazeSample::new(raw.ts, kind, eye, values, raw.s == 0))
}

/// Parses a gaze log into a sorted stream plus the soft-error ledger.
pub fn parse_gaze_stream(input: impl BufRead) -> Result<(GazeStream, ParseReport), GazeLogError> {
    let mut report = ParseReport::default();
    let mut samples = Vec::new();
    for (i, line) in input.split(b'\n').enumerate() {
        let bytes = line?;
        let line_no = i + 1;
        let text = match std::str::from_utf8(&bytes) {
            Ok(t) => t.trim(),
            Err(e) => {
                report.malformed.push(ParseIssue {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if text.is_empty() {
            continue;
        }
        if text.starts_with('#') {
            report.comments += 1;
            continue;
        }
        match parse_record(text) {
            Ok(s) => samples.push(s),
            Err(message) => report.malformed.push(ParseIssue { line: line_no, message }),
        }
    }
    report.records = samples.len();
    let total = samples.len() + report.malformed.len();
    if samples.is_empty() {
        return Err(match report.malformed.first() {
            Some(first) => GazeLogError::TooManyMalformed {
                malformed: report.malformed.len(),
                total,
                first: first.clone(),
            },
            None => GazeLogError::NoRecords,
        });
    }
    if report.malformed.len() * 2 > total {
        return Err(GazeLogError::TooManyMalformed {
            malformed: report.malformed.len(),
            total,
            first: report.malformed[0].clone(),
        });
    }
    Ok((GazeStream::new(samples, DEFAULT_RATE_HZ), report))
}

pub fn parse_gaze_str(input: &str) -> Result<(GazeStream, ParseReport), GazeLogError> {
    parse_gaze_stream(input.as_bytes())
}

fn json_f64(v: f64) -> String {
    serde_json::to_string(&v).expect("finite values")
}

/// Appends one record line, keys in `ts, type, [eye], value, s` order.
pub fn write_record(out: &mut String, s: &GazeSample) {
    let _ = write!(out, "{{\"ts\":{},\"type\":\"{}\"", s.ts_us, s.kind.as_str());
    if let Some(eye) = s.eye.filter(|e| *e != Eye::Combined) {
        let _ = write!(out, ",\"eye\":\"{}\"", eye.as_str());
    }
    let _ = write!(out, ",\"{}\":", s.kind.as_str());
    if s.kind == SampleKind::Pd {
        out.push_str(&json_f64(s.values[0]));
    } else {
        out.push('[');
        for (i, v) in s.values.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&json_f64(*v));
        }
        out.push(']');
    }
    let _ = writeln!(out, ",\"s\":{}}}", u8::from(!s.valid));
}

pub fn write_gaze_log(stream: &GazeStream) -> String {
    let mut out = String::with_capacity(stream.len() * 64);
    for s in stream.samples() {
        write_record(&mut out, s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gp_record_maps_fields() {
        let (stream, report) = parse_gaze_str(r#"{"ts":1000000,"type":"gp","gp":[0.5,0.5],"s":0}"#).unwrap();
        assert_eq!(report.records, 1);
        let s = &stream.samples()[0];
        assert_eq!(s.ts_us, 1_000_000);
        assert_eq!(s.kind, SampleKind::Gp);
        assert_eq!(s.values, vec![0.5, 0.5]);
        assert!(s.valid);
        assert_eq!(s.eye, None);
    }

    #[test]
    fn empty_input_is_fatal() {
        assert!(matches!(parse_gaze_str(""), Err(GazeLogError::NoRecords)));
        assert!(matches!(
            parse_gaze_str("# only a comment\n\n"),
            Err(GazeLogError::NoRecords)
        ));
    }

    #[test]
    fn fractional_timestamp_is_malformed() {
        let input = concat!(
            r#"{"ts":10.5,"type":"gp","gp":[0.5,0.5],"s":0}"#,
            "\n",
            r#"{"ts":20,"type":"gp","gp":[0.5,0.5],"s":0}"#,
            "\n",
            r#"{"ts":30,"type":"pd","eye":"left","pd":3.2,"s":0}"#
        );
        let (stream, report) = parse_gaze_str(input).unwrap();
        assert_eq!(stream.len(), 2);
        assert_eq!(report.malformed.len(), 1);
        assert_eq!(report.malformed[0].line, 1);
    }

    #[test]
    fn majority_malformed_is_fatal() {
        let input = "a,b,c\n1,2,3\n{\"ts\":0,\"type\":\"gp\",\"gp\":[0.1,0.1],\"s\":0}\n";
        assert!(matches!(
            parse_gaze_str(input),
            Err(GazeLogError::TooManyMalformed {
                malformed: 2,
                total: 3,
                ..
            })
        ));
    }

    #[test]
    fn wrong_arity_and_unknown_type_are_malformed() {
        let input = concat!(
            r#"{"ts":0,"type":"gp","gp":[0.5],"s":0}"#,
            "\n",
            r#"{"ts":0,"type":"xy","xy":[0.5,0.5],"s":0}"#,
            "\n",
            r#"{"ts":0,"type":"gp","gp":[0.5,0.5],"s":0}"#,
            "\n",
            r#"{"ts":0,"type":"gd","eye":"left","gd":[0.0,0.0,1.0],"s":0}"#,
            "\n",
            r#"{"ts":0,"type":"gp3","gp3":[1.0,2.0,600.0],"s":0}"#,
        );
        let (stream, report) = parse_gaze_str(input).unwrap();
        assert_eq!(stream.len(), 3);
        assert_eq!(report.malformed.len(), 2);
    }

    #[test]
    fn out_of_range_gp_is_retained_invalid() {
        let (stream, _) = parse_gaze_str(r#"{"ts":0,"type":"gp","gp":[1.5,0.5],"s":0}"#).unwrap();
        assert!(!stream.samples()[0].valid);
        assert_eq!(stream.samples()[0].values, vec![1.5, 0.5]);
    }

    #[test]
    fn record_layout() {
        let s = GazeSample::new(1_000_000, SampleKind::Gp, None, vec![0.5, 0.5], true);
        let mut out = String::new();
        write_record(&mut out, &s);
        assert_eq!(out, "{\"ts\":1000000,\"type\":\"gp\",\"gp\":[0.5,0.5],\"s\":0}\n");
    }

    fn sample_strategy() -> impl Strategy<Value = GazeSample> {
        let kind = prop::sample::select(SampleKind::ALL.to_vec());
        let eye = prop::option::of(prop::sample::select(vec![Eye::Left, Eye::Right]));
        (
            0i64..10_000_000,
            kind,
            eye,
            any::<bool>(),
            prop::collection::vec(-2.0f64..2.0, 3),
        )
            .prop_map(|(ts, kind, eye, ok, mut values)| {
                values.truncate(kind.arity());
                GazeSample::new(ts, kind, eye, values, ok)
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(samples in prop::collection::vec(sample_strategy(), 1..60)) {
            let stream = GazeStream::new(samples, DEFAULT_RATE_HZ);
            let (parsed, report) = parse_gaze_str(&write_gaze_log(&stream)).unwrap();
            prop_assert!(report.malformed.is_empty());
            prop_assert_eq!(parsed, stream);
        }

        #[test]
        fn parsing_ignores_record_order(samples in prop::collection::vec(sample_strategy(), 1..60), seed in any::<u64>()) {
            let text = write_gaze_log(&GazeStream::new(samples, DEFAULT_RATE_HZ));
            let mut lines: Vec<&str> = text.lines().collect();
            // deterministic shuffle
            let mut state = seed | 1;
            for i in (1..lines.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                lines.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let shuffled = lines.join("\n");
            prop_assert_eq!(parse_gaze_str(&shuffled).unwrap().0, parse_gaze_str(&text).unwrap().0);
        }
    }
}
