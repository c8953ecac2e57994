//! Mask exchange file: a JSON document with `resolution` (`[w, h]`),
//! `classes` (label to description) and `frames`, each frame listing
//! instances with `id`, `label`, `score`, `bbox` (`[x0, y0, x1, y1]`,
//! inclusive) and `rle` (`{"size": [h, w], "counts": [...]}`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use gazemap_core::mask::{Violation, ViolationKind};
use gazemap_core::{BBox, FrameMasks, Instance, MaskSet, Resolution, RleMask};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MaskFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("mask file syntax: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("mask file invalid: {0}")]
    Invalid(ViolationList),
}

/// Violations found while loading, displayed one per line.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationList(pub Vec<Violation>);

impl fmt::Display for ViolationList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        write!(f, "{n} violation{}", if n == 1 { "" } else { "s" })?;
        for v in &self.0 {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskDoc {
    resolution: [u32; 2],
    #[serde(default)]
    classes: BTreeMap<String, String>,
    frames: Vec<FrameDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameDoc {
    frame: u32,
    instances: Vec<InstanceDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    id: String,
    label: String,
    score: f64,
    bbox: [u32; 4],
    rle: RleDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct RleDoc {
    size: [u32; 2],
    counts: Vec<u32>,
}

/// Parses without enforcing invariants; returns the set together with every
/// violation found (including duplicate frames, which the set cannot hold).
pub fn parse_maskset_unchecked(text: &str) -> Result<(MaskSet, Vec<Violation>), MaskFileError> {
    let doc: MaskDoc = serde_json::from_str(text)?;
    let resolution = Resolution::new(doc.resolution[0], doc.resolution[1]);
    let mut set = MaskSet::new(resolution, doc.classes);
    let mut duplicates = Vec::new();
    for frame in doc.frames {
        let instances = frame
            .instances
            .into_iter()
            .map(|inst| {
                let [x0, y0, x1, y1] = inst.bbox;
                Instance {
                    id: inst.id,
                    label: inst.label,
                    score: inst.score,
                    mask: RleMask {
                        height: inst.rle.size[0],
                        width: inst.rle.size[1],
                        counts: inst.rle.counts,
                    },
                    bbox: BBox::new(x0, y0, x1, y1),
                }
            })
            .collect();
        if set.insert(FrameMasks::new(frame.frame, instances)).is_some() {
            duplicates.push(Violation::new(Some(frame.frame), None, ViolationKind::DuplicateFrame));
        }
    }
    let mut violations = duplicates;
    violations.extend(set.validate());
    violations.sort_by_key(|v| (v.frame, v.instance));
    Ok((set, violations))
}

pub fn parse_maskset(text: &str) -> Result<MaskSet, MaskFileError> {
    let (set, violations) = parse_maskset_unchecked(text)?;
    if violations.is_empty() {
        Ok(set)
    } else {
        Err(MaskFileError::Invalid(ViolationList(violations)))
    }
}

pub fn load_maskset(path: &Path) -> Result<MaskSet, MaskFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| MaskFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_maskset(&text)
}

pub fn validate_maskset(set: &MaskSet) -> Vec<Violation> {
    set.validate()
}

/// Compact, deterministic serialization (frames ascending).
pub fn write_maskset(set: &MaskSet) -> String {
    let doc = MaskDoc {
        resolution: [set.resolution.width, set.resolution.height],
        classes: set.class_table.clone(),
        frames: set
            .frames
            .values()
            .map(|f| FrameDoc {
                frame: f.frame_index,
                instances: f
                    .instances
                    .iter()
                    .map(|inst| InstanceDoc {
                        id: inst.id.clone(),
                        label: inst.label.clone(),
                        score: inst.score,
                        bbox: [inst.bbox.x0, inst.bbox.y0, inst.bbox.x1, inst.bbox.y1],
                        rle: RleDoc {
                            size: [inst.mask.height, inst.mask.width],
                            counts: inst.mask.counts.clone(),
                        },
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&doc).expect("mask document serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use gazemap_core::Bitmap;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{
        "resolution": [4, 3],
        "classes": {"H1": "motion hazard"},
        "frames": [
            {"frame": 0, "instances": [
                {"id": "a", "label": "H1", "score": 0.9, "bbox": [1, 0, 1, 0],
                 "rle": {"size": [3, 4], "counts": [3, 1, 8]}}
            ]}
        ]
    }"#;

    #[test]
    fn minimal_file_loads() {
        let set = parse_maskset(MINIMAL).unwrap();
        assert_eq!(set.frames.len(), 1);
        assert_eq!(set.resolution, Resolution::new(4, 3));
        assert_eq!(set.frame(0).unwrap().instances[0].mask.area(), 1);
    }

    #[test]
    fn counts_sum_mismatch_names_location() {
        let bad = MINIMAL.replace("[3, 1, 8]", "[3, 1, 7]");
        let err = parse_maskset(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("frame 0, instance 0"), "{msg}");
        assert!(msg.contains("sum to 11"), "{msg}");
    }

    #[test]
    fn duplicate_frames_are_reported() {
        let doc = r#"{"resolution": [2, 2], "frames": [
            {"frame": 5, "instances": []}, {"frame": 5, "instances": []}]}"#;
        let (_, violations) = parse_maskset_unchecked(doc).unwrap();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].kind, ViolationKind::DuplicateFrame);
    }

    #[test]
    fn syntax_error_is_fatal() {
        assert!(matches!(
            parse_maskset("{\"resolution\": [1,"),
            Err(MaskFileError::Syntax(_))
        ));
    }

    fn maskset_strategy() -> impl Strategy<Value = MaskSet> {
        let frame = (
            0u32..50,
            prop::collection::vec((prop::collection::vec(any::<bool>(), 48), 0.0f64..=1.0), 0..3),
        );
        prop::collection::vec(frame, 0..5).prop_map(|frames| {
            let mut classes = BTreeMap::new();
            classes.insert("H1".to_string(), "motion".to_string());
            let mut set = MaskSet::new(Resolution::new(8, 6), classes);
            for (index, instances) in frames {
                let instances = instances
                    .into_iter()
                    .enumerate()
                    .filter_map(|(i, (bits, score))| {
                        let bitmap = Bitmap::from_fn(8, 6, |x, y| bits[(x * 6 + y) as usize]);
                        Instance::from_mask(format!("i{i}"), "H1", score, RleMask::encode(&bitmap)).ok()
                    })
                    .collect();
                set.insert(FrameMasks::new(index, instances));
            }
            set
        })
    }

    proptest! {
        #[test]
        fn save_then_load_round_trips(set in maskset_strategy()) {
            let text = write_maskset(&set);
            prop_assert_eq!(parse_maskset(&text).unwrap(), set);
        }
    }
}
