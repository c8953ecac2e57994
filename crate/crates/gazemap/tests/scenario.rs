use std::collections::BTreeMap;

use gazemap::gaze_log::parse_gaze_str;
use gazemap::mask_file::parse_maskset;
use gazemap::meta::parse_meta;
use gazemap::report::{load_located_frames, location_name};
use gazemap::scenario::{generate, preset, Scenario, ScenarioSpec, PRESETS};
use gazemap_core::pipeline::map_trial;
use gazemap_core::{MappingConfig, Pixel, SampleKind};

#[test]
fn preset_stream_matches_ledger() {
    let scenario = generate(&preset("participant1").unwrap()).unwrap();
    let ledger = &scenario.truth.ledger;
    let (stream, soft) = parse_gaze_str(&scenario.gaze_log).unwrap();
    assert!(soft.malformed.is_empty());
    let stats = stream.stats();
    assert_eq!(stats.count(SampleKind::Gp) as u32, ledger.gaze_ticks);
    let invalid_gp = stream
        .samples()
        .iter()
        .filter(|s| s.kind == SampleKind::Gp && !s.valid)
        .count();
    assert_eq!(invalid_gp as u32, ledger.invalid_ticks);
    assert!(
        (stats.measured_rate_hz - 100.0).abs() < 0.5,
        "{}",
        stats.measured_rate_hz
    );
    assert_eq!(stats.gap_count, 0);
    // 703 frames at 40 ms, ticks every 10 ms
    assert!((2_800..=2_820).contains(&ledger.gaze_ticks), "{}", ledger.gaze_ticks);
    assert!(stats.count(SampleKind::Pd) > 0);
}

#[test]
fn frame_classification_matches_ledger() {
    for name in PRESETS {
        let scenario = generate(&preset(name).unwrap()).unwrap();
        let (stream, _) = parse_gaze_str(&scenario.gaze_log).unwrap();
        let masks = parse_maskset(&scenario.masks).unwrap();
        let timeline = parse_meta(&scenario.meta).unwrap();
        let record = map_trial(&timeline, &stream.gaze_track(), &masks, &MappingConfig::default()).unwrap();
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for frame in &scenario.truth.frames {
            *counts.entry(frame.label.clone()).or_default() += 1;
        }
        assert_eq!(counts, scenario.truth.ledger.frames_by_target, "{name}");
        assert_eq!(counts.values().sum::<u32>(), timeline.frame_count);
        for (hit, truth) in record.hits.iter().zip(&scenario.truth.frames) {
            let label = match &hit.target {
                gazemap_core::Target::Aoi(l) => l.clone(),
                gazemap_core::Target::OffTarget => "off-target".into(),
                gazemap_core::Target::NoGaze => "no-gaze".into(),
            };
            assert_eq!(label, truth.label, "{name} frame {}", hit.frame_index);
        }
        let aoi: u32 = scenario.truth.ledger.aoi_fixations.values().sum();
        assert_eq!(
            aoi + scenario.truth.ledger.offtarget_fixations,
            scenario.truth.metrics.fixation_count
        );
    }
}

#[test]
fn preset_masks_cover_known_points() {
    let scenario = generate(&preset("participant1").unwrap()).unwrap();
    let masks = parse_maskset(&scenario.masks).unwrap();
    for i in 0..703 {
        let frame = masks.frame(i).unwrap();
        let find = |label: &str| frame.instances.iter().find(|inst| inst.label == label).unwrap();
        assert!(find("H1").mask.get(Pixel::new(1343, 736)), "frame {i}");
        assert!(find("H3").mask.get(Pixel::new(600, 330)), "frame {i}");
        assert!(!find("H2").mask.get(Pixel::new(960, 320)), "frame {i}");
    }
}

#[test]
fn written_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate(&ScenarioSpec::random(7)).unwrap();
    scenario.write_to(dir.path()).unwrap();
    for file in Scenario::FILES {
        assert!(dir.path().join(file).is_file(), "{file}");
    }
    let frames = load_located_frames(&dir.path().join("ground_truth.json")).unwrap();
    assert_eq!(frames, scenario.truth.frames);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("masks.json")).unwrap(),
        scenario.masks
    );
}

#[test]
fn spec_json_reproduces_scenario() {
    for seed in [0, 11, 42] {
        let spec = ScenarioSpec::random(seed);
        let again = ScenarioSpec::from_json(&spec.to_json()).unwrap();
        let (a, b) = (generate(&spec).unwrap(), generate(&again).unwrap());
        assert_eq!(a.gaze_log, b.gaze_log);
        assert_eq!(a.masks, b.masks);
        assert_eq!(a.ground_truth_json(), b.ground_truth_json());
    }
}

#[test]
fn rejects_unsupported_frame_rate() {
    let mut spec = preset("participant3").unwrap();
    spec.timeline.fps = 30.0;
    assert!(generate(&spec).is_err());
    spec.timeline.fps = 25.0;
    spec.gaze_script.pop();
    assert!(generate(&spec).is_err(), "script must tile the timeline");
}

#[test]
fn labels_use_report_names() {
    let scenario = generate(&ScenarioSpec::random(3)).unwrap();
    for frame in &scenario.truth.frames {
        let loc = gazemap::report::parse_location(&frame.label);
        assert_eq!(location_name(&loc), frame.label);
    }
}
