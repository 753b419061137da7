use std::fs;

use iotgen::formats::{
    load_dataset, load_dictionary, load_fixture_metadata, load_model, load_report_csv, save_dataset, save_dictionary,
    save_fixture, save_model, save_report_csv, sidecar_path, FormatError, LoadOptions,
};
use iotgen_core::autoencoder::{train, AutoencoderConfig};
use iotgen_core::ingest::{simulate_fixture, standard_dictionary, FixtureSpec};
use iotgen_core::model::{DeviceDictionary, Vocabulary, Weekday};
use iotgen_core::sppc::score_similarity;
use proptest::prelude::*;

mod common;

fn three_line_file(dir: &std::path::Path, second: Option<&str>) -> std::path::PathBuf {
    let ds = common::valid_sequences(3, 5);
    save_dataset(&dir.join("ok.jsonl"), &ds).unwrap();
    let mut lines: Vec<String> = fs::read_to_string(dir.join("ok.jsonl")).unwrap().lines().map(String::from).collect();
    if let Some(l) = second {
        lines[1] = l.to_string();
    }
    let path = dir.join("three.jsonl");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

#[test]
fn three_valid_lines_load_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = three_line_file(dir.path(), None);
    let dict = standard_dictionary();
    let (a, report) = load_dataset(&path, &dict, LoadOptions::strict()).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(report.loaded, 3);
    assert!(report.skipped.is_empty());
    let (b, _) = load_dataset(&path, &dict, LoadOptions::strict()).unwrap();
    assert_eq!(a, b);
    assert!(a.sequences.iter().zip(&common::valid_sequences(3, 5).sequences).all(|(x, y)| x == y));
}

#[test]
fn mismatch_is_named_by_line_in_strict_mode_and_skipped_otherwise() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::valid_sequences(3, 5);
    let mut line: serde_json::Value =
        serde_json::from_str(fs::read_to_string(three_line_file(dir.path(), None)).unwrap().lines().nth(1).unwrap()).unwrap();
    line["seq"][0][2] = "Light".into();
    line["seq"][0][3] = "heating".into();
    let path = three_line_file(dir.path(), Some(&line.to_string()));
    let dict = standard_dictionary();
    match load_dataset(&path, &dict, LoadOptions::strict()) {
        Err(FormatError::Validation { line, detail, .. }) => {
            assert_eq!(line, 2);
            assert!(detail.contains("DEVICE_CONTROL_MISMATCH"), "{detail}");
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
    let (loaded, report) = load_dataset(&path, &dict, LoadOptions::permissive()).unwrap();
    assert_eq!(loaded.len(), 2);
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].line, 2);
    assert_eq!(loaded.sequences[1], ds.sequences[2]);
}

#[test]
fn malformed_json_and_repeated_ids() {
    let dir = tempfile::tempdir().unwrap();
    let dict = standard_dictionary();
    let path = three_line_file(dir.path(), Some("{not json"));
    assert!(matches!(load_dataset(&path, &dict, LoadOptions::strict()), Err(FormatError::Parse { line: 2, .. })));

    let first = fs::read_to_string(dir.path().join("ok.jsonl")).unwrap().lines().next().unwrap().to_string();
    let path = three_line_file(dir.path(), Some(&first));
    assert!(matches!(load_dataset(&path, &dict, LoadOptions::strict()), Err(FormatError::Validation { line: 2, .. })));
    let (ds, report) = load_dataset(&path, &dict, LoadOptions::permissive()).unwrap();
    assert_eq!((ds.len(), report.skipped.len()), (2, 1));

    let missing = dir.path().join("absent.jsonl");
    assert!(matches!(load_dataset(&missing, &dict, LoadOptions::strict()), Err(FormatError::Io { .. })));
}

#[test]
fn short_behaviors_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    fs::write(&path, r#"{"id":"x","seq":[["Monday","(0-3)","Light"]]}"#).unwrap();
    let e = load_dataset(&path, &standard_dictionary(), LoadOptions::strict()).unwrap_err();
    assert!(matches!(e, FormatError::Validation { line: 1, .. }), "{e}");
}

#[test]
fn dictionary_file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let dict = standard_dictionary();
    let path = dir.path().join("dict.json");
    save_dictionary(&path, &dict).unwrap();
    assert_eq!(load_dictionary(&path).unwrap(), dict);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"days":["Funday"],"slots":["a"],"devices":["L"],"controls":{"L":["on"]}}"#).unwrap();
    let e = load_dictionary(&bad).unwrap_err().to_string();
    assert!(e.contains("Funday"), "{e}");

    let small = DeviceDictionary::new(
        vec![Weekday::Monday],
        vec!["a".into()],
        vec!["L".into()],
        [("L".to_string(), vec!["on".to_string()])].into_iter().collect(),
    )
    .unwrap();
    save_dictionary(&path, &small).unwrap();
    assert_eq!(load_dictionary(&path).unwrap(), small);
}

#[test]
fn fixture_sidecar_maps_ids_to_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let dict = standard_dictionary();
    let spec = FixtureSpec::new(3, 4, 0.1, 2);
    let fx = simulate_fixture(&spec, &dict).unwrap();
    let path = dir.path().join("fx.jsonl");
    let meta = save_fixture(&path, &fx, &spec).unwrap();
    assert_eq!(meta, sidecar_path(&path));
    assert_eq!(meta.file_name().unwrap(), "fx.meta.json");
    let m = load_fixture_metadata(&meta).unwrap();
    assert_eq!(m.spec, spec);
    assert_eq!(m.patterns, fx.pattern_map());
}

#[test]
fn model_dump_round_trip_and_vocab_check() {
    let dir = tempfile::tempdir().unwrap();
    let dict = standard_dictionary();
    let vocab = Vocabulary::build(&dict).unwrap();
    let ds = common::valid_sequences(2, 1);
    let cfg = AutoencoderConfig { epochs: 2, embed_dim: 4, hidden_dim: 5, ..Default::default() };
    let model = train(&ds, &vocab, &cfg).unwrap();
    let path = dir.path().join("model.json");
    save_model(&path, &model).unwrap();
    let back = load_model(&path, &vocab).unwrap();
    assert_eq!(back, model);
    let s = &ds.sequences[0];
    assert_eq!(back.reconstruction_loss(&vocab, s).unwrap(), model.reconstruction_loss(&vocab, s).unwrap());

    let controls = dict.devices().iter().map(|d| (d.clone(), dict.controls(d).unwrap().to_vec())).collect();
    let other = DeviceDictionary::new(dict.days().to_vec(), dict.slots()[..4].to_vec(), dict.devices().to_vec(), controls).unwrap();
    let other_vocab = Vocabulary::build(&other).unwrap();
    assert!(matches!(load_model(&path, &other_vocab), Err(FormatError::Model { .. })));
}

#[test]
fn report_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::valid_sequences(4, 3);
    let report = score_similarity(&ds).unwrap();
    let path = dir.path().join("scores.csv");
    save_report_csv(&path, &report, "similarity").unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("id,score,rank,method,seed\n"));
    let rows = load_report_csv(&path).unwrap();
    assert_eq!(rows.len(), 4);
    for (row, e) in rows.iter().zip(&report.entries) {
        assert_eq!((&row.id, row.score, row.rank), (&e.id, e.score, e.rank));
        assert_eq!(row.method, "similarity");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Simulated fixtures survive save -> strict load unchanged.
    #[test]
    fn fixtures_round_trip_through_jsonl(patterns in 1usize..6, copies in 1usize..5, noise in 0.0f64..0.5, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let dict = standard_dictionary();
        let fx = simulate_fixture(&FixtureSpec::new(patterns, copies, noise, seed), &dict).unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&path, &fx.dataset).unwrap();
        let (back, report) = load_dataset(&path, &dict, LoadOptions::strict()).unwrap();
        prop_assert!(report.skipped.is_empty());
        prop_assert_eq!(back.sequences, fx.dataset.sequences);
    }
}
