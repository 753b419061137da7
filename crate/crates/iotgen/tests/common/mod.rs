#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iotgen_core::ingest::{simulate_fixture, standard_dictionary, FixtureSpec};
use iotgen_core::model::{render_dataset_text, render_text, BehaviorDataset};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_iotgen"));
    c.env_remove("RUST_LOG");
    c
}

pub fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Distinct valid sequences, unrelated to any fixture under test.
pub fn valid_sequences(n: usize, seed: u64) -> BehaviorDataset {
    simulate_fixture(&FixtureSpec::new(n, 1, 0.0, seed), &standard_dictionary()).unwrap().dataset
}

/// A rendering of `ds.sequences[i]` whose first behavior uses a control the
/// device does not accept.
pub fn mismatched(ds: &BehaviorDataset, i: usize) -> String {
    let s = &ds.sequences[i];
    let first = &s.behaviors[0];
    let bad = if first.device == "Light" { "cooling" } else { "blink" };
    let original = format!("{}, {}, {}, {}", first.when.day, first.when.slot, first.device, first.control);
    let replaced = format!("{}, {}, {}, {bad}", first.when.day, first.when.slot, first.device);
    render_text(s).replacen(&original, &replaced, 1)
}

/// Mock script: three sequences with one invalid in the first reply, the
/// replacement in the second.
pub fn repair_script(dir: &Path) -> (PathBuf, BehaviorDataset) {
    let good = valid_sequences(3, 99);
    let first = format!(
        "Adjusted for the new season.\n[{}, {}, {}]",
        render_text(&good.sequences[0]),
        render_text(&good.sequences[1]),
        mismatched(&good, 2)
    );
    let second = render_dataset_text(&good.sequences[2..]);
    let path = dir.join("script.json");
    std::fs::write(&path, serde_json::to_string(&vec![first, second]).unwrap()).unwrap();
    (path, good)
}

pub fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.json");
    let cfg = serde_json::json!({
        "sppc": {"autoencoder": {"epochs": 2}},
        "eval": {"rho_grid": [0.5, 1.0]}
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

/// Every file under `root` except the manifest, as `/`-separated relative paths.
pub fn files_under(root: &Path) -> Vec<String> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    out.push(rel);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
