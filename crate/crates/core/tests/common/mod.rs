#![allow(dead_code)]

use iotgen_core::ingest::{simulate_fixture, standard_dictionary, FixtureSpec};
use iotgen_core::model::{Behavior, BehaviorDataset, BehaviorSequence, DeviceDictionary, Weekday};
use proptest::prelude::*;

/// Sorted timestamps plus arbitrary valid (device, control) pairs.
pub fn valid_sequence(dict: &DeviceDictionary, len: usize) -> impl Strategy<Value = BehaviorSequence> {
    let pairs: Vec<(String, String)> = dict.pairs().map(|(d, c)| (d.to_string(), c.to_string())).collect();
    let slots: Vec<String> = dict.slots().to_vec();
    let days = dict.days().to_vec();
    proptest::collection::vec((0..days.len(), 0..slots.len(), 0..pairs.len()), len).prop_map(move |mut raw| {
        raw.sort_by_key(|&(d, s, _)| (days[d].index(), s));
        let behaviors = raw
            .into_iter()
            .map(|(d, s, p)| Behavior::new(days[d], &slots[s], &pairs[p].0, &pairs[p].1))
            .collect();
        BehaviorSequence::new("p", behaviors)
    })
}

/// Twenty copies of one base pattern (`a00`..`a19`) plus one distinct
/// sequence `b`.
pub fn twenty_a_one_b() -> (DeviceDictionary, BehaviorDataset) {
    let dict = standard_dictionary();
    let bases = simulate_fixture(&FixtureSpec::new(2, 1, 0.0, 0), &dict).unwrap().bases;
    let mut seqs: Vec<BehaviorSequence> = (0..20)
        .map(|i| BehaviorSequence::new(format!("a{i:02}"), bases[0].behaviors.clone()))
        .collect();
    seqs.push(BehaviorSequence::new("b", bases[1].behaviors.clone()));
    (dict, BehaviorDataset::new(seqs, "20A+1B").unwrap())
}

/// Spearman correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn monday(id: &str, pairs: &[(&str, &str)]) -> BehaviorSequence {
    let slots = ["(0-3)", "(3-6)", "(6-9)", "(9-12)", "(12-15)", "(15-18)", "(18-21)", "(21-24)"];
    let behaviors = pairs
        .iter()
        .enumerate()
        .map(|(i, (d, c))| Behavior::new(if i < 8 { Weekday::Monday } else { Weekday::Tuesday }, slots[i % 8], d, c))
        .collect();
    BehaviorSequence::new(id, behaviors)
}
