use iotgen_core::ingest::*;
use iotgen_core::model::*;

#[test]
fn noise_changes_one_behavior_per_copy_on_average() {
    let dict = standard_dictionary();
    let f = simulate_fixture(&FixtureSpec::new(10, 1000, 0.1, 11), &dict).unwrap();
    assert_eq!(f.dataset.len(), 10_000);
    let changed: usize = f
        .dataset
        .sequences
        .iter()
        .zip(&f.pattern_of)
        .map(|(s, &p)| s.behaviors.iter().zip(&f.bases[p].behaviors).filter(|(a, b)| a != b).count())
        .sum();
    let mean = changed as f64 / 10_000.0;
    assert!((mean - 1.0).abs() <= 0.05, "mean changed behaviors {mean}");
    assert!(f.dataset.sequences.iter().all(|s| dict.is_valid(s, ShapePolicy::Canonical)));
}

#[test]
fn zero_noise_yields_exact_patterns() {
    let dict = standard_dictionary();
    let f = simulate_fixture(&FixtureSpec::new(5, 20, 0.0, 7), &dict).unwrap();
    assert_eq!(f.dataset.len(), 100);
    let distinct: std::collections::BTreeSet<String> = f.dataset.sequences.iter().map(render_text).collect();
    assert_eq!(distinct.len(), 5);
    assert_eq!(simulate_fixture(&FixtureSpec::new(1, 1, 0.0, 7), &dict).unwrap().dataset.len(), 1);
    assert_eq!(simulate_fixture(&FixtureSpec::new(5, 20, 0.0, 7), &dict).unwrap(), f);
}

#[test]
fn token_estimate_is_additive() {
    let dict = standard_dictionary();
    let ds = simulate_fixture(&FixtureSpec::new(3, 4, 0.2, 1), &dict).unwrap().dataset;
    let empty = BehaviorDataset::new(Vec::new(), "").unwrap();
    assert_eq!(estimate_tokens(&empty).tokens, 0);
    let one = estimate_tokens(&ds);
    let mut doubled = ds.sequences.clone();
    doubled.extend(ds.sequences.iter().map(|s| BehaviorSequence::new(format!("{}-dup", s.id), s.behaviors.clone())));
    let two = estimate_tokens(&BehaviorDataset::new(doubled, "").unwrap());
    assert_eq!(two, one + one);
    assert_eq!(one.elements, 12 * 40);
    let halves = estimate_tokens(&ds.select(&(0..6).collect::<Vec<_>>())) + estimate_tokens(&ds.select(&(6..12).collect::<Vec<_>>()));
    assert_eq!(halves, one);
}
