use alloc::vec::Vec;

use super::{ImportanceReport, ScoringMethod, SppcError};
use crate::model::BehaviorDataset;

/// Token-level Levenshtein distance (unit insert/delete/substitute costs).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max(len)`; two empty lists are identical.
pub fn similarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Uniqueness score `1 - max_{j≠i} sim(s_i, s_j)` over rendered elements.
pub fn score_similarity(ds: &BehaviorDataset) -> Result<ImportanceReport, SppcError> {
    let n = ds.len();
    if n < 2 {
        return Err(SppcError::DatasetTooSmall(n));
    }
    let elements: Vec<Vec<&str>> = ds.sequences.iter().map(|s| s.elements().collect()).collect();
    let mut best = alloc::vec![f64::NEG_INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = similarity(&elements[i], &elements[j]);
            best[i] = best[i].max(s);
            best[j] = best[j].max(s);
        }
    }
    let scores: Vec<f64> = best.into_iter().map(|b| 1.0 - b).collect();
    Ok(ImportanceReport::from_scores(ds, &scores, ScoringMethod::Similarity, None, 0, Vec::new()))
}
