//! Structure Pattern Perception Compression.
//!
//! A sequence's importance is the reconstruction loss of an autoencoder that
//! never saw it: remove it (or its fold), train on the rest, reconstruct it.
//! Well-represented sequences reconstruct cheaply; sequences carrying a
//! pattern found nowhere else do not. Compression keeps the top-ranked
//! fraction.
//!
//! The edit-distance [`score_similarity`] baseline ranks by dissimilarity to
//! the nearest other sequence instead, and is blind to whether a small
//! difference (say, a shifted time slot) carries a distinct pattern.

mod similarity;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

pub use similarity::{levenshtein, similarity, score_similarity};

use crate::autoencoder::{train, AutoencoderConfig, AutoencoderError};
use crate::model::{BehaviorDataset, Vocabulary};
use crate::runner::JobRunner;
use crate::seed;

/// Default number of folds for [`score_kfold`].
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ScoringMethod {
    ExactLoo,
    KFold(usize),
    Similarity,
}

impl fmt::Display for ScoringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoringMethod::ExactLoo => f.write_str("exact-loo"),
            ScoringMethod::KFold(k) => write!(f, "kfold({k})"),
            ScoringMethod::Similarity => f.write_str("similarity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportEntry {
    pub id: String,
    pub score: f64,
    /// 1-based; rank 1 is the most important sequence.
    pub rank: usize,
}

/// Which sequences one scoring model was trained on and which it scored.
/// Indices refer to the scored dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRecord {
    pub seed: u64,
    pub trained_on: Vec<usize>,
    pub held_out: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    /// Sorted by rank (descending score, ties by ascending id).
    pub entries: Vec<ReportEntry>,
    pub method: ScoringMethod,
    /// Autoencoder settings for the model-based methods.
    pub config: Option<AutoencoderConfig>,
    pub seed: u64,
    pub folds: Vec<FoldRecord>,
}

impl ImportanceReport {
    fn from_scores(ds: &BehaviorDataset, scores: &[f64], method: ScoringMethod, config: Option<AutoencoderConfig>, seed: u64, folds: Vec<FoldRecord>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b].total_cmp(&scores[a]).then_with(|| ds.sequences[a].id.cmp(&ds.sequences[b].id))
        });
        let entries = order
            .into_iter()
            .enumerate()
            .map(|(r, i)| ReportEntry { id: ds.sequences[i].id.clone(), score: scores[i], rank: r + 1 })
            .collect();
        ImportanceReport { entries, method, config, seed, folds }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.rank)
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.score)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SppcError {
    #[error("need at least 2 sequences to score, got {0}")]
    DatasetTooSmall(usize),
    #[error("K must satisfy 2 <= K <= {n}, got {k}")]
    InvalidK { k: usize, n: usize },
    #[error("training the model that holds out {id:?} failed: {source}")]
    Training { id: String, source: AutoencoderError },
    #[error("report does not cover exactly the dataset's ids")]
    ReportMismatch,
    #[error("retention must lie in (0, 1], got {0}")]
    InvalidRetention(f64),
}

/// Trains on everything outside `held_out` and returns the held-out losses.
fn score_fold(
    ds: &BehaviorDataset,
    vocab: &Vocabulary,
    cfg: &AutoencoderConfig,
    held_out: &[usize],
    fold_seed: u64,
) -> Result<(Vec<f64>, FoldRecord), SppcError> {
    let excluded: BTreeSet<usize> = held_out.iter().copied().collect();
    let trained_on: Vec<usize> = (0..ds.len()).filter(|i| !excluded.contains(i)).collect();
    let blame = || ds.sequences[held_out[0]].id.clone();
    let model = train(&ds.select(&trained_on), vocab, &cfg.clone().with_seed(fold_seed))
        .map_err(|source| SppcError::Training { id: blame(), source })?;
    let losses = held_out
        .iter()
        .map(|&i| {
            model
                .reconstruction_loss(vocab, &ds.sequences[i])
                .map_err(|source| SppcError::Training { id: ds.sequences[i].id.clone(), source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((losses, FoldRecord { seed: fold_seed, trained_on, held_out: held_out.to_vec() }))
}

fn assemble(
    ds: &BehaviorDataset,
    results: Vec<Result<(Vec<f64>, FoldRecord), SppcError>>,
    method: ScoringMethod,
    cfg: &AutoencoderConfig,
) -> Result<ImportanceReport, SppcError> {
    let mut scores = alloc::vec![f64::NAN; ds.len()];
    let mut folds = Vec::with_capacity(results.len());
    for r in results {
        let (losses, fold) = r?;
        for (&i, l) in fold.held_out.iter().zip(losses) {
            scores[i] = l;
        }
        folds.push(fold);
    }
    debug_assert!(scores.iter().all(|s| s.is_finite()));
    Ok(ImportanceReport::from_scores(ds, &scores, method, Some(cfg.clone()), cfg.seed, folds))
}

/// Exact leave-one-out: `N` trainings, each on `S \ {s_i}` with seed
/// `cfg.seed ^ fnv1a(id)`.
pub fn score_exact_loo<R: JobRunner>(
    ds: &BehaviorDataset,
    vocab: &Vocabulary,
    cfg: &AutoencoderConfig,
    runner: &R,
) -> Result<ImportanceReport, SppcError> {
    if ds.len() < 2 {
        return Err(SppcError::DatasetTooSmall(ds.len()));
    }
    let results = runner.run(ds.len(), |i| {
        score_fold(ds, vocab, cfg, &[i], seed::for_holdout(cfg.seed, &ds.sequences[i].id))
    });
    assemble(ds, results, ScoringMethod::ExactLoo, cfg)
}

/// Fold assignment for K-fold scoring: a seeded shuffle dealt round-robin.
pub fn kfold_partition(n: usize, k: usize, master_seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::for_stream(master_seed, "kfold")));
    let mut folds = alloc::vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// K-fold approximation of leave-one-out: `K` trainings, every sequence
/// scored once by a model that never saw it.
pub fn score_kfold<R: JobRunner>(
    ds: &BehaviorDataset,
    vocab: &Vocabulary,
    cfg: &AutoencoderConfig,
    k: usize,
    runner: &R,
) -> Result<ImportanceReport, SppcError> {
    if ds.len() < 2 {
        return Err(SppcError::DatasetTooSmall(ds.len()));
    }
    if k < 2 || k > ds.len() {
        return Err(SppcError::InvalidK { k, n: ds.len() });
    }
    let folds = kfold_partition(ds.len(), k, cfg.seed);
    let results = runner.run(k, |f| score_fold(ds, vocab, cfg, &folds[f], seed::for_fold(cfg.seed, f)));
    assemble(ds, results, ScoringMethod::KFold(k), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionResult {
    pub kept: BehaviorDataset,
    pub dropped: Vec<String>,
    pub retention: f64,
    pub method: ScoringMethod,
}

/// Number of sequences kept at retention `rho`: `⌈rho · n⌉`.
pub fn keep_count(n: usize, rho: f64) -> usize {
    // The epsilon absorbs products like 0.07 * 100 = 7.000000000000001.
    (libm::ceil(rho * n as f64 - 1e-9) as usize).min(n)
}

/// Keeps the top `⌈rho · N⌉` sequences of `report`, in dataset order.
pub fn compress(report: &ImportanceReport, ds: &BehaviorDataset, rho: f64) -> Result<CompressionResult, SppcError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(SppcError::InvalidRetention(rho));
    }
    let report_ids: BTreeSet<&str> = report.entries.iter().map(|e| e.id.as_str()).collect();
    let ds_ids: BTreeSet<&str> = ds.ids().collect();
    if report_ids != ds_ids || report.len() != ds.len() {
        return Err(SppcError::ReportMismatch);
    }
    let keep: BTreeSet<&str> = report.entries[..keep_count(ds.len(), rho)].iter().map(|e| e.id.as_str()).collect();
    let (kept, dropped): (Vec<_>, Vec<_>) = ds.sequences.iter().partition(|s| keep.contains(s.id.as_str()));
    Ok(CompressionResult {
        kept: BehaviorDataset { sequences: kept.into_iter().cloned().collect(), provenance: ds.provenance.clone() },
        dropped: dropped.into_iter().map(|s| s.id.clone()).collect(),
        retention: rho,
        method: report.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Behavior, BehaviorSequence, Weekday};
    use crate::runner::Sequential;

    fn ds_of(n: usize) -> BehaviorDataset {
        let seqs = (0..n)
            .map(|i| {
                BehaviorSequence::new(
                    alloc::format!("id{i:03}"),
                    alloc::vec![Behavior::new(Weekday::Monday, "(0-3)", "Light", "on")],
                )
            })
            .collect();
        BehaviorDataset::new(seqs, "t").unwrap()
    }

    fn report_with(ds: &BehaviorDataset, scores: &[f64]) -> ImportanceReport {
        ImportanceReport::from_scores(ds, scores, ScoringMethod::Similarity, None, 0, Vec::new())
    }

    #[test]
    fn ranks_break_ties_by_id() {
        let ds = ds_of(4);
        let r = report_with(&ds, &[0.5, 0.9, 0.5, 0.1]);
        let ids: Vec<_> = r.entries.iter().map(|e| (e.id.as_str(), e.rank)).collect();
        assert_eq!(ids, [("id001", 1), ("id000", 2), ("id002", 3), ("id003", 4)]);
    }

    #[test]
    fn keep_count_rounds_up() {
        assert_eq!(keep_count(100, 0.5), 50);
        assert_eq!(keep_count(100, 0.07), 7);
        assert_eq!(keep_count(3, 0.5), 2);
        assert_eq!(keep_count(10, 1.0), 10);
        assert_eq!(keep_count(7, 0.01), 1);
    }

    #[test]
    fn compress_keeps_top_in_dataset_order() {
        let ds = ds_of(100);
        let scores: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let r = report_with(&ds, &scores);
        let c = compress(&r, &ds, 0.5).unwrap();
        assert_eq!(c.kept.len(), 50);
        assert_eq!(c.dropped.len(), 50);
        let top: BTreeSet<&str> = r.entries[..50].iter().map(|e| e.id.as_str()).collect();
        assert!(c.kept.sequences.iter().all(|s| top.contains(s.id.as_str())));
        assert!(c.kept.sequences.windows(2).all(|w| w[0].id < w[1].id));
        assert_eq!(compress(&r, &ds, 1.0).unwrap().kept, ds);
    }

    #[test]
    fn compress_errors() {
        let ds = ds_of(4);
        let r = report_with(&ds, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(compress(&r, &ds, 0.0), Err(SppcError::InvalidRetention(0.0)));
        assert_eq!(compress(&r, &ds, 1.5), Err(SppcError::InvalidRetention(1.5)));
        assert_eq!(compress(&r, &ds_of(5), 0.5), Err(SppcError::ReportMismatch));
    }

    #[test]
    fn kfold_partition_covers_everything_once() {
        let folds = kfold_partition(23, 5, 42);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 4 || f.len() == 5));
        assert_eq!(folds, kfold_partition(23, 5, 42));
    }

    #[test]
    fn small_inputs_rejected() {
        let v = Vocabulary::build(&crate::ingest::standard_dictionary()).unwrap();
        let cfg = AutoencoderConfig::default();
        assert_eq!(score_exact_loo(&ds_of(1), &v, &cfg, &Sequential).unwrap_err(), SppcError::DatasetTooSmall(1));
        assert_eq!(score_kfold(&ds_of(4), &v, &cfg, 1, &Sequential).unwrap_err(), SppcError::InvalidK { k: 1, n: 4 });
        assert_eq!(score_kfold(&ds_of(4), &v, &cfg, 5, &Sequential).unwrap_err(), SppcError::InvalidK { k: 5, n: 4 });
    }
}
