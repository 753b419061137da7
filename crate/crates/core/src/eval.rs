//! Full vs. compressed training comparison.
//!
//! The dataset is split into train/test by a seeded shuffle. For each method
//! the train split is compressed at every retention in the grid, a fresh
//! detector (same autoencoder architecture, independent seed) is trained on
//! the kept sequences, and every test sequence is scored by reconstruction
//! loss. Lower test loss means the compressed set preserved more of what the
//! full set teaches.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::autoencoder::{train, AutoencoderConfig, AutoencoderError};
use crate::model::{BehaviorDataset, Vocabulary};
use crate::runner::JobRunner;
use crate::seed;
use crate::sppc::{self, compress, keep_count, score_similarity, ImportanceReport, SppcError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EvalMethod {
    Full,
    Similarity,
    SppcKfold(usize),
    SppcLoo,
}

impl EvalMethod {
    pub fn label(&self) -> &'static str {
        match self {
            EvalMethod::Full => "full",
            EvalMethod::Similarity => "similarity",
            EvalMethod::SppcKfold(_) => "sppc-kfold",
            EvalMethod::SppcLoo => "sppc-loo",
        }
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalConfig {
    /// Fraction of the dataset used for training.
    pub train_fraction: f64,
    pub methods: Vec<EvalMethod>,
    pub rho_grid: Vec<f64>,
    pub autoencoder: AutoencoderConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error("split leaves an empty train or test set ({train} / {test})")]
    EmptySplit { train: usize, test: usize },
    #[error("{method} at rho={rho}: {source}")]
    Scoring { method: EvalMethod, rho: f64, source: SppcError },
    #[error("{method} at rho={rho}: {source}")]
    Training { method: EvalMethod, rho: f64, source: AutoencoderError },
    #[error("no results for {method} at rho={rho}")]
    NoSuchCell { method: EvalMethod, rho: f64 },
    #[error("asked for the top {k} losses of a {available}-sequence test set")]
    KTooLarge { k: usize, available: usize },
}

impl EvalConfig {
    pub fn new(
        methods: Vec<EvalMethod>,
        rho_grid: Vec<f64>,
        autoencoder: AutoencoderConfig,
        seed: u64,
    ) -> Result<Self, EvalError> {
        let cfg = EvalConfig { train_fraction: 0.8, methods, rho_grid, autoencoder, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidConfig(m.into()));
        if self.rho_grid.is_empty() {
            return bad("rho grid is empty");
        }
        if self.rho_grid.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return bad("every rho must lie in (0, 1]");
        }
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)");
        }
        self.autoencoder.validate().map_err(|e| EvalError::InvalidConfig(alloc::format!("{e}")))
    }

    /// Retentions evaluated for a method; the full-data reference only at 1.
    pub fn rhos_for(&self, method: EvalMethod) -> Vec<f64> {
        match method {
            EvalMethod::Full => alloc::vec![1.0],
            _ => self.rho_grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub method: EvalMethod,
    pub rho: f64,
    pub train_size: usize,
    /// Per-test-sequence losses, sorted descending.
    pub losses: Vec<f64>,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    /// Ids the detector was trained on.
    pub trained_on: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub config: EvalConfig,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub cells: Vec<CellMetrics>,
}

impl EvalResult {
    pub fn cell(&self, method: EvalMethod, rho: f64) -> Option<&CellMetrics> {
        let rho = if method == EvalMethod::Full { 1.0 } else { rho };
        self.cells.iter().find(|c| c.method == method && c.rho == rho)
    }

    /// One row per (method, rho in grid), paired with the grid rho. The
    /// full-data cell is repeated at every rho as the reference line.
    pub fn grid_rows(&self) -> Vec<(f64, &CellMetrics)> {
        let mut rows = Vec::new();
        for &m in &self.config.methods {
            for &rho in &self.config.rho_grid {
                if let Some(c) = self.cell(m, rho) {
                    rows.push((rho, c));
                }
            }
        }
        rows
    }
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Seeded train/test split; both halves keep dataset order.
pub fn split(n: usize, train_fraction: f64, master_seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::for_stream(master_seed, "split")));
    let n_train = keep_count(n, train_fraction);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn run_comparison<R: JobRunner>(
    ds: &BehaviorDataset,
    vocab: &Vocabulary,
    cfg: &EvalConfig,
    runner: &R,
) -> Result<EvalResult, EvalError> {
    cfg.validate()?;
    let (train_idx, test_idx) = split(ds.len(), cfg.train_fraction, cfg.seed);
    if train_idx.len() < 2 || test_idx.is_empty() {
        return Err(EvalError::EmptySplit { train: train_idx.len(), test: test_idx.len() });
    }
    let train_set = ds.select(&train_idx);
    let test_set = ds.select(&test_idx);

    let scorer = cfg.autoencoder.clone().with_seed(seed::for_stream(cfg.seed, "scorer"));
    let detector = cfg.autoencoder.clone().with_seed(seed::for_stream(cfg.seed, "detector"));

    // Scoring once per method; retentions are nested top-k cuts of one report.
    let mut jobs: Vec<(EvalMethod, f64, BehaviorDataset)> = Vec::new();
    for &method in &cfg.methods {
        let scoring_err = |source| EvalError::Scoring { method, rho: 0.0, source };
        let report: Option<ImportanceReport> = match method {
            EvalMethod::Full => None,
            EvalMethod::Similarity => Some(score_similarity(&train_set).map_err(scoring_err)?),
            EvalMethod::SppcKfold(k) => {
                Some(sppc::score_kfold(&train_set, vocab, &scorer, k, runner).map_err(scoring_err)?)
            }
            EvalMethod::SppcLoo => Some(sppc::score_exact_loo(&train_set, vocab, &scorer, runner).map_err(scoring_err)?),
        };
        for rho in cfg.rhos_for(method) {
            let kept = match &report {
                None => train_set.clone(),
                Some(r) => compress(r, &train_set, rho).map_err(|source| EvalError::Scoring { method, rho, source })?.kept,
            };
            jobs.push((method, rho, kept));
        }
    }

    let outcomes = runner.run(jobs.len(), |j| {
        let (method, rho, kept) = &jobs[j];
        let model = train(kept, vocab, &detector)
            .map_err(|source| EvalError::Training { method: *method, rho: *rho, source })?;
        let mut losses = test_set
            .sequences
            .iter()
            .map(|s| model.reconstruction_loss(vocab, s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| EvalError::Training { method: *method, rho: *rho, source })?;
        losses.sort_by(|a, b| b.total_cmp(a));
        let (mean, variance) = mean_and_variance(&losses);
        Ok(CellMetrics {
            method: *method,
            rho: *rho,
            train_size: kept.len(),
            losses,
            mean,
            variance,
            trained_on: kept.ids().map(String::from).collect(),
        })
    });
    let cells = outcomes.into_iter().collect::<Result<Vec<_>, EvalError>>()?;

    Ok(EvalResult {
        config: cfg.clone(),
        train_ids: train_set.ids().map(String::from).collect(),
        test_ids: test_set.ids().map(String::from).collect(),
        cells,
    })
}

/// The `k` largest test losses of one cell, descending.
pub fn top_k_losses(result: &EvalResult, method: EvalMethod, rho: f64, k: usize) -> Result<Vec<f64>, EvalError> {
    let cell = result.cell(method, rho).ok_or(EvalError::NoSuchCell { method, rho })?;
    if k > cell.losses.len() {
        return Err(EvalError::KTooLarge { k, available: cell.losses.len() });
    }
    Ok(cell.losses[..k].to_vec())
}
