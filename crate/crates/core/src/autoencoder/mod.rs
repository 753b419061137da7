//! GRU seq2seq autoencoder over behavior token ids.
//!
//! Embedding → single-layer GRU encoder → final hidden state → GRU decoder
//! (teacher forced) → softmax. The loss is the mean per-token cross-entropy
//! (nats) of reproducing the input ids followed by `EOS`. Training is plain
//! mini-batch SGD with global-norm gradient clipping.
//!
//! Training is single-threaded and fully determined by the config seed and
//! the dataset order; `libm` supplies the transcendental functions, so runs
//! are bit-identical across platforms.

mod gradcheck;
mod net;

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

pub use gradcheck::{gradient_check, gradient_check_with, GradCheckOptions, GradCheckReport, Init};
use net::{sequence_loss, DecoderInput, Layout};

use crate::model::{BehaviorDataset, BehaviorSequence, CodecError, Vocabulary};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AutoencoderConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub teacher_forcing: bool,
    /// Global L2 norm the batch gradient is clipped to; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            embed_dim: 16,
            hidden_dim: 32,
            epochs: 30,
            learning_rate: 0.5,
            batch_size: 1,
            teacher_forcing: true,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), AutoencoderError> {
        let bad = |m: &str| Err(AutoencoderError::InvalidConfig(m.into()));
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("dimensions must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.clip_norm >= 0.0) {
            return bad("clip_norm must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutoencoderError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("vocabulary fingerprint {found:016x} does not match the model's {expected:016x}")]
    VocabMismatch { expected: u64, found: u64 },
    #[error("sequence {id:?} cannot be encoded: {source}")]
    Codec { id: String, source: CodecError },
    #[error("invalid autoencoder config: {0}")]
    InvalidConfig(String),
    #[error("weight buffer has {found} values, expected {expected}")]
    WeightShape { expected: usize, found: usize },
    #[error("weight buffer contains non-finite values")]
    NonFiniteWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    layout: Layout,
    params: Vec<f64>,
    vocab: Vocabulary,
    config: AutoencoderConfig,
    /// Mean training loss of each epoch.
    history: Vec<f64>,
}

impl TrainedModel {
    /// Reassembles a model from a weight dump.
    pub fn from_parts(
        config: AutoencoderConfig,
        vocab: Vocabulary,
        params: Vec<f64>,
        history: Vec<f64>,
    ) -> Result<Self, AutoencoderError> {
        config.validate()?;
        let layout = Layout::new(vocab.len(), config.embed_dim, config.hidden_dim);
        if params.len() != layout.total {
            return Err(AutoencoderError::WeightShape { expected: layout.total, found: params.len() });
        }
        if params.iter().any(|w| !w.is_finite()) {
            return Err(AutoencoderError::NonFiniteWeights);
        }
        Ok(TrainedModel { layout, params, vocab, config, history })
    }

    pub fn weights(&self) -> &[f64] {
        &self.params
    }

    pub fn config(&self) -> &AutoencoderConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_fingerprint(&self) -> u64 {
        self.vocab.fingerprint()
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().copied()
    }

    /// Teacher-forced loss of an already-encoded id sequence.
    pub fn loss_of_ids(&self, ids: &[u32]) -> f64 {
        sequence_loss(&self.params, &self.layout, ids, DecoderInput::TeacherForced, None)
    }

    /// Mean per-token cross-entropy (nats) of reconstructing `seq`. The id is
    /// not part of the input.
    pub fn reconstruction_loss(&self, vocab: &Vocabulary, seq: &BehaviorSequence) -> Result<f64, AutoencoderError> {
        if vocab.fingerprint() != self.vocab.fingerprint() {
            return Err(AutoencoderError::VocabMismatch {
                expected: self.vocab.fingerprint(),
                found: vocab.fingerprint(),
            });
        }
        let ids = self
            .vocab
            .encode(seq)
            .map_err(|source| AutoencoderError::Codec { id: seq.id.clone(), source })?;
        Ok(self.loss_of_ids(&ids))
    }
}

pub(crate) fn init_params<R: Rng>(rng: &mut R, layout: &Layout, init: Init) -> Vec<f64> {
    let mut p = alloc::vec![0.0; layout.total];
    if let Init::Uniform(scale) = init {
        for w in p.iter_mut() {
            *w = rng.random_range(-scale..scale);
        }
        for r in layout.bias_ranges() {
            p[r].fill(0.0);
        }
    }
    p
}

fn encode_all(ds: &BehaviorDataset, vocab: &Vocabulary) -> Result<Vec<Vec<u32>>, AutoencoderError> {
    ds.sequences
        .iter()
        .map(|s| vocab.encode(s).map_err(|source| AutoencoderError::Codec { id: s.id.clone(), source }))
        .collect()
}

fn clip(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
    if norm > max_norm {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
}

/// Trains a fresh model on `ds`.
pub fn train(ds: &BehaviorDataset, vocab: &Vocabulary, cfg: &AutoencoderConfig) -> Result<TrainedModel, AutoencoderError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(AutoencoderError::EmptyDataset);
    }
    let encoded = encode_all(ds, vocab)?;
    let layout = Layout::new(vocab.len(), cfg.embed_dim, cfg.hidden_dim);
    let mut rng = seed::rng(cfg.seed);
    let mut params = init_params(&mut rng, &layout, Init::default());
    let mode = if cfg.teacher_forcing { DecoderInput::TeacherForced } else { DecoderInput::FreeRunning };

    let mut grad = alloc::vec![0.0; layout.total];
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                total += sequence_loss(&params, &layout, &encoded[i], mode, Some((&mut grad, scale)));
            }
            clip(&mut grad, cfg.clip_norm);
            for (w, g) in params.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
        }
        let mean = total / encoded.len() as f64;
        if !mean.is_finite() || params.iter().any(|w| !w.is_finite()) {
            return Err(AutoencoderError::NonFiniteLoss { epoch });
        }
        history.push(mean);
    }
    Ok(TrainedModel { layout, params, vocab: vocab.clone(), config: cfg.clone(), history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{simulate_fixture, standard_dictionary, FixtureSpec};

    fn vocab() -> Vocabulary {
        Vocabulary::build(&standard_dictionary()).unwrap()
    }

    #[test]
    fn empty_dataset_rejected() {
        let err = train(&BehaviorDataset::default(), &vocab(), &AutoencoderConfig::default()).unwrap_err();
        assert_eq!(err, AutoencoderError::EmptyDataset);
    }

    #[test]
    fn invalid_config_rejected() {
        let ds = simulate_fixture(&FixtureSpec::new(1, 2, 0.0, 0), &standard_dictionary()).unwrap().dataset;
        let cfg = AutoencoderConfig { hidden_dim: 0, ..Default::default() };
        assert!(matches!(train(&ds, &vocab(), &cfg), Err(AutoencoderError::InvalidConfig(_))));
        let cfg = AutoencoderConfig { learning_rate: 0.0, ..Default::default() };
        assert!(matches!(train(&ds, &vocab(), &cfg), Err(AutoencoderError::InvalidConfig(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let ds = simulate_fixture(&FixtureSpec::new(2, 4, 0.0, 0), &standard_dictionary()).unwrap().dataset;
        let cfg = AutoencoderConfig { learning_rate: 1e300, clip_norm: 0.0, epochs: 3, ..Default::default() };
        assert!(matches!(train(&ds, &vocab(), &cfg), Err(AutoencoderError::NonFiniteLoss { .. })));
    }

    #[test]
    fn vocab_mismatch_and_id_invariance() {
        let ds = simulate_fixture(&FixtureSpec::new(1, 4, 0.0, 0), &standard_dictionary()).unwrap().dataset;
        let v = vocab();
        let cfg = AutoencoderConfig { epochs: 2, ..Default::default() };
        let model = train(&ds, &v, &cfg).unwrap();
        let mut renamed = ds.sequences[0].clone();
        renamed.id = "other".into();
        assert_eq!(
            model.reconstruction_loss(&v, &ds.sequences[0]).unwrap(),
            model.reconstruction_loss(&v, &renamed).unwrap()
        );

        let mut controls = alloc::collections::BTreeMap::new();
        controls.insert("Light".into(), alloc::vec!["on".into()]);
        let other = crate::model::DeviceDictionary::new(
            crate::model::Weekday::ALL.to_vec(),
            alloc::vec!["(0-3)".into()],
            alloc::vec!["Light".into()],
            controls,
        )
        .unwrap();
        let ov = Vocabulary::build(&other).unwrap();
        assert!(matches!(
            model.reconstruction_loss(&ov, &ds.sequences[0]),
            Err(AutoencoderError::VocabMismatch { .. })
        ));
    }

    #[test]
    fn from_parts_checks_shape_and_finiteness() {
        let v = vocab();
        let cfg = AutoencoderConfig::default();
        let n = Layout::new(v.len(), 16, 32).total;
        assert!(TrainedModel::from_parts(cfg.clone(), v.clone(), alloc::vec![0.0; n], Vec::new()).is_ok());
        assert!(matches!(
            TrainedModel::from_parts(cfg.clone(), v.clone(), alloc::vec![0.0; n - 1], Vec::new()),
            Err(AutoencoderError::WeightShape { .. })
        ));
        let mut w = alloc::vec![0.0; n];
        w[3] = f64::NAN;
        assert_eq!(TrainedModel::from_parts(cfg, v, w, Vec::new()), Err(AutoencoderError::NonFiniteWeights));
    }

    #[test]
    fn free_running_training_is_finite() {
        let ds = simulate_fixture(&FixtureSpec::new(2, 3, 0.0, 0), &standard_dictionary()).unwrap().dataset;
        let cfg = AutoencoderConfig { teacher_forcing: false, epochs: 3, ..Default::default() };
        let m = train(&ds, &vocab(), &cfg).unwrap();
        assert!(m.history().iter().all(|l| l.is_finite()));
    }
}
