//! Finite-difference check of the hand-written backward pass.

use alloc::vec::Vec;

use rand::Rng;

use super::net::{sequence_loss, DecoderInput, Layout};
use super::{init_params, AutoencoderConfig};
use crate::ingest::{simulate_fixture, standard_dictionary, FixtureSpec};
use crate::model::Vocabulary;
use crate::seed;

/// Parameter initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Weights uniform in `(-s, s)`, biases zero.
    Uniform(f64),
    Zeros,
}

impl Default for Init {
    fn default() -> Self {
        Init::Uniform(0.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub probes: usize,
    /// Central-difference half-width.
    pub step: f64,
    pub init: Init,
    /// Gradients smaller than this in both routes are compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { probes: 50, step: 1e-4, init: Init::default(), floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Probe {
    pub fn relative_error(&self, floor: f64) -> f64 {
        let denom = self.analytic.abs().max(self.numeric.abs()).max(floor);
        (self.analytic - self.numeric).abs() / denom
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
    pub max_relative_error: f64,
}

/// Max relative error over `probe_count` probes with default options.
pub fn gradient_check(cfg: &AutoencoderConfig, probe_count: usize) -> f64 {
    gradient_check_with(cfg, &GradCheckOptions { probes: probe_count.max(1), ..Default::default() }).max_relative_error
}

/// Compares analytic gradients against central differences on a two-sequence
/// toy batch (three behaviors each). Probes are spread evenly over parameter
/// groups, then uniformly within a group.
pub fn gradient_check_with(cfg: &AutoencoderConfig, opts: &GradCheckOptions) -> GradCheckReport {
    let dict = standard_dictionary();
    let vocab = Vocabulary::build(&dict).expect("standard dictionary");
    let mut spec = FixtureSpec::new(2, 1, 0.0, cfg.seed);
    spec.sequence_len = 3;
    let batch: Vec<Vec<u32>> = simulate_fixture(&spec, &dict)
        .expect("toy fixture")
        .dataset
        .sequences
        .iter()
        .map(|s| vocab.encode(s).expect("fixture sequences encode"))
        .collect();

    let layout = Layout::new(vocab.len(), cfg.embed_dim.max(1), cfg.hidden_dim.max(1));
    let mut rng = seed::rng(cfg.seed);
    let mut params = init_params(&mut rng, &layout, opts.init);
    let scale = 1.0 / batch.len() as f64;
    let batch_loss = |p: &[f64]| -> f64 {
        batch.iter().map(|ids| sequence_loss(p, &layout, ids, DecoderInput::TeacherForced, None)).sum::<f64>() * scale
    };

    let mut grad = alloc::vec![0.0; layout.total];
    for ids in &batch {
        sequence_loss(&params, &layout, ids, DecoderInput::TeacherForced, Some((&mut grad, scale)));
    }

    let groups = layout.groups();
    let mut probes = Vec::with_capacity(opts.probes);
    for k in 0..opts.probes {
        let g = &groups[k % groups.len()];
        let index = g.start + rng.random_range(0..g.len);
        let original = params[index];
        params[index] = original + opts.step;
        let plus = batch_loss(&params);
        params[index] = original - opts.step;
        let minus = batch_loss(&params);
        params[index] = original;
        probes.push(Probe { index, analytic: grad[index], numeric: (plus - minus) / (2.0 * opts.step) });
    }
    let max_relative_error = probes.iter().map(|p| p.relative_error(opts.floor)).fold(0.0, f64::max);
    GradCheckReport { probes, max_relative_error }
}
