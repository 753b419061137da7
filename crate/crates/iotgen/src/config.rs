//! Run configuration: one JSON document, overridable field by field through
//! dotted paths (`sppc.rho=0.25`). Command-line flags are applied last and win.

use std::path::{Path, PathBuf};

use iotgen_core::autoencoder::AutoencoderConfig;
use iotgen_core::eval::{EvalConfig, EvalMethod};
use iotgen_core::generation::{GenerationOptions, ProviderConfig};
use iotgen_core::ingest::FixtureSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {detail}", path.display())]
    Read { path: PathBuf, detail: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("override {0:?} is not of the form key=value")]
    MalformedOverride(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error("{what} not found: {}", path.display())]
    MissingPath { what: &'static str, path: PathBuf },
}

/// Method used by `compress` and the pipeline's compression stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CompressMethod {
    #[serde(alias = "exact-loo")]
    #[value(alias = "exact-loo")]
    SppcLoo,
    SppcKfold,
    Similarity,
}

/// Method names accepted in `eval.methods`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Full,
    Similarity,
    SppcKfold,
    SppcLoo,
}

impl MethodName {
    pub fn to_eval(self, k: usize) -> EvalMethod {
        match self {
            MethodName::Full => EvalMethod::Full,
            MethodName::Similarity => EvalMethod::Similarity,
            MethodName::SppcKfold => EvalMethod::SppcKfold(k),
            MethodName::SppcLoo => EvalMethod::SppcLoo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Dictionary JSON; the built-in ten-device home when absent.
    pub dictionary: Option<PathBuf>,
    /// Dataset JSON Lines; the pipeline simulates `fixture` when absent.
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SppcSettings {
    pub method: CompressMethod,
    pub rho: f64,
    pub k: usize,
    /// Allow exact leave-one-out above [`LOO_LIMIT`] sequences.
    pub force: bool,
    pub autoencoder: AutoencoderConfig,
}

/// Largest dataset exact leave-one-out runs on without `force`.
pub const LOO_LIMIT: usize = 200;

impl Default for SppcSettings {
    fn default() -> Self {
        SppcSettings {
            method: CompressMethod::SppcKfold,
            rho: 0.5,
            k: iotgen_core::sppc::DEFAULT_K,
            force: false,
            autoencoder: AutoencoderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub scene_from: String,
    pub scene_to: String,
    pub provider: ProviderKind,
    pub provider_config: ProviderConfig,
    pub options: GenerationOptions,
    /// JSON array of scripted mock replies; without it the mock echoes.
    pub mock_script: Option<PathBuf>,
    pub allow_violations: bool,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            scene_from: "spring".into(),
            scene_to: "winter".into(),
            provider: ProviderKind::Mock,
            provider_config: ProviderConfig::default(),
            options: GenerationOptions::default(),
            mock_script: None,
            allow_violations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub enabled: bool,
    pub rho_grid: Vec<f64>,
    pub methods: Vec<MethodName>,
    pub train_fraction: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            enabled: true,
            rho_grid: vec![0.25, 0.5, 0.75, 1.0],
            methods: vec![MethodName::Full, MethodName::Similarity, MethodName::SppcKfold],
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. It replaces every nested seed when the config is
    /// resolved, so one number reproduces a whole run.
    pub seed: u64,
    pub log_level: String,
    pub paths: Paths,
    /// Simulated input used when `paths.dataset` is absent.
    pub fixture: FixtureSpec,
    pub sppc: SppcSettings,
    pub generation: GenerationSettings,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            log_level: "info".into(),
            paths: Paths::default(),
            fixture: FixtureSpec::default_eval(0),
            sppc: SppcSettings::default(),
            generation: GenerationSettings::default(),
            eval: EvalSettings::default(),
        }
    }
}

/// Parses an override value as JSON, falling back to a plain string so
/// `generation.scene_to=rainy season` needs no quoting.
fn override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), detail: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Read { path: path.to_path_buf(), detail: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Sets the field at a dotted path. Only existing keys can be set;
    /// optional fields that are currently unset count as existing.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        }
        *slot = value;
        *self = serde_json::from_value(doc).map_err(|e| ConfigError::Invalid(format!("{key}: {e}")))?;
        Ok(())
    }

    /// Applies a `key=value` override string.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::MalformedOverride(spec.to_string()))?;
        self.set(key.trim(), override_value(raw.trim()))
    }

    /// Copy with the master seed pushed into every stage.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.fixture.seed = c.seed;
        c.sppc.autoencoder.seed = c.seed;
        c
    }

    pub fn eval_config(&self) -> EvalConfig {
        let r = self.resolved();
        EvalConfig {
            train_fraction: r.eval.train_fraction,
            methods: r.eval.methods.iter().map(|m| m.to_eval(r.sppc.k)).collect(),
            rho_grid: r.eval.rho_grid.clone(),
            autoencoder: r.sppc.autoencoder.clone(),
            seed: r.seed,
        }
    }

    /// Checks value ranges and that every referenced input path exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inputs = [
            ("dictionary", &self.paths.dictionary),
            ("dataset", &self.paths.dataset),
            ("mock script", &self.generation.mock_script),
        ];
        for (what, p) in inputs {
            if let Some(p) = p.as_ref().filter(|p| !p.exists()) {
                return Err(ConfigError::MissingPath { what, path: p.clone() });
            }
        }
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.sppc.rho > 0.0 && self.sppc.rho <= 1.0) {
            return bad(format!("sppc.rho must lie in (0, 1], got {}", self.sppc.rho));
        }
        if self.sppc.k < 2 {
            return bad(format!("sppc.k must be at least 2, got {}", self.sppc.k));
        }
        self.sppc.autoencoder.validate().map_err(|e| ConfigError::Invalid(format!("sppc.autoencoder: {e}")))?;
        self.generation
            .provider_config
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("generation.provider_config: {e}")))?;
        if self.eval.enabled {
            self.eval_config().validate().map_err(|e| ConfigError::Invalid(format!("eval: {e}")))?;
        }
        Ok(())
    }
}
