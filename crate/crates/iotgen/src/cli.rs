//! Argument definitions and their merge into [`RunConfig`].
//!
//! Precedence, lowest first: built-in defaults, `--config` file, `--set`
//! overrides, dedicated flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::commands::{self, CliError};
use crate::config::{CompressMethod, MethodName, ProviderKind, RunConfig};
use crate::formats;

#[derive(Debug, Parser)]
#[command(name = "iotgen", version, about = "Compress smart-home behavior datasets and generate synthetic ones with an LLM")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration JSON file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `--set sppc.rho=0.25`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Log level (error, warn, info, debug, trace). Overrides `log_level`.
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a fixture dataset with known pattern structure.
    Simulate(SimulateArgs),
    /// Score sequences by importance and keep the top fraction.
    Compress(CompressArgs),
    /// Generate sequences for a changed environment from a (compressed) dataset.
    Generate(GenerateArgs),
    /// Compare compression methods by held-out reconstruction loss.
    Evaluate(EvaluateArgs),
    /// compress, generate and optionally evaluate in one run directory.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of base patterns.
    #[arg(long)]
    pub patterns: Option<usize>,
    /// Copies per pattern: `N`, or `LO-HI` for a per-pattern range.
    #[arg(long, value_name = "N|LO-HI")]
    pub copies: Option<String>,
    /// Per-behavior noise probability in [0, 1].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dictionary JSON; the built-in home when omitted.
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    /// Output dataset (JSON Lines); the sidecar goes next to it.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Input dataset (JSON Lines).
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Dictionary JSON; the built-in home when omitted.
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    /// Scoring method (`exact-loo` is accepted for `sppc-loo`).
    #[arg(long, value_enum)]
    pub method: Option<CompressMethod>,
    /// Retention fraction in (0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Fold count for sppc-kfold.
    #[arg(long)]
    pub k: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allow exact leave-one-out on more than 200 sequences.
    #[arg(long)]
    pub force: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Input dataset, usually the output of `compress`.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Dictionary JSON; the built-in home when omitted.
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    #[command(flatten)]
    pub gen: GenerationFlags,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerationFlags {
    /// Description of the environment before the change.
    #[arg(long, value_name = "TEXT")]
    pub scene_from: Option<String>,
    /// Description of the environment after the change.
    #[arg(long, value_name = "TEXT")]
    pub scene_to: Option<String>,
    /// Provider backend.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Model name sent to the HTTP provider.
    #[arg(long)]
    pub model: Option<String>,
    /// Chat-completions endpoint URL for the HTTP provider.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long, value_name = "VAR")]
    pub credential_env: Option<String>,
    /// Repair rounds allowed after the first reply.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Prompt budget in estimated tokens before chunking.
    #[arg(long)]
    pub token_budget: Option<usize>,
    /// JSON array of scripted replies for the mock provider.
    #[arg(long, value_name = "FILE")]
    pub mock_script: Option<PathBuf>,
    /// Exit 0 even when the validation report is not clean.
    #[arg(long)]
    pub allow_violations: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Fixture spec JSON to simulate the dataset from.
    #[arg(long, value_name = "FILE", conflicts_with = "dataset")]
    pub fixture_spec: Option<PathBuf>,
    /// Dataset to evaluate on instead of a fixture.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Dictionary JSON; the built-in home when omitted.
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    /// Comma-separated retention fractions.
    #[arg(long, value_delimiter = ',', value_name = "R,R,...")]
    pub rho_grid: Option<Vec<f64>>,
    /// Comma-separated methods.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<MethodName>>,
    /// Fold count for sppc-kfold.
    #[arg(long)]
    pub k: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Input dataset; the configured fixture is simulated when omitted.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Dictionary JSON; the built-in home when omitted.
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    /// Compression method.
    #[arg(long, value_enum)]
    pub method: Option<CompressMethod>,
    /// Retention fraction in (0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Fold count for sppc-kfold.
    #[arg(long)]
    pub k: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allow exact leave-one-out on more than 200 sequences.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub gen: GenerationFlags,
    /// Skip the evaluation stage.
    #[arg(long)]
    pub no_eval: bool,
    /// Output (run) directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Dotted-path assignments collected from flags that were actually given.
#[derive(Default)]
struct Flags(Vec<(&'static str, Value)>);

impl Flags {
    fn opt<T: serde::Serialize>(&mut self, key: &'static str, v: &Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.push((key, serde_json::to_value(v).expect("flag values serialize")));
        }
        self
    }

    fn on(&mut self, key: &'static str, set: bool) -> &mut Self {
        if set {
            self.0.push((key, json!(true)));
        }
        self
    }

    fn generation(&mut self, g: &GenerationFlags) -> &mut Self {
        self.opt("generation.scene_from", &g.scene_from)
            .opt("generation.scene_to", &g.scene_to)
            .opt("generation.provider", &g.provider)
            .opt("generation.provider_config.model", &g.model)
            .opt("generation.provider_config.endpoint", &g.endpoint)
            .opt("generation.provider_config.credential_env", &g.credential_env)
            .opt("generation.options.max_rounds", &g.rounds)
            .opt("generation.options.token_budget", &g.token_budget)
            .opt("generation.mock_script", &g.mock_script)
            .on("generation.allow_violations", g.allow_violations)
    }
}

fn parse_copies(s: &str) -> Result<Value, CliError> {
    let bad = || CliError::Usage(format!("--copies expects N or LO-HI, got {s:?}"));
    match s.split_once('-') {
        None => s.trim().parse::<usize>().map(|n| json!(n)).map_err(|_| bad()),
        Some((lo, hi)) => {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            Ok(json!([lo, hi]))
        }
    }
}

fn command_flags(cmd: &Command) -> Result<Flags, CliError> {
    let mut f = Flags::default();
    match cmd {
        Command::Simulate(a) => {
            f.opt("fixture.pattern_count", &a.patterns)
                .opt("fixture.noise_rate", &a.noise)
                .opt("seed", &a.seed)
                .opt("paths.dictionary", &a.dict);
            if let Some(c) = &a.copies {
                f.0.push(("fixture.copies_per_pattern", parse_copies(c)?));
            }
        }
        Command::Compress(a) => {
            f.opt("paths.dataset", &a.dataset)
                .opt("paths.dictionary", &a.dict)
                .opt("sppc.method", &a.method)
                .opt("sppc.rho", &a.rho)
                .opt("sppc.k", &a.k)
                .opt("seed", &a.seed)
                .on("sppc.force", a.force)
                .opt("paths.out_dir", &a.out);
        }
        Command::Generate(a) => {
            f.opt("paths.dataset", &a.dataset).opt("paths.dictionary", &a.dict).generation(&a.gen).opt("paths.out_dir", &a.out);
        }
        Command::Evaluate(a) => {
            f.opt("paths.dataset", &a.dataset)
                .opt("paths.dictionary", &a.dict)
                .opt("eval.rho_grid", &a.rho_grid)
                .opt("eval.methods", &a.methods)
                .opt("sppc.k", &a.k)
                .opt("seed", &a.seed)
                .opt("paths.out_dir", &a.out);
            if let Some(p) = &a.fixture_spec {
                let spec = formats::load_fixture_spec(p).map_err(|e| CliError::Usage(e.to_string()))?;
                f.0.push(("fixture", serde_json::to_value(spec).expect("spec serializes")));
            }
        }
        Command::Pipeline(a) => {
            f.opt("paths.dataset", &a.dataset)
                .opt("paths.dictionary", &a.dict)
                .opt("sppc.method", &a.method)
                .opt("sppc.rho", &a.rho)
                .opt("sppc.k", &a.k)
                .opt("seed", &a.seed)
                .on("sppc.force", a.force)
                .generation(&a.gen)
                .opt("paths.out_dir", &a.out);
            if a.no_eval {
                f.0.push(("eval.enabled", json!(false)));
            }
        }
    }
    Ok(f)
}

/// Builds the effective config for `cli`.
pub fn merged_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.global.overrides {
        cfg.apply_override(o)?;
    }
    for (key, value) in command_flags(&cli.command)?.0 {
        cfg.set(key, value)?;
    }
    if let Some(l) = &cli.global.log_level {
        cfg.log_level = l.clone();
    }
    Ok(cfg)
}

pub fn run(cli: &Cli, cfg: &RunConfig) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(cfg, &a.out),
        Command::Compress(_) => commands::cmd_compress(cfg),
        Command::Generate(_) => commands::cmd_generate(cfg),
        Command::Evaluate(_) => commands::cmd_evaluate(cfg),
        Command::Pipeline(_) => commands::cmd_pipeline(cfg),
    }
}
