//! Subcommand bodies. Each takes a fully merged [`RunConfig`]; argument
//! parsing lives in `cli`.

use std::path::{Path, PathBuf};

use iotgen_core::eval::{run_comparison, EvalResult};
use iotgen_core::generation::{
    generate_dataset, Clock, GenerationResult, MockProvider, NoClock, Provider, ProviderError, SceneSpec,
};
use iotgen_core::ingest::{simulate_fixture, standard_dictionary, Fixture, FixtureSpec};
use iotgen_core::model::{BehaviorDataset, DeviceDictionary, Vocabulary};
use iotgen_core::sppc::{compress, score_exact_loo, score_kfold, score_similarity};
use serde::{Deserialize, Serialize};

use crate::config::{CompressMethod, ConfigError, ProviderKind, RunConfig, LOO_LIMIT};
use crate::formats::{self, FormatError, LoadOptions};
use crate::manifest::RunDir;
use crate::runtime::{HttpProvider, JsonlTranscript, Rayon, SystemClock};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or missing inputs. Exit status 2.
    #[error("{0}")]
    Usage(String),
    /// The run itself failed. Exit status 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn load_dictionary(cfg: &RunConfig) -> Result<DeviceDictionary, CliError> {
    match &cfg.paths.dictionary {
        None => Ok(standard_dictionary()),
        Some(p) => formats::load_dictionary(p).map_err(|e| CliError::Usage(format!("dictionary: {e}"))),
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Usage(format!("{flag} is required")))
}

fn load_input(cfg: &RunConfig, dict: &DeviceDictionary) -> Result<BehaviorDataset, CliError> {
    let path = require(&cfg.paths.dataset, "--dataset")?;
    let (ds, _) = formats::load_dataset(path, dict, LoadOptions::strict())?;
    log::info!("loaded {} sequences from {}", ds.len(), path.display());
    Ok(ds)
}

fn simulate(spec: &FixtureSpec, dict: &DeviceDictionary) -> Result<Fixture, CliError> {
    simulate_fixture(spec, dict).map_err(|e| CliError::Usage(format!("fixture: {e}")))
}

/// Resolved config echo. The output directory is left out so that runs
/// written to different places stay byte-identical.
fn config_echo(cfg: &RunConfig) -> String {
    let mut c = cfg.resolved();
    c.paths.out_dir = None;
    c.to_json()
}

fn open_run(cfg: &RunConfig, command: &str) -> Result<RunDir, CliError> {
    let out = require(&cfg.paths.out_dir, "--out")?;
    let mut run = RunDir::new(out, command, cfg.seed);
    run.write_config(&config_echo(cfg))?;
    Ok(run)
}

/// Finishes the manifest whatever the stage outcome, then passes the
/// outcome on.
fn close_run<T>(run: &mut RunDir, outcome: Result<T, CliError>) -> Result<T, CliError> {
    if let Err(e) = &outcome {
        run.fail(e);
    }
    let path = run.finish()?;
    log::info!("manifest written to {}", path.display());
    outcome
}

// ---- stages ----

fn method_label(m: CompressMethod) -> &'static str {
    match m {
        CompressMethod::SppcLoo => "sppc-loo",
        CompressMethod::SppcKfold => "sppc-kfold",
        CompressMethod::Similarity => "similarity",
    }
}

fn check_loo_cost(n: usize, cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.sppc.method == CompressMethod::SppcLoo && n > LOO_LIMIT && !cfg.sppc.force {
        return Err(CliError::Usage(format!(
            "exact leave-one-out on {n} sequences trains {n} models; use --method sppc-kfold or pass --force"
        )));
    }
    Ok(())
}

/// Scores `ds`, keeps the top ρ fraction and writes the report, the
/// compressed dataset and the dropped ids under `prefix`.
fn stage_compress(
    run: &mut RunDir,
    prefix: &str,
    ds: &BehaviorDataset,
    dict: &DeviceDictionary,
    cfg: &RunConfig,
) -> Result<BehaviorDataset, CliError> {
    let s = &cfg.sppc;
    check_loo_cost(ds.len(), cfg)?;
    let vocab = Vocabulary::build(dict).map_err(runtime)?;
    log::info!("scoring {} sequences with {}", ds.len(), method_label(s.method));
    let report = match s.method {
        CompressMethod::SppcLoo => score_exact_loo(ds, &vocab, &s.autoencoder, &Rayon),
        CompressMethod::SppcKfold => score_kfold(ds, &vocab, &s.autoencoder, s.k, &Rayon),
        CompressMethod::Similarity => score_similarity(ds),
    }
    .map_err(runtime)?;
    let result = compress(&report, ds, s.rho).map_err(runtime)?;
    log::info!("kept {} of {} sequences", result.kept.len(), ds.len());

    let csv = run.path(&format!("{prefix}scores.csv"));
    formats::save_report_csv(&csv, &report, method_label(s.method))?;
    run.adopt(&format!("{prefix}scores.csv"))?;
    run.write(&format!("{prefix}compressed.jsonl"), formats::render_dataset_jsonl(&result.kept).as_bytes())?;
    let mut dropped = result.dropped.join("\n");
    if !dropped.is_empty() {
        dropped.push('\n');
    }
    run.write(&format!("{prefix}dropped.txt"), dropped.as_bytes())?;
    Ok(result.kept)
}

/// One scripted mock reply: either text or a provider error in its JSON
/// form, e.g. `{"error": "Timeout"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Text(String),
    Error { error: ProviderError },
}

pub fn load_mock_script(path: &Path) -> Result<MockProvider, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let replies: Vec<ScriptedReply> =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("mock script {}: {e}", path.display())))?;
    Ok(MockProvider::scripted(replies.into_iter().map(|r| match r {
        ScriptedReply::Text(t) => Ok(t),
        ScriptedReply::Error { error } => Err(error),
    })))
}

fn run_generation<P: Provider, C: Clock>(
    kept: &BehaviorDataset,
    dict: &DeviceDictionary,
    scene: &SceneSpec,
    cfg: &RunConfig,
    provider: &mut P,
    clock: &C,
    transcript: &Path,
) -> Result<GenerationResult, CliError> {
    let g = &cfg.generation;
    let mut sink = JsonlTranscript::create(transcript)?;
    let out = generate_dataset(kept, dict, scene, &g.options, &g.provider_config, provider, clock, &mut sink);
    sink.finish()?;
    out.map_err(runtime)
}

fn stage_generate(
    run: &mut RunDir,
    prefix: &str,
    kept: &BehaviorDataset,
    dict: &DeviceDictionary,
    cfg: &RunConfig,
) -> Result<GenerationResult, CliError> {
    let g = &cfg.generation;
    let scene = SceneSpec::new(g.scene_from.as_str(), g.scene_to.as_str()).map_err(|e| CliError::Usage(e.to_string()))?;
    let rel = format!("{prefix}transcripts.jsonl");
    let transcript = run.path(&rel);
    // The transcript is append-only; start each run from an empty file.
    if transcript.exists() {
        std::fs::remove_file(&transcript).map_err(runtime)?;
    }
    let outcome = match g.provider {
        ProviderKind::Http => {
            let mut p = HttpProvider::from_env(&g.provider_config).map_err(|e| CliError::Usage(e.to_string()))?;
            run_generation(kept, dict, &scene, cfg, &mut p, &SystemClock::default(), &transcript)
        }
        // The mock never sleeps for real and reports zero latency, which
        // keeps its transcripts reproducible.
        ProviderKind::Mock => {
            let mut p = match &g.mock_script {
                Some(path) => load_mock_script(path)?,
                None => MockProvider::Echo,
            };
            run_generation(kept, dict, &scene, cfg, &mut p, &NoClock, &transcript)
        }
    };
    if transcript.exists() {
        run.adopt(&rel)?;
    }
    let result = outcome?;
    let r = &result.report;
    log::info!(
        "accepted {} sequences ({} candidates, {} rejected, {} repair rounds)",
        r.accepted,
        r.candidates,
        r.rejected_total,
        r.repair_rounds
    );
    let ds = BehaviorDataset { sequences: result.sequences.clone(), provenance: format!("generated from {}", kept.provenance) };
    run.write(&format!("{prefix}synthetic.jsonl"), formats::render_dataset_jsonl(&ds).as_bytes())?;
    let mut explanation = result.explanation.clone();
    explanation.push('\n');
    run.write(&format!("{prefix}explanation.txt"), explanation.as_bytes())?;
    let mut report = serde_json::to_string_pretty(r).map_err(runtime)?;
    report.push('\n');
    run.write(&format!("{prefix}validation_report.json"), report.as_bytes())?;
    if let Some(d) = r.count_deviation {
        log::warn!("generated {} sequences, expected about {}", d.actual, d.expected);
    }
    if r.has_violations() {
        let msg = format!(
            "validation report is not clean: {} outstanding violations, {} unreadable replies",
            r.outstanding.len(),
            r.unparsed.len()
        );
        if g.allow_violations {
            log::warn!("{msg}");
        } else {
            return Err(CliError::Runtime(msg));
        }
    }
    Ok(result)
}

#[derive(Serialize)]
struct CellOut<'a> {
    method: &'static str,
    rho: f64,
    train_size: usize,
    mean: f64,
    variance: f64,
    losses: &'a [f64],
    trained_on: &'a [String],
}

#[derive(Serialize)]
struct MetricsOut<'a> {
    train_ids: &'a [String],
    test_ids: &'a [String],
    cells: Vec<CellOut<'a>>,
}

fn stage_evaluate(
    run: &mut RunDir,
    prefix: &str,
    ds: &BehaviorDataset,
    dict: &DeviceDictionary,
    cfg: &RunConfig,
) -> Result<EvalResult, CliError> {
    let vocab = Vocabulary::build(dict).map_err(runtime)?;
    let ecfg = cfg.eval_config();
    log::info!("evaluating {} methods over rho grid {:?}", ecfg.methods.len(), ecfg.rho_grid);
    let result = run_comparison(ds, &vocab, &ecfg, &Rayon).map_err(runtime)?;
    let dir = run.path(prefix.trim_end_matches('/'));
    for p in formats::save_eval_tables(&dir, &result)? {
        let name = p.file_name().and_then(|n| n.to_str()).expect("table names are ASCII");
        run.adopt(&format!("{prefix}{name}"))?;
    }
    let metrics = MetricsOut {
        train_ids: &result.train_ids,
        test_ids: &result.test_ids,
        cells: result
            .cells
            .iter()
            .map(|c| CellOut {
                method: c.method.label(),
                rho: c.rho,
                train_size: c.train_size,
                mean: c.mean,
                variance: c.variance,
                losses: &c.losses,
                trained_on: &c.trained_on,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&metrics).map_err(runtime)?;
    text.push('\n');
    run.write(&format!("{prefix}metrics.json"), text.as_bytes())?;
    Ok(result)
}

/// Writes the simulated fixture (dataset plus pattern sidecar) as artifacts.
fn write_fixture(run: &mut RunDir, prefix: &str, fixture: &Fixture, spec: &FixtureSpec) -> Result<(), CliError> {
    let rel = format!("{prefix}input.jsonl");
    formats::save_fixture(&run.path(&rel), fixture, spec)?;
    run.adopt(&rel)?;
    run.adopt(&format!("{prefix}input.meta.json"))?;
    Ok(())
}

// ---- commands ----

/// `simulate`: writes a fixture dataset and its `.meta.json` sidecar.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let dict = load_dictionary(cfg)?;
    let spec = cfg.resolved().fixture;
    let fixture = simulate(&spec, &dict)?;
    let meta = formats::save_fixture(out, &fixture, &spec)?;
    log::info!("wrote {} sequences to {} ({})", fixture.dataset.len(), out.display(), meta.display());
    Ok(())
}

pub fn cmd_compress(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let dict = load_dictionary(cfg)?;
    let ds = load_input(cfg, &dict)?;
    check_loo_cost(ds.len(), cfg)?;
    let cfg = cfg.resolved();
    let mut run = open_run(&cfg, "compress")?;
    run.begin("compress");
    let outcome = stage_compress(&mut run, "", &ds, &dict, &cfg).map(|_| ());
    close_run(&mut run, outcome)
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let dict = load_dictionary(cfg)?;
    let kept = load_input(cfg, &dict)?;
    let cfg = cfg.resolved();
    if cfg.generation.provider == ProviderKind::Http {
        // Fail on a missing credential before creating any output.
        HttpProvider::from_env(&cfg.generation.provider_config).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut run = open_run(&cfg, "generate")?;
    run.begin("generate");
    let outcome = stage_generate(&mut run, "", &kept, &dict, &cfg).map(|_| ());
    close_run(&mut run, outcome)
}

/// `evaluate`: runs on `paths.dataset` when set, otherwise on the simulated
/// `fixture`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let cfg = &RunConfig { eval: crate::config::EvalSettings { enabled: true, ..cfg.eval.clone() }, ..cfg.clone() };
    cfg.validate()?;
    let dict = load_dictionary(cfg)?;
    let resolved = cfg.resolved();
    let mut run = open_run(&resolved, "evaluate")?;
    run.begin("evaluate");
    let outcome = (|| {
        let ds = match cfg.paths.dataset {
            Some(_) => load_input(cfg, &dict)?,
            None => {
                let fixture = simulate(&resolved.fixture, &dict)?;
                write_fixture(&mut run, "", &fixture, &resolved.fixture)?;
                fixture.dataset
            }
        };
        stage_evaluate(&mut run, "", &ds, &dict, &resolved).map(|_| ())
    })();
    close_run(&mut run, outcome)
}

/// compress → generate → evaluate (unless `eval.enabled` is false) under
/// one run directory with one manifest.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let dict = load_dictionary(cfg)?;
    let resolved = cfg.resolved();
    if resolved.generation.provider == ProviderKind::Http {
        HttpProvider::from_env(&resolved.generation.provider_config).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut run = open_run(&resolved, "pipeline")?;

    run.begin("compress");
    let compressed = (|| {
        let ds = match cfg.paths.dataset {
            Some(_) => load_input(cfg, &dict)?,
            None => {
                let fixture = simulate(&resolved.fixture, &dict)?;
                write_fixture(&mut run, "compress/", &fixture, &resolved.fixture)?;
                fixture.dataset
            }
        };
        let kept = stage_compress(&mut run, "compress/", &ds, &dict, &resolved)?;
        Ok((ds, kept))
    })();
    let (ds, kept) = match compressed {
        Ok(v) => v,
        Err(e) => return close_run(&mut run, Err(e)),
    };

    run.begin("generate");
    if let Err(e) = stage_generate(&mut run, "generate/", &kept, &dict, &resolved) {
        return close_run(&mut run, Err(e));
    }

    if resolved.eval.enabled {
        run.begin("evaluate");
        let outcome = stage_evaluate(&mut run, "evaluate/", &ds, &dict, &resolved).map(|_| ());
        return close_run(&mut run, outcome);
    }
    close_run(&mut run, Ok(()))
}
