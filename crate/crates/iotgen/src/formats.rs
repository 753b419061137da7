//! On-disk formats: dictionary JSON, dataset JSON Lines, fixture sidecars,
//! model dumps, importance-report CSV and the evaluation figure tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use iotgen_core::autoencoder::{AutoencoderConfig, AutoencoderError, TrainedModel};
use iotgen_core::eval::{top_k_losses, EvalResult};
use iotgen_core::ingest::{Fixture, FixtureSpec};
use iotgen_core::model::{
    Behavior, BehaviorDataset, BehaviorSequence, DeviceDictionary, DictionaryError, ShapePolicy, Vocabulary, Weekday,
};
use iotgen_core::sppc::ImportanceReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: line {line}: {detail}", path.display())]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("{}: line {line}: {detail}", path.display())]
    Validation { path: PathBuf, line: usize, detail: String },
    #[error("{}: {detail}", path.display())]
    Invalid { path: PathBuf, detail: String },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: AutoencoderError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn invalid(path: &Path, detail: impl ToString) -> FormatError {
    FormatError::Invalid { path: path.to_path_buf(), detail: detail.to_string() }
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| invalid(path, e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Parse { path: path.to_path_buf(), line: e.line(), detail: e.to_string() })
}

// ---- dictionary ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryFile {
    pub days: Vec<String>,
    pub slots: Vec<String>,
    pub devices: Vec<String>,
    pub controls: BTreeMap<String, Vec<String>>,
}

impl DictionaryFile {
    pub fn from_dictionary(dict: &DeviceDictionary) -> Self {
        DictionaryFile {
            days: dict.days().iter().map(|d| d.name().to_string()).collect(),
            slots: dict.slots().to_vec(),
            devices: dict.devices().to_vec(),
            controls: dict.devices().iter().map(|d| (d.clone(), dict.controls(d).unwrap_or(&[]).to_vec())).collect(),
        }
    }

    pub fn into_dictionary(self) -> Result<DeviceDictionary, DictionaryError> {
        let days = self
            .days
            .iter()
            .map(|d| d.parse::<Weekday>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DictionaryError::Invalid(e.to_string()))?;
        DeviceDictionary::new(days, self.slots, self.devices, self.controls)
    }
}

pub fn load_dictionary(path: &Path) -> Result<DeviceDictionary, FormatError> {
    let file: DictionaryFile = read_json(path)?;
    file.into_dictionary().map_err(|e| invalid(path, e))
}

pub fn save_dictionary(path: &Path, dict: &DeviceDictionary) -> Result<(), FormatError> {
    write_json(path, &DictionaryFile::from_dictionary(dict))
}

// ---- dataset ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetLine {
    id: String,
    seq: Vec<Vec<String>>,
}

impl DatasetLine {
    fn of(seq: &BehaviorSequence) -> Self {
        DatasetLine {
            id: seq.id.clone(),
            seq: seq.behaviors.iter().map(|b| b.elements().iter().map(|e| e.to_string()).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    /// Abort on the first bad line instead of skipping it.
    pub strict: bool,
    pub shape: ShapePolicy,
}

impl LoadOptions {
    pub fn strict() -> Self {
        LoadOptions { strict: true, shape: ShapePolicy::Canonical }
    }

    pub fn permissive() -> Self {
        LoadOptions { strict: false, shape: ShapePolicy::Canonical }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    /// 1-based.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: Vec<SkippedLine>,
}

enum LineError {
    Parse(String),
    Validation(String),
}

fn read_line(text: &str, dict: &DeviceDictionary, shape: ShapePolicy) -> Result<BehaviorSequence, LineError> {
    let raw: DatasetLine = serde_json::from_str(text).map_err(|e| LineError::Parse(e.to_string()))?;
    if let Some((i, b)) = raw.seq.iter().enumerate().find(|(_, b)| b.len() != 4) {
        return Err(LineError::Validation(format!("behavior {i} has {} elements, expected 4", b.len())));
    }
    let flat: Vec<&str> = raw.seq.iter().flatten().map(String::as_str).collect();
    let violations = dict.check_elements(&flat, shape);
    if !violations.is_empty() {
        let detail = violations.iter().map(|v| format!("{}: {v}", v.code)).collect::<Vec<_>>().join("; ");
        return Err(LineError::Validation(detail));
    }
    let behaviors = raw
        .seq
        .iter()
        .map(|b| {
            let day = b[0].parse::<Weekday>().map_err(|e| LineError::Validation(e.to_string()))?;
            Ok(Behavior::new(day, &b[1], &b[2], &b[3]))
        })
        .collect::<Result<Vec<_>, LineError>>()?;
    Ok(BehaviorSequence::new(raw.id, behaviors))
}

/// Reads a JSON Lines dataset. Blank lines are ignored. Every returned
/// sequence passed the dictionary validator; in permissive mode bad lines
/// (including repeated ids) are skipped and listed in the report.
pub fn load_dataset(
    path: &Path,
    dict: &DeviceDictionary,
    opts: LoadOptions,
) -> Result<(BehaviorDataset, LoadReport), FormatError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut report = LoadReport::default();
    let mut seqs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(io_err(path))?;
        if text.trim().is_empty() {
            continue;
        }
        let outcome = read_line(&text, dict, opts.shape).and_then(|s| {
            if seen.insert(s.id.clone()) {
                Ok(s)
            } else {
                Err(LineError::Validation(format!("duplicate id {:?}", s.id)))
            }
        });
        match outcome {
            Ok(s) => seqs.push(s),
            Err(e) if opts.strict => {
                let path = path.to_path_buf();
                return Err(match e {
                    LineError::Parse(detail) => FormatError::Parse { path, line: line_no, detail },
                    LineError::Validation(detail) => FormatError::Validation { path, line: line_no, detail },
                });
            }
            Err(LineError::Parse(reason) | LineError::Validation(reason)) => {
                log::warn!("{}: skipping line {line_no}: {reason}", path.display());
                report.skipped.push(SkippedLine { line: line_no, reason });
            }
        }
    }
    report.loaded = seqs.len();
    let ds = BehaviorDataset::new(seqs, path.display().to_string()).map_err(|e| invalid(path, e))?;
    Ok((ds, report))
}

pub fn render_dataset_jsonl(ds: &BehaviorDataset) -> String {
    let mut out = String::new();
    for s in &ds.sequences {
        out.push_str(&serde_json::to_string(&DatasetLine::of(s)).expect("plain strings serialize"));
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: &Path, ds: &BehaviorDataset) -> Result<(), FormatError> {
    write_file(path, render_dataset_jsonl(ds).as_bytes())
}

// ---- fixture sidecar ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMetadata {
    pub spec: FixtureSpec,
    /// Sequence id to pattern index.
    pub patterns: BTreeMap<String, usize>,
}

/// `data.jsonl` gets `data.meta.json`.
pub fn sidecar_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("meta.json")
}

pub fn save_fixture(path: &Path, fixture: &Fixture, spec: &FixtureSpec) -> Result<PathBuf, FormatError> {
    save_dataset(path, &fixture.dataset)?;
    let meta = sidecar_path(path);
    write_json(&meta, &FixtureMetadata { spec: spec.clone(), patterns: fixture.pattern_map() })?;
    Ok(meta)
}

pub fn load_fixture_metadata(path: &Path) -> Result<FixtureMetadata, FormatError> {
    read_json(path)
}

pub fn load_fixture_spec(path: &Path) -> Result<FixtureSpec, FormatError> {
    read_json(path)
}

// ---- model dump ----

pub const MODEL_FORMAT: &str = "iotgen-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDump {
    format: String,
    version: u32,
    /// Hex, so the value survives JSON readers that parse numbers as f64.
    vocab_fingerprint: String,
    vocab_size: usize,
    config: AutoencoderConfig,
    history: Vec<f64>,
    weights: Vec<f64>,
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<(), FormatError> {
    write_json(
        path,
        &ModelDump {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            vocab_fingerprint: format!("{:016x}", model.vocab_fingerprint()),
            vocab_size: model.vocabulary().len(),
            config: model.config().clone(),
            history: model.history().to_vec(),
            weights: model.weights().to_vec(),
        },
    )
}

/// Loads a weight dump for use with `vocab`, refusing dumps trained on a
/// different vocabulary.
pub fn load_model(path: &Path, vocab: &Vocabulary) -> Result<TrainedModel, FormatError> {
    let dump: ModelDump = read_json(path)?;
    if dump.format != MODEL_FORMAT || dump.version != MODEL_VERSION {
        return Err(invalid(path, format!("unsupported model format {} v{}", dump.format, dump.version)));
    }
    let found = u64::from_str_radix(&dump.vocab_fingerprint, 16).map_err(|e| invalid(path, e))?;
    if found != vocab.fingerprint() {
        let source = AutoencoderError::VocabMismatch { expected: vocab.fingerprint(), found };
        return Err(FormatError::Model { path: path.to_path_buf(), source });
    }
    TrainedModel::from_parts(dump.config, vocab.clone(), dump.weights, dump.history)
        .map_err(|source| FormatError::Model { path: path.to_path_buf(), source })
}

// ---- CSV tables ----

fn write_csv<F>(path: &Path, header: &[&str], fill: F) -> Result<(), FormatError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).and_then(|_| fill(&mut w)).and_then(|_| w.flush().map_err(Into::into)).map_err(|e| invalid(path, e))?;
    }
    write_file(path, &buf)
}

/// `id,score,rank,method,seed`, one row per sequence in rank order.
pub fn save_report_csv(path: &Path, report: &ImportanceReport, method_label: &str) -> Result<(), FormatError> {
    write_csv(path, &["id", "score", "rank", "method", "seed"], |w| {
        for e in &report.entries {
            w.write_record([e.id.clone(), e.score.to_string(), e.rank.to_string(), method_label.to_string(), report.seed.to_string()])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub score: f64,
    pub rank: usize,
    pub method: String,
    pub seed: u64,
}

pub fn load_report_csv(path: &Path) -> Result<Vec<ReportRow>, FormatError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| invalid(path, e))?;
    r.deserialize().collect::<Result<Vec<ReportRow>, _>>().map_err(|e| invalid(path, e))
}

/// One dropped id per line.
pub fn save_id_list(path: &Path, ids: &[String]) -> Result<(), FormatError> {
    let mut out = String::new();
    for id in ids {
        out.push_str(id);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub const TOP_K: usize = 50;

/// File names of the three figure tables written by [`save_eval_tables`].
pub const EVAL_TABLES: [&str; 3] = ["topk_losses.csv", "mean_loss.csv", "loss_variance.csv"];

/// Writes the top-K loss curves, mean-vs-ρ and variance-vs-ρ tables into
/// `dir` and returns their paths. K is capped at the test-set size.
pub fn save_eval_tables(dir: &Path, result: &EvalResult) -> Result<Vec<PathBuf>, FormatError> {
    let paths: Vec<PathBuf> = EVAL_TABLES.iter().map(|n| dir.join(n)).collect();
    let rows = result.grid_rows();
    let k = TOP_K.min(result.test_ids.len());
    write_csv(&paths[0], &["method", "rho", "position", "loss"], |w| {
        for (rho, c) in &rows {
            let top = top_k_losses(result, c.method, c.rho, k).expect("cell exists");
            for (i, l) in top.iter().enumerate() {
                w.write_record([c.method.label().to_string(), rho.to_string(), (i + 1).to_string(), l.to_string()])?;
            }
        }
        Ok(())
    })?;
    write_csv(&paths[1], &["method", "rho", "train_size", "mean"], |w| {
        for (rho, c) in &rows {
            w.write_record([c.method.label().to_string(), rho.to_string(), c.train_size.to_string(), c.mean.to_string()])?;
        }
        Ok(())
    })?;
    write_csv(&paths[2], &["method", "rho", "train_size", "variance"], |w| {
        for (rho, c) in &rows {
            w.write_record([c.method.label().to_string(), rho.to_string(), c.train_size.to_string(), c.variance.to_string()])?;
        }
        Ok(())
    })?;
    Ok(paths)
}

/// Appends one JSON object per line; used for provider transcripts.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> Result<Self, FormatError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = fs::OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        Ok(JsonlWriter { path: path.to_path_buf(), out: BufWriter::new(file) })
    }

    pub fn append<T: Serialize>(&mut self, value: &T) -> Result<(), FormatError> {
        let line = serde_json::to_string(value).map_err(|e| invalid(&self.path, e))?;
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(io_err(&self.path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
