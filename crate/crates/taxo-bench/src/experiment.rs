//! Experiment runs over the method grid.
//!
//! A run config names datasets, a backend, a scorer and a list of cells
//! (method × filter). Every cell becomes one [`RunManifest`] persisted under
//! `out_dir/<run_id>/` together with the recorded transcripts and the
//! per-record case-study dumps. Wall-clock data goes to a separate
//! `timing.json` so that manifests of scripted runs are reproducible byte
//! for byte.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use taxo_core::{aggregate, aggregate_micro, evaluate, MetricsReport};
use taxo_induce::{
    demonstration_from_taxonomy, generate_zero_shot_demos, induce, ChatBackend, Demonstration, EngineError,
    FilterConfig, HttpBackend, HttpConfig, HypernymScorer, InductionConfig, InductionMode, InductionReport,
    LexicalScorer, RecordingBackend, RemoteScorer, RemoteScorerConfig, ReplayMode, ScriptedBackend,
    ScriptedConfig, ZeroShotConfig,
};

use crate::case_study::side_by_side;
use crate::dataset::{load_dataset, DatasetRecord, Split};
use crate::error::RunError;
use crate::sample::{sample_grid, sample_in_band, DEFAULT_REPEATS};
use crate::tables::{AblationRow, AblationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hf,
    Col,
}

impl Method {
    pub fn mode(self) -> InductionMode {
        match self {
            Method::Hf => InductionMode::HfOneshot,
            Method::Col => InductionMode::Col,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Hf => "hf",
            Method::Col => "col",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    Zero,
    #[default]
    Few,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub filter: bool,
}

/// Where chat replies come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    /// Recorded transcripts at `<dir>/<method>/<record>.ndjson`, relative to
    /// the config file.
    Scripted {
        dir: PathBuf,
        #[serde(default)]
        mode: ReplayMode,
    },
    Http(HttpConfig),
}

impl BackendSpec {
    pub fn describe(&self) -> String {
        match self {
            BackendSpec::Scripted { dir, .. } => format!("scripted:{}", dir.display()),
            BackendSpec::Http(c) => format!("http:{}", c.endpoint_url),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScorerSpec {
    #[default]
    Lexical,
    Remote(RemoteScorerConfig),
}

impl ScorerSpec {
    pub fn describe(&self) -> String {
        match self {
            ScorerSpec::Lexical => "lexical".into(),
            ScorerSpec::Remote(c) => format!("remote:{}", c.base_url),
        }
    }

    pub fn build(&self) -> Result<Box<dyn HypernymScorer>, RunError> {
        Ok(match self {
            ScorerSpec::Lexical => Box::new(LexicalScorer::default()),
            ScorerSpec::Remote(c) => {
                Box::new(RemoteScorer::new(c.clone()).map_err(|e| RunError::Config(e.to_string()))?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Fixed target sizes; each yields `repeats` samples.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Alternatively a `[min, max]` band; each repeat draws its own size.
    #[serde(default)]
    pub band: Option<(usize, usize)>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    DEFAULT_REPEATS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Chat model name sent with every request.
    #[serde(default = "default_model")]
    pub model: String,
    /// Dataset files, relative to the config file.
    pub datasets: Vec<PathBuf>,
    /// Source of few-shot demonstrations; defaults to the train records of
    /// `datasets`.
    #[serde(default)]
    pub demo_dataset: Option<PathBuf>,
    /// Splits whose records are induced.
    #[serde(default = "default_splits")]
    pub splits: Vec<Split>,
    #[serde(default)]
    pub shots: Shots,
    #[serde(default = "default_demo_count")]
    pub demo_count: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_true")]
    pub strict_entities: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_stall_limit")]
    pub stall_limit: usize,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub sampling: Option<SamplingConfig>,
    pub backend: BackendSpec,
    #[serde(default)]
    pub scorer: ScorerSpec,
    pub cells: Vec<Cell>,
}

fn default_model() -> String {
    InductionConfig::default().model
}
fn default_splits() -> Vec<Split> {
    vec![Split::Test]
}
fn default_demo_count() -> usize {
    5
}
fn default_top_k() -> usize {
    taxo_induce::FilterConfig::default().top_k
}
fn default_true() -> bool {
    true
}
fn default_workers() -> usize {
    4
}
fn default_max_iterations() -> usize {
    InductionConfig::default().max_iterations
}
fn default_stall_limit() -> usize {
    InductionConfig::default().stall_limit
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let is_json = path.extension().is_some_and(|x| x == "json");
        let config: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| RunError::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| RunError::Config(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::Config(m.to_string()));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be non-empty and contain no path separators");
        }
        if self.model.trim().is_empty() {
            return bad("model must be non-empty");
        }
        if self.datasets.is_empty() {
            return bad("at least one dataset is required");
        }
        if self.cells.is_empty() {
            return bad("at least one cell is required");
        }
        let distinct: HashSet<(Method, bool)> = self.cells.iter().map(|c| (c.method, c.filter)).collect();
        if distinct.len() != self.cells.len() {
            return bad("cells must be distinct");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.demo_count == 0 {
            return bad("demo_count must be at least 1");
        }
        if let Some(s) = &self.sampling {
            if s.sizes.is_empty() == s.band.is_none() {
                return bad("sampling needs exactly one of sizes or band");
            }
            if s.repeats == 0 {
                return bad("sampling repeats must be at least 1");
            }
        }
        if let BackendSpec::Http(c) = &self.backend {
            c.validate().map_err(|e| RunError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn run_id(&self, cell: Cell) -> String {
        let filter = if cell.filter { "filter" } else { "nofilter" };
        format!("{}-{}-{}", self.name, cell.method, filter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub name: String,
    pub dataset: String,
    pub metrics: Option<MetricsReport>,
    pub report: Option<InductionReport>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demo_diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub model: String,
    pub method: Method,
    pub shots: Shots,
    pub filter: bool,
    pub top_k: usize,
    pub strict_entities: bool,
    pub seed: u64,
    pub backend: String,
    pub scorer: String,
    pub datasets: Vec<String>,
    pub averaging: Averaging,
    /// Sorted by record name.
    pub records: Vec<RecordResult>,
    /// Over the records that succeeded; absent when none did.
    pub aggregate: Option<MetricsReport>,
    pub failures: usize,
}

impl RunManifest {
    pub fn all_failed(&self) -> bool {
        !self.records.is_empty() && self.failures == self.records.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub run_id: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub records_ms: BTreeMap<String, u128>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub manifests: Vec<RunManifest>,
    pub table: AblationTable,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> usize {
        self.manifests.iter().map(|m| m.failures).sum()
    }
}

/// A record tagged with the dataset it came from.
#[derive(Debug, Clone)]
struct Job {
    dataset: String,
    record: DatasetRecord,
}

fn dataset_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_jobs(config: &RunConfig, base: &Path) -> Result<(Vec<Job>, Vec<DatasetRecord>), RunError> {
    let mut jobs = Vec::new();
    let mut train = Vec::new();
    for path in &config.datasets {
        let label = dataset_label(path);
        for record in load_dataset(&resolve(base, path))? {
            if record.split == Split::Train {
                train.push(record.clone());
            }
            if !config.splits.contains(&record.split) {
                continue;
            }
            let expanded = match &config.sampling {
                None => vec![record],
                Some(s) if !s.sizes.is_empty() => sample_grid(&record, &s.sizes, s.repeats, config.seed)?,
                Some(s) => {
                    let (min, max) = s.band.expect("validated");
                    (0..s.repeats as u64)
                        .map(|r| {
                            let seed = config.seed.wrapping_add(r);
                            let gold = sample_in_band(&record.gold, min, max, seed)?;
                            let entities = record.entities.iter().filter(|e| gold.contains(e)).cloned().collect();
                            Ok(DatasetRecord {
                                name: format!("{}-b{}-s{seed}", record.name, gold.len()),
                                root: record.root.clone(),
                                entities,
                                gold,
                                split: record.split,
                            })
                        })
                        .collect::<Result<Vec<_>, RunError>>()?
                }
            };
            jobs.extend(expanded.into_iter().map(|record| Job {
                dataset: label.clone(),
                record,
            }));
        }
    }
    jobs.sort_by(|a, b| a.record.name.cmp(&b.record.name));
    if let Some(w) = jobs.windows(2).find(|w| w[0].record.name == w[1].record.name) {
        return Err(RunError::Config(format!("duplicate record name '{}'", w[0].record.name)));
    }
    if jobs.is_empty() {
        return Err(RunError::Config(format!("no records in splits {:?}", config.splits)));
    }
    if let Some(path) = &config.demo_dataset {
        train = load_dataset(&resolve(base, path))?
            .into_iter()
            .filter(|r| r.split == Split::Train)
            .collect();
    }
    Ok((jobs, train))
}

/// The first `count` train records other than `record`, in file order.
pub fn few_shot_demos(
    train: &[DatasetRecord],
    record: &DatasetRecord,
    count: usize,
) -> Result<Vec<Demonstration>, EngineError> {
    train
        .iter()
        .filter(|r| r.name != record.name)
        .take(count)
        .map(|r| demonstration_from_taxonomy(&r.gold, &r.entities).map_err(EngineError::from))
        .collect()
}

enum BackendSource {
    Scripted { dir: PathBuf, mode: ReplayMode },
    Http(Arc<HttpBackend>),
}

impl BackendSource {
    fn new(spec: &BackendSpec, base: &Path) -> Result<Self, RunError> {
        Ok(match spec {
            BackendSpec::Scripted { dir, mode } => BackendSource::Scripted {
                dir: resolve(base, dir),
                mode: *mode,
            },
            BackendSpec::Http(c) => {
                BackendSource::Http(Arc::new(HttpBackend::new(c.clone()).map_err(|e| RunError::Config(e.to_string()))?))
            }
        })
    }

    fn for_record(&self, method: Method, record: &str) -> Result<Box<dyn ChatBackend>, String> {
        match self {
            BackendSource::Scripted { dir, mode } => {
                let config = ScriptedConfig {
                    transcript_path: dir.join(method.to_string()).join(format!("{record}.ndjson")),
                    mode: *mode,
                };
                ScriptedBackend::from_config(&config)
                    .map(|b| Box::new(b) as Box<dyn ChatBackend>)
                    .map_err(|e| format!("{}: {e}", config.transcript_path.display()))
            }
            BackendSource::Http(b) => Ok(Box::new(Arc::clone(b))),
        }
    }
}

struct JobOutput {
    result: RecordResult,
    transcript: Vec<taxo_induce::ScriptRecord>,
    elapsed_ms: u128,
}

fn run_one(
    config: &RunConfig,
    cell: Cell,
    job: &Job,
    train: &[DatasetRecord],
    source: &BackendSource,
    scorer: &dyn HypernymScorer,
) -> JobOutput {
    let started = Instant::now();
    let record = &job.record;
    let mut result = RecordResult {
        name: record.name.clone(),
        dataset: job.dataset.clone(),
        metrics: None,
        report: None,
        error: None,
        demo_diagnostics: Vec::new(),
    };
    let backend = match source.for_record(cell.method, &record.name) {
        Ok(b) => RecordingBackend::new(b),
        Err(e) => {
            result.error = Some(e);
            return JobOutput {
                result,
                transcript: Vec::new(),
                elapsed_ms: started.elapsed().as_millis(),
            };
        }
    };
    let demos = match config.shots {
        Shots::Few => few_shot_demos(train, record, config.demo_count),
        Shots::Zero => generate_zero_shot_demos(
            &record.root,
            config.demo_count,
            &ZeroShotConfig {
                model: config.model.clone(),
                ..ZeroShotConfig::default()
            },
            &backend,
        )
            .map(|z| {
                result.demo_diagnostics = z.diagnostics;
                z.demonstrations
            }),
    };
    let outcome = demos.and_then(|demonstrations| {
        let induction = InductionConfig {
            mode: cell.method.mode(),
            demonstrations,
            filter_enabled: cell.filter,
            filter: FilterConfig {
                top_k: config.top_k,
                ..FilterConfig::default()
            },
            max_iterations: config.max_iterations,
            stall_limit: config.stall_limit,
            strict_entity_set: config.strict_entities,
            model: config.model.clone(),
            ..InductionConfig::default()
        };
        induce(&record.entities, &record.root, &induction, &backend, scorer)
    });
    match outcome {
        Ok(report) => {
            result.metrics = Some(evaluate(&report.final_taxonomy, &record.gold));
            result.report = Some(report);
        }
        Err(EngineError::Aborted { partial, source }) => {
            log::warn!("{}: session aborted: {source}", record.name);
            result.error = Some(format!("session aborted: {source}"));
            result.report = Some(*partial);
        }
        Err(e) => {
            log::warn!("{}: {e}", record.name);
            result.error = Some(e.to_string());
        }
    }
    JobOutput {
        result,
        transcript: backend.records(),
        elapsed_ms: started.elapsed().as_millis(),
    }
}

/// Runs `jobs` on a bounded pool of scoped threads; outputs come back in
/// job order.
fn run_pool<T: Send>(n: usize, workers: usize, work: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let out = work(i);
                slots.lock().expect("lock")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("lock").into_iter().map(|o| o.expect("every job ran")).collect()
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

fn aggregate_of(results: &[&RecordResult], averaging: Averaging) -> Option<MetricsReport> {
    let reports: Vec<MetricsReport> = results.iter().filter_map(|r| r.metrics).collect();
    match averaging {
        Averaging::Macro => aggregate(&reports).ok(),
        Averaging::Micro => aggregate_micro(&reports).ok(),
    }
}

/// Runs every cell of `config` and persists the results under `out_dir`.
/// `base` anchors the relative paths in the config.
///
/// Per-record failures are recorded in the manifests; the call fails only
/// when the config is unusable or when every record of every cell failed.
pub fn run_experiment(config: &RunConfig, base: &Path, out_dir: &Path) -> Result<ExperimentOutcome, RunError> {
    config.validate()?;
    let (jobs, train) = load_jobs(config, base)?;
    let source = BackendSource::new(&config.backend, base)?;
    let scorer = config.scorer.build()?;
    let datasets: Vec<String> = config.datasets.iter().map(|p| p.display().to_string()).collect();
    let dataset_order: Vec<String> = {
        let mut seen = Vec::new();
        for p in &config.datasets {
            let l = dataset_label(p);
            if !seen.contains(&l) {
                seen.push(l);
            }
        }
        seen
    };

    let mut manifests = Vec::new();
    let mut rows = Vec::new();
    for &cell in &config.cells {
        let run_id = config.run_id(cell);
        let started = now_ms();
        let outputs = run_pool(jobs.len(), config.workers, |i| {
            run_one(config, cell, &jobs[i], &train, &source, scorer.as_ref())
        });
        let finished = now_ms();

        let run_dir = out_dir.join(&run_id);
        let mut records_ms = BTreeMap::new();
        for (job, out) in jobs.iter().zip(&outputs) {
            let name = &job.record.name;
            records_ms.insert(name.clone(), out.elapsed_ms);
            let path = run_dir.join("transcripts").join(format!("{name}.ndjson"));
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
            }
            taxo_induce::record_session(&out.transcript, &path).map_err(|e| RunError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            })?;
            let pred = out.result.report.as_ref().map(|r| &r.final_taxonomy);
            let dump = side_by_side(&job.record.gold, pred, out.result.metrics.as_ref(), out.result.error.as_deref());
            write(&run_dir.join("cases").join(format!("{name}.txt")), &dump)?;
        }

        let records: Vec<RecordResult> = outputs.into_iter().map(|o| o.result).collect();
        let failures = records.iter().filter(|r| r.error.is_some()).count();
        let manifest = RunManifest {
            run_id: run_id.clone(),
            model: config.model.clone(),
            method: cell.method,
            shots: config.shots,
            filter: cell.filter,
            top_k: config.top_k,
            strict_entities: config.strict_entities,
            seed: config.seed,
            backend: config.backend.describe(),
            scorer: config.scorer.describe(),
            datasets: datasets.clone(),
            averaging: config.averaging,
            aggregate: aggregate_of(&records.iter().collect::<Vec<_>>(), config.averaging),
            records,
            failures,
        };
        write(&run_dir.join("manifest.json"), &to_json(&manifest))?;
        write(
            &run_dir.join("timing.json"),
            &to_json(&Timing {
                run_id,
                started_unix_ms: started,
                finished_unix_ms: finished,
                records_ms,
            }),
        )?;

        for label in &dataset_order {
            let subset: Vec<&RecordResult> = manifest.records.iter().filter(|r| &r.dataset == label).collect();
            if subset.is_empty() {
                continue;
            }
            rows.push(AblationRow {
                dataset: label.clone(),
                col: cell.method == Method::Col,
                filter: cell.filter,
                records: subset.len(),
                failures: subset.iter().filter(|r| r.error.is_some()).count(),
                metrics: aggregate_of(&subset, config.averaging),
            });
        }
        manifests.push(manifest);
    }

    let table = AblationTable::new(rows);
    write(&out_dir.join(format!("{}.table.json", config.name)), &to_json(&table))?;
    write(&out_dir.join(format!("{}.table.tsv", config.name)), &table.to_tsv())?;
    write(&out_dir.join(format!("{}.table.txt", config.name)), &table.to_text())?;

    if manifests.iter().all(|m| m.all_failed()) {
        let first = manifests
            .iter()
            .flat_map(|m| &m.records)
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(RunError::AllRecordsFailed {
            run_id: config.name.clone(),
            first,
        });
    }
    Ok(ExperimentOutcome { manifests, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABLATION: &str = include_str!("../fixtures/ablation.toml");

    fn fixtures_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
    }

    #[test]
    fn bundled_config_parses() {
        let c = RunConfig::from_toml(ABLATION).unwrap();
        assert_eq!(c.cells.len(), 4);
        assert_eq!(c.top_k, 10);
        assert!(c.strict_entities);
        assert_eq!(c.run_id(c.cells[0]), format!("{}-col-filter", c.name));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = "name = \"x\"\ndatasets = [\"a.json\"]\nbackend = { kind = \"scripted\", dir = \"t\" }\n";
        assert!(RunConfig::from_toml(&format!("{base}cells = []\n")).is_err());
        let dup = "cells = [{ method = \"col\", filter = true }, { method = \"col\", filter = true }]\n";
        assert!(RunConfig::from_toml(&format!("{base}{dup}")).is_err());
        let ok = "cells = [{ method = \"col\", filter = true }]\n";
        assert!(RunConfig::from_toml(&format!("{base}{ok}top_k = 0\n")).is_err());
        assert!(RunConfig::from_toml(&format!("{base}{ok}bogus = 1\n")).is_err());
        assert!(RunConfig::from_toml(&format!("{base}{ok}")).is_ok());
    }

    #[test]
    fn golden_col_run() {
        let mut config = RunConfig::from_toml(ABLATION).unwrap();
        config.cells = vec![Cell {
            method: Method::Col,
            filter: false,
        }];
        let out = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&config, &fixtures_dir(), out.path()).unwrap();
        let m = &outcome.manifests[0];
        let maneuver = m.records.iter().find(|r| r.name == "maneuver").unwrap();
        assert_eq!(maneuver.metrics.unwrap().edge.f1, 1.0);
        assert!(out.path().join(&m.run_id).join("manifest.json").exists());
        assert!(out.path().join(&m.run_id).join("cases/maneuver.txt").exists());
        let recorded = taxo_induce::load_transcript(&out.path().join(&m.run_id).join("transcripts/maneuver.ndjson")).unwrap();
        assert_eq!(recorded.len(), 8);
        assert!(recorded.iter().all(|r| r.digest.is_some()));
    }

    #[test]
    fn hf_knife_run_drops_knife() {
        let mut config = RunConfig::from_toml(ABLATION).unwrap();
        config.cells = vec![Cell {
            method: Method::Hf,
            filter: false,
        }];
        let out = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&config, &fixtures_dir(), out.path()).unwrap();
        let cutlery = outcome.manifests[0].records.iter().find(|r| r.name == "cutlery").unwrap();
        assert_eq!(cutlery.metrics.unwrap().node.recall, 1.0);
        let report = cutlery.report.as_ref().unwrap();
        assert_eq!(report.dropped_hallucinations, vec![taxo_core::Entity::new("knife").unwrap()]);
    }

    #[test]
    fn missing_transcripts_fail_per_record() {
        let mut config = RunConfig::from_toml(ABLATION).unwrap();
        config.backend = BackendSpec::Scripted {
            dir: PathBuf::from("no-such-dir"),
            mode: ReplayMode::Digest,
        };
        let out = tempfile::tempdir().unwrap();
        match run_experiment(&config, &fixtures_dir(), out.path()) {
            Err(RunError::AllRecordsFailed { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pool_preserves_order() {
        let out = run_pool(50, 4, |i| i * 2);
        assert_eq!(out, (0..50).map(|i| i * 2).collect::<Vec<_>>());
    }
}
