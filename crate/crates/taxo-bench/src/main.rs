//! `taxocol`: command-line front end for induction, evaluation, sampling and
//! experiment runs.
//!
//! Exit codes: 0 success, 1 partial failure (some records or the session
//! failed), 2 invalid input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use taxo_bench::{
    few_shot_demos, load_dataset, parse_dataset, run_experiment, sample_in_band, sample_record, save_dataset,
    side_by_side, synthetic_tree, BackendSpec, DatasetRecord, RunConfig, RunManifest, ScorerSpec, Split,
};
use taxo_core::{evaluate, parse_taxonomy, render_outline, MetricsReport, Taxonomy};
use taxo_induce::{
    generate_zero_shot_demos, induce, ChatBackend, EngineError, FilterConfig, HttpBackend, HttpConfig,
    InductionConfig, InductionMode, RecordingBackend, RemoteScorerConfig, ReplayMode, ScriptedBackend,
    ScriptedConfig, ZeroShotConfig,
};

#[derive(Parser)]
#[command(name = "taxocol", version, about = "Layer-by-layer taxonomy induction with chat models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Induce one record and print the outline and report.
    Induce(InduceArgs),
    /// Compare a predicted taxonomy with a gold one.
    Evaluate(EvaluateArgs),
    /// Write sampled sub-taxonomies, one file per sample.
    Sample(SampleArgs),
    /// Generate demonstrations from the model alone and save them.
    GenDemos(GenDemosArgs),
    /// Run a full experiment from a config file.
    Run(RunArgs),
    /// Render gold and predicted taxonomies side by side.
    CaseStudy(CaseStudyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Col,
    Hf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShotsArg {
    Few,
    Zero,
}

#[derive(Args)]
struct FilterFlags {
    /// Enable the ranking filter.
    #[arg(long, overrides_with = "no_filter")]
    filter: bool,
    /// Disable the ranking filter.
    #[arg(long, overrides_with = "filter")]
    no_filter: bool,
    /// Keep an edge when its parent ranks within the top K candidates.
    #[arg(long)]
    top_k: Option<usize>,
    /// Prune entities outside the given list (default).
    #[arg(long, overrides_with = "lenient_entities")]
    strict_entities: bool,
    /// Keep entities the model invents.
    #[arg(long, overrides_with = "strict_entities")]
    lenient_entities: bool,
}

impl FilterFlags {
    fn filter(&self) -> Option<bool> {
        match (self.filter, self.no_filter) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }

    fn strict(&self) -> Option<bool> {
        match (self.strict_entities, self.lenient_entities) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Args)]
struct InduceArgs {
    /// Dataset file holding the record.
    #[arg(long)]
    dataset: PathBuf,
    /// Record name; optional when the file holds one record.
    #[arg(long)]
    record: Option<String>,
    #[arg(long, value_enum, default_value = "col")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "few")]
    shots: ShotsArg,
    /// Train records used as demonstrations; defaults to the train records
    /// of --dataset.
    #[arg(long)]
    demo_dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    demo_count: usize,
    /// `scripted:<transcript.ndjson>` or `http:<chat-completions URL>`.
    #[arg(long)]
    backend: String,
    /// Environment variable holding the API key for an http backend.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// Chat model name sent with every request.
    #[arg(long, default_value = "gpt-4")]
    model: String,
    /// `lexical` or `remote:<base URL>`.
    #[arg(long, default_value = "lexical")]
    scorer: String,
    #[command(flatten)]
    flags: FilterFlags,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    stall_limit: Option<usize>,
    /// Also write the report JSON and the recorded transcript here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted taxonomy: dataset JSON or an outline text file.
    pred: PathBuf,
    /// Gold taxonomy: dataset JSON or an outline text file.
    gold: PathBuf,
    /// Record to use when a dataset file holds several.
    #[arg(long)]
    record: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SampleArgs {
    /// Source dataset; without it a synthetic tree of --synthetic nodes is
    /// sampled.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    record: Option<String>,
    #[arg(long, default_value_t = 200)]
    synthetic: usize,
    /// Comma-separated fixed sizes.
    #[arg(long, value_delimiter = ',', conflicts_with = "band")]
    sizes: Vec<usize>,
    /// `MIN,MAX`: each repeat draws its size from the band.
    #[arg(long, value_delimiter = ',', value_name = "MIN,MAX")]
    band: Vec<usize>,
    #[arg(long, default_value_t = taxo_bench::DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "samples")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenDemosArgs {
    #[arg(long)]
    root: String,
    #[arg(long, default_value_t = 5)]
    count: usize,
    #[arg(long)]
    backend: String,
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value = "gpt-4")]
    model: String,
    #[arg(long)]
    temperature: Option<f64>,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's backend: `scripted:<dir>` or `http:<URL>`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// Replace the config's chat model name.
    #[arg(long)]
    model: Option<String>,
    /// Replace the config's scorer: `lexical` or `remote:<base URL>`.
    #[arg(long)]
    scorer: Option<String>,
    /// --filter / --no-filter keep only the cells with that setting.
    #[command(flatten)]
    flags: FilterFlags,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CaseStudyArgs {
    /// Manifest written by `run`; renders every record (or --record).
    #[arg(long, conflicts_with_all = ["gold", "pred"])]
    manifest: Option<PathBuf>,
    #[arg(long)]
    record: Option<String>,
    #[arg(long, requires = "pred")]
    gold: Option<PathBuf>,
    #[arg(long, requires = "gold")]
    pred: Option<PathBuf>,
}

enum Failure {
    /// Bad arguments, configs or input files.
    Invalid(String),
    /// The work ran but some of it failed.
    Partial(String),
}

type CliResult = Result<(), Failure>;

fn invalid(e: impl ToString) -> Failure {
    Failure::Invalid(e.to_string())
}

fn parse_backend_file(spec: &str, api_key_env: &str) -> Result<Box<dyn ChatBackend>, Failure> {
    if let Some(path) = spec.strip_prefix("scripted:") {
        let config = ScriptedConfig {
            transcript_path: PathBuf::from(path),
            mode: ReplayMode::Digest,
        };
        return Ok(Box::new(ScriptedBackend::from_config(&config).map_err(|e| invalid(format!("{path}: {e}")))?));
    }
    if let Some(url) = spec.strip_prefix("http:") {
        let config = http_config(url, api_key_env);
        return Ok(Box::new(HttpBackend::new(config).map_err(invalid)?));
    }
    Err(invalid(format!("backend '{spec}': expected scripted:<path> or http:<url>")))
}

fn http_config(url: &str, api_key_env: &str) -> HttpConfig {
    // `http:https://...` and `http:http://...` keep the scheme; a bare
    // `http://host/...` also works.
    let endpoint_url = if url.starts_with("//") {
        format!("http:{url}")
    } else {
        url.to_string()
    };
    HttpConfig {
        endpoint_url,
        api_key_env: Some(api_key_env.to_string()),
        ..HttpConfig::default()
    }
}

fn parse_backend_spec(spec: &str, api_key_env: &str) -> Result<BackendSpec, Failure> {
    if let Some(dir) = spec.strip_prefix("scripted:") {
        return Ok(BackendSpec::Scripted {
            dir: PathBuf::from(dir),
            mode: ReplayMode::Digest,
        });
    }
    if let Some(url) = spec.strip_prefix("http:") {
        return Ok(BackendSpec::Http(http_config(url, api_key_env)));
    }
    Err(invalid(format!("backend '{spec}': expected scripted:<dir> or http:<url>")))
}

fn parse_scorer(spec: &str) -> Result<ScorerSpec, Failure> {
    if spec == "lexical" {
        return Ok(ScorerSpec::Lexical);
    }
    if let Some(url) = spec.strip_prefix("remote:") {
        return Ok(ScorerSpec::Remote(RemoteScorerConfig {
            base_url: url.to_string(),
            ..RemoteScorerConfig::default()
        }));
    }
    Err(invalid(format!("scorer '{spec}': expected lexical or remote:<url>")))
}

fn pick_record(records: Vec<DatasetRecord>, name: Option<&str>, path: &Path) -> Result<DatasetRecord, Failure> {
    match name {
        Some(n) => records
            .into_iter()
            .find(|r| r.name == n)
            .ok_or_else(|| invalid(format!("{}: no record named '{n}'", path.display()))),
        None if records.len() == 1 => Ok(records.into_iter().next().expect("one record")),
        None => Err(invalid(format!(
            "{}: {} records; choose one with --record",
            path.display(),
            records.len()
        ))),
    }
}

/// Dataset JSON (one record chosen) or an outline.
fn load_taxonomy_file(path: &Path, record: Option<&str>) -> Result<Taxonomy, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        let records = parse_dataset(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        return Ok(pick_record(records, record, path)?.gold);
    }
    let (t, diagnostics) = parse_taxonomy(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    for d in diagnostics {
        log::warn!("{}: {d}", path.display());
    }
    Ok(t)
}

fn print_metrics(m: &MetricsReport) {
    for (label, prf) in [("ancestor", m.ancestor), ("edge", m.edge), ("node", m.node)] {
        println!(
            "{label:<8}  P {:.4}  R {:.4}  F1 {:.4}",
            prf.precision, prf.recall, prf.f1
        );
    }
}

fn write_file(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn cmd_induce(args: InduceArgs) -> CliResult {
    let records = load_dataset(&args.dataset).map_err(invalid)?;
    let train: Vec<DatasetRecord> = match &args.demo_dataset {
        Some(p) => load_dataset(p).map_err(invalid)?,
        None => records.clone(),
    }
    .into_iter()
    .filter(|r| r.split == Split::Train)
    .collect();
    let record = pick_record(records, args.record.as_deref(), &args.dataset)?;
    let backend = RecordingBackend::new(parse_backend_file(&args.backend, &args.api_key_env)?);
    let scorer = parse_scorer(&args.scorer)?.build().map_err(invalid)?;

    let demonstrations = match args.shots {
        ShotsArg::Few => few_shot_demos(&train, &record, args.demo_count).map_err(invalid)?,
        ShotsArg::Zero => {
            let zero = ZeroShotConfig {
                model: args.model.clone(),
                ..ZeroShotConfig::default()
            };
            generate_zero_shot_demos(&record.root, args.demo_count, &zero, &backend)
                .map_err(|e| Failure::Partial(e.to_string()))?
                .demonstrations
        }
    };
    let defaults = InductionConfig::default();
    let config = InductionConfig {
        mode: match args.method {
            MethodArg::Col => InductionMode::Col,
            MethodArg::Hf => InductionMode::HfOneshot,
        },
        demonstrations,
        filter_enabled: args.flags.filter().unwrap_or(false),
        filter: FilterConfig {
            top_k: args.flags.top_k.unwrap_or(defaults.filter.top_k),
            ..FilterConfig::default()
        },
        max_iterations: args.max_iterations.unwrap_or(defaults.max_iterations),
        stall_limit: args.stall_limit.unwrap_or(defaults.stall_limit),
        strict_entity_set: args.flags.strict().unwrap_or(true),
        model: args.model.clone(),
        ..defaults
    };
    config.validate().map_err(invalid)?;

    let (report, failure) = match induce(&record.entities, &record.root, &config, &backend, scorer.as_ref()) {
        Ok(r) => (r, None),
        Err(EngineError::Aborted { partial, source }) => (*partial, Some(format!("session aborted: {source}"))),
        Err(e) => return Err(Failure::Partial(e.to_string())),
    };
    println!("{}", render_outline(&report.final_taxonomy));
    println!();
    println!("termination: {:?}", report.termination);
    println!("iterations: {}", report.iterations.len());
    let list = |v: &[taxo_core::Entity]| v.iter().map(|e| e.surface()).collect::<Vec<_>>().join(", ");
    println!("unplaced: [{}]", list(&report.unplaced));
    println!("dropped hallucinations: [{}]", list(&report.dropped_hallucinations));
    println!("filtered out: [{}]", list(&report.filtered_out));
    let metrics = evaluate(&report.final_taxonomy, &record.gold);
    print_metrics(&metrics);

    if let Some(dir) = &args.out_dir {
        let body = serde_json::json!({ "record": record.name, "metrics": metrics, "report": report });
        write_file(
            &dir.join(format!("{}.report.json", record.name)),
            &(serde_json::to_string_pretty(&body).expect("serializable") + "\n"),
        )?;
        backend
            .save(&dir.join(format!("{}.ndjson", record.name)))
            .map_err(invalid)?;
    }
    match failure {
        Some(f) => Err(Failure::Partial(f)),
        None => Ok(()),
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let pred = load_taxonomy_file(&args.pred, args.record.as_deref())?;
    let gold = load_taxonomy_file(&args.gold, args.record.as_deref())?;
    let report = evaluate(&pred, &gold);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        print_metrics(&report);
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> CliResult {
    let source = match &args.dataset {
        Some(p) => pick_record(load_dataset(p).map_err(invalid)?, args.record.as_deref(), p)?,
        None => DatasetRecord::from_taxonomy("synthetic", synthetic_tree(args.synthetic.max(1), 6, 0), Split::Test),
    };
    if args.sizes.is_empty() == args.band.is_empty() {
        return Err(invalid("give exactly one of --sizes or --band"));
    }
    if args.repeats == 0 {
        return Err(invalid("--repeats must be at least 1"));
    }
    let mut samples = Vec::new();
    if !args.band.is_empty() {
        let [min, max] = args.band[..] else {
            return Err(invalid("--band takes exactly two values: MIN,MAX"));
        };
        for r in 0..args.repeats as u64 {
            let seed = args.seed.wrapping_add(r);
            let gold = sample_in_band(&source.gold, min, max, seed).map_err(invalid)?;
            let entities = source.entities.iter().filter(|e| gold.contains(e)).cloned().collect();
            samples.push(DatasetRecord {
                name: format!("{}-b{}-s{seed}", source.name, gold.len()),
                root: source.root.clone(),
                entities,
                gold,
                split: source.split,
            });
        }
    } else {
        for &size in &args.sizes {
            for r in 0..args.repeats as u64 {
                samples.push(sample_record(&source, size, args.seed.wrapping_add(r)).map_err(invalid)?);
            }
        }
    }
    for s in &samples {
        let path = args.out_dir.join(format!("{}.json", s.name));
        save_dataset(std::slice::from_ref(s), &path).map_err(invalid)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_gen_demos(args: GenDemosArgs) -> CliResult {
    let root = taxo_core::Entity::new(&args.root).map_err(invalid)?;
    let backend = parse_backend_file(&args.backend, &args.api_key_env)?;
    let mut config = ZeroShotConfig {
        model: args.model,
        ..ZeroShotConfig::default()
    };
    if let Some(t) = args.temperature {
        config.temperature = t;
    }
    let demos = generate_zero_shot_demos(&root, args.count, &config, &backend).map_err(|e| match e {
        EngineError::InvalidConfig(_) => invalid(e),
        other => Failure::Partial(other.to_string()),
    })?;
    for d in &demos.diagnostics {
        log::warn!("{d}");
    }
    write_file(
        &args.out,
        &(serde_json::to_string_pretty(&demos.demonstrations).expect("serializable") + "\n"),
    )?;
    println!("{} demonstrations written to {}", demos.demonstrations.len(), args.out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult {
    let mut config = RunConfig::load(&args.config).map_err(invalid)?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(b) = &args.backend {
        config.backend = parse_backend_spec(b, &args.api_key_env)?;
    }
    if let Some(m) = args.model {
        config.model = m;
    }
    if let Some(s) = &args.scorer {
        config.scorer = parse_scorer(s)?;
    }
    if let Some(f) = args.flags.filter() {
        config.cells.retain(|c| c.filter == f);
    }
    if let Some(k) = args.flags.top_k {
        config.top_k = k;
    }
    if let Some(s) = args.flags.strict() {
        config.strict_entities = s;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(invalid)?;
    let outcome = match run_experiment(&config, &base, &args.out_dir) {
        Ok(o) => o,
        Err(e @ taxo_bench::RunError::AllRecordsFailed { .. }) => return Err(Failure::Partial(e.to_string())),
        Err(e) => return Err(invalid(e)),
    };
    print!("{}", outcome.table.to_text());
    for m in &outcome.manifests {
        println!("{}: {}", m.run_id, args.out_dir.join(&m.run_id).join("manifest.json").display());
    }
    match outcome.failures() {
        0 => Ok(()),
        n => Err(Failure::Partial(format!("{n} record runs failed; see the manifests"))),
    }
}

fn cmd_case_study(args: CaseStudyArgs) -> CliResult {
    if let Some(path) = &args.manifest {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut shown = 0;
        for r in manifest.records.iter().filter(|r| args.record.as_ref().is_none_or(|n| *n == r.name)) {
            let dump = dir.join("cases").join(format!("{}.txt", r.name));
            let body = fs::read_to_string(&dump).map_err(|e| invalid(format!("{}: {e}", dump.display())))?;
            println!("== {} ({}) ==\n{body}", r.name, manifest.run_id);
            shown += 1;
        }
        if shown == 0 {
            return Err(invalid("no matching record in the manifest"));
        }
        return Ok(());
    }
    match (&args.gold, &args.pred) {
        (Some(g), Some(p)) => {
            let gold = load_taxonomy_file(g, args.record.as_deref())?;
            let pred = load_taxonomy_file(p, args.record.as_deref())?;
            print!("{}", side_by_side(&gold, Some(&pred), Some(&evaluate(&pred, &gold)), None));
            Ok(())
        }
        _ => Err(invalid("give --manifest, or both --gold and --pred")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Induce(a) => cmd_induce(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sample(a) => cmd_sample(a),
        Command::GenDemos(a) => cmd_gen_demos(a),
        Command::Run(a) => cmd_run(a),
        Command::CaseStudy(a) => cmd_case_study(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
