//! Subcommand runners behind the `themis` binary.
//!
//! Every run writes `<primary output>.manifest.json` recording the config
//! hash, input and output hashes, seed and versions. Exit status is 0 on
//! success, 1 for invalid input or config, 2 for runtime failures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bench::{self, AuditMode, BenchmarkManifest};
use crate::config::{JudgeSpec, PipelineConfig, ScorerSpec};
use crate::filter::{self, FilterContext, Stage};
use crate::jsonl::{self, JsonlError};
use crate::metrics::{self, PromptMode, ReportBundle};
use crate::mining::judge::HttpJudge;
use crate::mining::{self, JudgeClient, JudgeError, MiningServices, ReplayJudge};
use crate::net::RetryPolicy;
use crate::scorer::{RemoteScorer, Scorer, ToyRewardModel, ENV_TOKEN, ENV_URL};
use crate::train::{self, TrainStage};
use crate::types::{parse_record, CommitRecord, PreferencePair, RankedCandidate, Record};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const BUILTIN_MANIFEST: &str = "builtin:code-reward-bench";

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Runtime(_) => 2,
        }
    }
}

fn validation(e: impl ToString) -> AppError {
    AppError::Validation(e.to_string())
}

fn runtime(e: impl ToString) -> AppError {
    AppError::Runtime(e.to_string())
}

impl From<JsonlError> for AppError {
    fn from(e: JsonlError) -> Self {
        if e.is_validation() {
            validation(e)
        } else {
            runtime(e)
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "themis", version, about = "Code preference mining, cleaning, benchmark assembly and reward-model evaluation")]
pub struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override the config's rng_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn commit records into preference pairs.
    Mine(MineArgs),
    /// Run cleaning stages over preference pairs.
    Filter(FilterArgs),
    /// Group pairs into a benchmark and audit cell counts.
    Assemble(AssembleArgs),
    /// Evaluate a scorer on benchmark pairs and candidate lists.
    Eval(EvalArgs),
    /// Train the toy reward model.
    TrainToy(TrainArgs),
    /// Render saved JSON reports as markdown and CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Input JSONL.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Primary output; `<out>.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Reject log [default: <out>.rejects.jsonl].
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// all, length, depth, langppl, dedup or decontam.
    #[arg(long, default_value = "all")]
    pub stage: String,
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Input JSONL.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Primary output; `<out>.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Reject log [default: <out>.rejects.jsonl].
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Manifest TOML, or `builtin:code-reward-bench`.
    #[arg(long)]
    pub manifest: Option<String>,
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Input JSONL.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Primary output; `<out>.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-cell audit CSV [default: <out>.audit.csv].
    #[arg(long)]
    pub audit: Option<PathBuf>,
    /// Fail when a cell receives more pairs than expected.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Benchmark pairs, candidate lists, or both.
    #[arg(long)]
    pub bench: PathBuf,
    /// toy, toy:<weights.json> or http:<url>.
    #[arg(long)]
    pub scorer: Option<String>,
    /// none, all or single.
    #[arg(long)]
    pub criteria_mode: Option<String>,
    /// Primary output; `<out>.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV rendering [default: <out> with .csv].
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Machine-readable report for `themis report` [default: <out> with .json].
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// pt or pm.
    #[arg(long)]
    pub stage: Option<String>,
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Training pairs.
    #[arg(long)]
    pub data: PathBuf,
    /// Primary output; `<out>.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss curve [default: <out> with .curve.csv].
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Start from these weights (e.g. the PT stage output).
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON reports written by `themis eval`.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Primary output; `<out>.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV rendering [default: <out> with .csv].
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn sha256_file(path: &Path) -> Result<String, AppError> {
    let bytes = std::fs::read(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    themis_version: String,
    schema: String,
    seed: Option<u64>,
    workers: usize,
    config: Option<BTreeMap<String, String>>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    stats: Value,
    created_at: String,
}

struct Run<'a> {
    command: &'a str,
    cfg: Option<&'a PipelineConfig>,
    workers: usize,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run<'_> {
    fn finish(self, stats: Value) -> Result<(), AppError> {
        let primary = self.outputs.first().expect("every command has an output").clone();
        let hash_all = |ps: &[PathBuf]| -> Result<BTreeMap<String, String>, AppError> {
            ps.iter().map(|p| Ok((p.display().to_string(), sha256_file(p)?))).collect()
        };
        let manifest = RunManifest {
            command: self.command.to_string(),
            themis_version: VERSION.to_string(),
            schema: jsonl::SCHEMA_VERSION.to_string(),
            seed: self.cfg.map(|c| c.rng_seed),
            workers: self.workers,
            config: self.cfg.map(|c| {
                BTreeMap::from([
                    ("path".to_string(), c.path.display().to_string()),
                    ("sha256".to_string(), c.sha256.clone()),
                ])
            }),
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
            stats,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        write_file(&sibling(&primary, ".manifest.json"), &text)
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<PipelineConfig, AppError> {
    let mut cfg = PipelineConfig::load(path).map_err(validation)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    init_logging(cli.log_level.as_deref().unwrap_or(&cfg.log_level));
    Ok(cfg)
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new().parse_filters(level).format_timestamp(None).try_init();
}

fn worker_count(cli: &Cli, cfg: Option<&PipelineConfig>) -> usize {
    cli.workers
        .or_else(|| cfg.and_then(|c| c.workers))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, AppError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(runtime)
}

fn read_mixed(path: &Path) -> Result<Vec<Record>, AppError> {
    let text = jsonl::read_text(path)?;
    Ok(jsonl::parse_with(&text, &path.display().to_string(), parse_record)?)
}

/// Parse arguments from `args`, run, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("themis: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Mine(a) => run_mine(cli, a),
        Command::Filter(a) => run_filter(cli, a),
        Command::Assemble(a) => run_assemble(cli, a),
        Command::Eval(a) => run_eval(cli, a),
        Command::TrainToy(a) => run_train(cli, a),
        Command::Report(a) => run_report(cli, a),
    }
}

fn build_judges(cfg: &PipelineConfig) -> Result<Vec<Box<dyn JudgeClient>>, AppError> {
    if cfg.mining.judges.is_empty() {
        return Err(validation("missing config key `mining.judges`"));
    }
    cfg.mining
        .judges
        .iter()
        .map(|j| -> Result<Box<dyn JudgeClient>, AppError> {
            match j {
                JudgeSpec::Replay { id, path } => Ok(Box::new(
                    ReplayJudge::from_file(id, path).map_err(|e| validation(format!("judge {id}: {e}")))?,
                )),
                JudgeSpec::Http { id, url, model, token_env } => {
                    let token = token_env.as_ref().and_then(|v| std::env::var(v).ok());
                    Ok(Box::new(HttpJudge::new(id, url, model, token).map_err(runtime)?))
                }
            }
        })
        .collect()
}

fn run_mine(cli: &Cli, a: &MineArgs) -> Result<(), AppError> {
    let cfg = load_config(&a.config, cli)?;
    let workers = worker_count(cli, Some(&cfg));
    let records: Vec<CommitRecord> = jsonl::read_path(&a.input)?;
    let judges = build_judges(&cfg)?;
    let refs: Vec<&dyn JudgeClient> = judges.iter().map(|j| j.as_ref()).collect();
    let instruction_judge = match &cfg.mining.instruction_judge {
        None => None,
        Some(id) => Some(
            *refs
                .iter()
                .find(|j| j.id() == id)
                .ok_or_else(|| validation(format!("invalid config key `mining.instruction_judge`: no judge {id:?}")))?,
        ),
    };
    let svc = MiningServices { judges: refs.clone(), instruction_judge, classifier: None };
    let out = pool(workers)?
        .install(|| mining::mine(&records, &cfg.mining.config, &svc))
        .map_err(|e: JudgeError| runtime(e))?;
    let rejects = a.rejects.clone().unwrap_or_else(|| sibling(&a.out, ".rejects.jsonl"));
    write_file(&a.out, &jsonl::to_string(&out.pairs))?;
    write_file(&rejects, &jsonl::to_string(&out.rejects))?;
    log::info!("mined {} pairs from {} records", out.pairs.len(), records.len());
    let mut inputs = vec![a.input.clone()];
    inputs.extend(cfg.mining.judges.iter().filter_map(|j| match j {
        JudgeSpec::Replay { path, .. } => Some(path.clone()),
        JudgeSpec::Http { .. } => None,
    }));
    Run { command: "mine", cfg: Some(&cfg), workers, inputs, outputs: vec![a.out.clone(), rejects] }.finish(json!({
        "records": records.len(),
        "pairs": out.pairs.len(),
        "rejects": out.reject_counts(),
    }))
}

fn parse_stages(s: &str) -> Result<Vec<Stage>, AppError> {
    if s == "all" {
        return Ok(Stage::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse::<Stage>().map_err(validation)).collect()
}

fn run_filter(cli: &Cli, a: &FilterArgs) -> Result<(), AppError> {
    let cfg = load_config(&a.config, cli)?;
    let stages = parse_stages(&a.stage)?;
    let workers = worker_count(cli, Some(&cfg));
    let pairs: Vec<PreferencePair> = jsonl::read_path(&a.input)?;
    let mut ctx = FilterContext::default();
    for path in &cfg.filter.bench_prompts {
        for rec in read_mixed(path)? {
            if let Record::Pair(p) = rec {
                ctx.bench_prompts.push(p.task_prompt);
            }
        }
    }
    let n_in = pairs.len();
    let out = pool(workers)?
        .install(|| filter::run(pairs, &stages, &ctx, &cfg.filter.config))
        .map_err(|e| match e {
            filter::FilterError::Config(_) => validation(e),
            other => runtime(other),
        })?;
    let rejects = a.rejects.clone().unwrap_or_else(|| sibling(&a.out, ".rejects.jsonl"));
    write_file(&a.out, &jsonl::to_string(&out.kept))?;
    write_file(&rejects, &jsonl::to_string(&out.rejects))?;
    for id in &out.under_shingled {
        log::warn!("{id}: under-shingled, kept without dedup comparison");
    }
    let mut by_stage: BTreeMap<String, usize> = BTreeMap::new();
    for r in &out.rejects {
        *by_stage.entry(format!("{}/{}", r.stage, r.reason)).or_insert(0) += 1;
    }
    let mut inputs = vec![a.input.clone()];
    inputs.extend(cfg.filter.bench_prompts.iter().cloned());
    Run { command: "filter", cfg: Some(&cfg), workers, inputs, outputs: vec![a.out.clone(), rejects] }.finish(json!({
        "stages": stages.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        "input": n_in,
        "kept": out.kept.len(),
        "rejects": by_stage,
        "under_shingled": out.under_shingled,
    }))
}

fn run_assemble(cli: &Cli, a: &AssembleArgs) -> Result<(), AppError> {
    let cfg = load_config(&a.config, cli)?;
    let workers = worker_count(cli, Some(&cfg));
    let (manifest, manifest_path) = match (&a.manifest, &cfg.assemble.manifest) {
        (Some(s), _) if s == BUILTIN_MANIFEST => (BenchmarkManifest::code_reward_bench(), None),
        (Some(s), _) => {
            let p = PathBuf::from(s);
            (BenchmarkManifest::load(&p).map_err(validation)?, Some(p))
        }
        (None, Some(p)) => (BenchmarkManifest::load(p).map_err(validation)?, Some(p.clone())),
        (None, None) => return Err(validation("missing config key `assemble.manifest`")),
    };
    let mode = if a.strict { AuditMode::Strict } else { cfg.assemble.mode };
    let pairs: Vec<PreferencePair> = jsonl::read_path(&a.input)?;
    let (bench_pairs, audit) = bench::assemble(pairs, &manifest, mode).map_err(validation)?;
    let audit_path = a.audit.clone().unwrap_or_else(|| sibling(&a.out, ".audit.csv"));
    write_file(&a.out, &jsonl::to_string(&bench_pairs))?;
    write_file(&audit_path, &audit.to_csv())?;
    for row in audit.flagged() {
        log::warn!(
            "cell {}/{}/{}: expected {}, got {} ({:+})",
            row.cell.subset, row.cell.criterion, row.cell.language, row.expected, row.actual, row.delta
        );
    }
    let mut inputs = vec![a.input.clone()];
    inputs.extend(manifest_path);
    Run { command: "assemble", cfg: Some(&cfg), workers, inputs, outputs: vec![a.out.clone(), audit_path] }.finish(json!({
        "manifest": manifest.name,
        "expected_total": manifest.total,
        "actual_total": audit.actual_total(),
        "flagged_cells": audit.flagged().count(),
    }))
}

fn build_scorer(cfg: &PipelineConfig, flag: Option<&str>) -> Result<Box<dyn Scorer>, AppError> {
    let spec = match flag {
        Some(s) => Some(s.parse::<ScorerSpec>().map_err(validation)?),
        None => cfg.scorer.spec.clone(),
    };
    let spec = match spec {
        Some(s) => s,
        None => match std::env::var(ENV_URL) {
            Ok(url) => ScorerSpec::Http { url },
            Err(_) => return Err(validation("missing config key `scorer.kind`")),
        },
    };
    match spec {
        ScorerSpec::Toy { weights: None } => Ok(Box::new(ToyRewardModel::zeros())),
        ScorerSpec::Toy { weights: Some(p) } => Ok(Box::new(ToyRewardModel::load(&p).map_err(|e| validation(format!("{}: {e}", p.display())))?)),
        ScorerSpec::Http { url } => {
            let url = if flag.is_none() { std::env::var(ENV_URL).unwrap_or(url) } else { url };
            let policy = RetryPolicy {
                max_attempts: cfg.scorer.max_attempts,
                timeout: Duration::from_secs(cfg.scorer.timeout_secs),
                ..RetryPolicy::default()
            };
            Ok(Box::new(RemoteScorer::new(&url, std::env::var(ENV_TOKEN).ok(), policy).map_err(runtime)?))
        }
    }
}

/// Pairs tagged with this `task` value are scored as adversarial pairs.
pub const TASK_ADVERSARIAL: &str = "adversarial";

fn run_eval(cli: &Cli, a: &EvalArgs) -> Result<(), AppError> {
    let cfg = load_config(&a.config, cli)?;
    let workers = worker_count(cli, Some(&cfg));
    let mode: PromptMode = match &a.criteria_mode {
        Some(m) => m.parse().map_err(validation)?,
        None => cfg.eval.criteria_mode,
    };
    let scorer = build_scorer(&cfg, a.scorer.as_deref())?;
    let mut pairwise = Vec::new();
    let mut adversarial = Vec::new();
    let mut candidates: Vec<RankedCandidate> = Vec::new();
    for rec in read_mixed(&a.bench)? {
        match rec {
            Record::Pair(p) if p.extra_str("task") == Some(TASK_ADVERSARIAL) => adversarial.push(p),
            Record::Pair(p) => pairwise.push(p),
            Record::Candidate(c) => candidates.push(c),
            Record::Commit(c) => {
                return Err(validation(format!("{}: commit record {} in a benchmark file", a.bench.display(), c.commit_sha)))
            }
        }
    }
    let in_flight = cfg.scorer.max_in_flight.min(workers.max(1) * 4);
    let metric_err = |e: metrics::MetricsError| match e {
        metrics::MetricsError::Scorer(_) => runtime(e),
        other => validation(other),
    };
    let mut bundle = ReportBundle::default();
    if !pairwise.is_empty() {
        bundle.pairwise.push(metrics::pairwise_accuracy(&pairwise, scorer.as_ref(), mode, in_flight).map_err(metric_err)?);
    }
    if !adversarial.is_empty() {
        bundle.adversarial.push(metrics::adversarial_accuracy(&adversarial, scorer.as_ref(), mode, in_flight).map_err(metric_err)?);
    }
    if !candidates.is_empty() {
        metrics::rescore_candidates(&mut candidates, scorer.as_ref(), in_flight).map_err(metric_err)?;
        let problems = metrics::group_problems(candidates);
        bundle.listwise.push(
            metrics::listwise_report(scorer.model_id(), &problems, cfg.eval.k, cfg.eval.list_size, cfg.eval.count_impossible_as_miss)
                .map_err(metric_err)?,
        );
    }
    if bundle.is_empty() {
        return Err(validation(format!("{}: no benchmark records", a.bench.display())));
    }
    let (md, csv) = metrics::emit_report(&bundle);
    let csv_path = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    let json_path = a.json.clone().unwrap_or_else(|| a.out.with_extension("json"));
    write_file(&a.out, &md)?;
    write_file(&csv_path, &csv)?;
    write_file(&json_path, &(serde_json::to_string_pretty(&bundle).expect("reports serialize") + "\n"))?;
    let partial: Vec<String> = bundle
        .pairwise
        .iter()
        .chain(bundle.adversarial.iter().map(|a| &a.report))
        .filter(|r| r.partial)
        .flat_map(|r| r.failed_subsets.iter().cloned())
        .collect();
    let first_error = bundle
        .pairwise
        .iter()
        .chain(bundle.adversarial.iter().map(|a| &a.report))
        .flat_map(|r| r.errors.first())
        .next()
        .map(|e| e.error.clone());
    let mut inputs = vec![a.bench.clone()];
    if let Some(ScorerSpec::Toy { weights: Some(p) }) = a.scorer.as_deref().and_then(|s| s.parse().ok()).or(cfg.scorer.spec.clone()) {
        inputs.push(p);
    }
    Run { command: "eval", cfg: Some(&cfg), workers, inputs, outputs: vec![a.out.clone(), csv_path, json_path] }.finish(json!({
        "criteria_mode": mode.as_str(),
        "model_id": scorer.model_id(),
        "partial": !partial.is_empty(),
        "failed_subsets": partial,
    }))?;
    if !partial.is_empty() {
        return Err(runtime(format!(
            "partial report: scoring failed for subsets {} ({})",
            partial.join(", "),
            first_error.unwrap_or_default()
        )));
    }
    Ok(())
}

fn run_train(cli: &Cli, a: &TrainArgs) -> Result<(), AppError> {
    let cfg = load_config(&a.config, cli)?;
    let workers = worker_count(cli, Some(&cfg));
    let section = match &a.stage {
        None => cfg.train.clone(),
        Some(s) => cfg.with_stage(s.parse::<TrainStage>().map_err(validation)?).map_err(validation)?,
    };
    let mut section = section;
    if cli.seed.is_some() {
        section.train.seed = cfg.rng_seed;
        if let Some(m) = &mut section.train.mix {
            m.rng_seed = cfg.rng_seed;
        }
    }
    let data: Vec<PreferencePair> = jsonl::read_path(&a.data)?;
    let init = match &a.init {
        Some(p) => Some(ToyRewardModel::load(p).map_err(|e| validation(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let result = train::train_toy(&data, &section.loss, &section.train, init).map_err(|e| match e {
        train::TrainError::EmptyDataset | train::TrainError::Config(_) => validation(e),
        other => runtime(other),
    })?;
    let curve_path = a.curve.clone().unwrap_or_else(|| a.out.with_extension("curve.csv"));
    write_file(&a.out, &train::weights_json(&result.state.model, &section.loss, &section.train))?;
    write_file(&curve_path, &train::curve_csv(&result.curve))?;
    let mut inputs = vec![a.data.clone()];
    inputs.extend(a.init.clone());
    let last = result.curve.last().copied();
    Run { command: "train-toy", cfg: Some(&cfg), workers, inputs, outputs: vec![a.out.clone(), curve_path] }.finish(json!({
        "stage": section.stage,
        "pairs": data.len(),
        "steps": result.state.step,
        "initial_accuracy": result.initial_accuracy,
        "final_accuracy": last.map(|e| e.accuracy),
    }))
}

fn run_report(cli: &Cli, a: &ReportArgs) -> Result<(), AppError> {
    init_logging(cli.log_level.as_deref().unwrap_or("warn"));
    let mut bundle = ReportBundle::default();
    for p in &a.inputs {
        let text = std::fs::read_to_string(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
        let b: ReportBundle = serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", p.display())))?;
        bundle.extend(b);
    }
    let (md, csv) = metrics::emit_report(&bundle);
    let csv_path = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    write_file(&a.out, &md)?;
    write_file(&csv_path, &csv)?;
    Run { command: "report", cfg: None, workers: 1, inputs: a.inputs.clone(), outputs: vec![a.out.clone(), csv_path] }
        .finish(json!({"reports": a.inputs.len()}))
}
