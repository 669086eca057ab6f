//! Command-line front end. Every subcommand is a thin wrapper over the
//! library; errors leave as one JSON object `{code, message, context}` on
//! stderr with exit code 2 for usage/config problems and 1 otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ConfigError, ToolkitConfig};
use crate::consistency::{parse_answer, verify_alignment, VerificationReason};
use crate::dataset::{read_jsonl, read_records, write_jsonl, write_records, Corpus, DatasetError};
use crate::genclient::{generate_batch_with, BackendConfig, GenError, GenerationRequest};
use crate::humaneval::{
    append_rating, load_session, normalized_sample_scores, scored_samples, select_items, summarize, AnnotationItem,
    HumanEvalError, RatingSession, RubricConfig, DEFAULT_SESSION_SIZE,
};
use crate::lora::{param_budget, train_demo_layer, DemoTask, LoraBudget, LoraError};
use crate::metrics::{aggregate_report, quartile_accuracy, HashEmbedding, MetricsError, ReportOptions, ScoredSample};
use crate::pipeline::{run_pipeline, Generator, PipelineError, PipelineParams};
use crate::prompting::{Demonstration, PromptError, PromptOptions, Prompter, TemplateSet};
use crate::types::{AVPair, ClassificationLabel, DatasetSetting, InstructionSample, PredictionRecord, SourceDataset};

#[derive(Debug, Parser)]
#[command(name = "avkit", version, about = "Authorship verification dataset and evaluation toolkit")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample pairs, generate and verify explanations, write train/test JSONL.
    BuildDataset(BuildDatasetArgs),
    /// Score predictions against a gold split.
    Evaluate(EvaluateArgs),
    /// Check generated explanations for label consistency.
    Verify(VerifyArgs),
    /// Train a small adapter on a synthetic task with the base frozen.
    LoraDemo(LoraDemoArgs),
    /// Trainable-parameter count of an adapter configuration.
    LoraBudget(LoraBudgetArgs),
    /// Rate explanations interactively on the terminal.
    Annotate(AnnotateArgs),
    /// Summarize a ratings file per system.
    SummarizeRatings(SummarizeArgs),
    /// Accuracy on the best- and worst-rated fractions of samples.
    Correlate(CorrelateArgs),
    /// Render k-shot classification prompts for a split.
    FewshotPrompts(FewshotArgs),
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// imdb, twitter, yelp, synthetic, or any other name.
    #[arg(long, default_value = "synthetic")]
    pub source: String,
    #[arg(long)]
    pub setting: Option<DatasetSetting>,
    #[arg(long)]
    pub pool: Option<usize>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output prefix; writes PREFIX.{train,test,dropped,log}.jsonl.
    #[arg(long)]
    pub out: Option<String>,
    /// Allow the same unordered text pair to be drawn more than once.
    #[arg(long)]
    pub allow_repeats: bool,
    /// Use the offline mock generator with this corruption rate.
    #[arg(long)]
    pub mock_corruption: Option<f64>,
    /// JSONL of demonstrations `{pair, label, explanation}`.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// JSONL `{id, explanation}`; defaults to the explanations in the gold file.
    #[arg(long)]
    pub expl_labels: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "system")]
    pub system: String,
    /// Score whole outputs instead of the text after the answer sentence.
    #[arg(long)]
    pub full_text: bool,
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_field: String,
    #[arg(long, default_value = "generated_text")]
    pub text_field: String,
    #[arg(long, default_value = "id")]
    pub id_field: String,
    /// Writes `{id, passed, reason}` per record.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoraDemoArgs {
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = crate::lora::DEFAULT_INIT_SIGMA)]
    pub sigma: f64,
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    #[arg(long)]
    pub adapter_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoraBudgetArgs {
    #[arg(long, default_value_t = 4096)]
    pub d: u64,
    #[arg(long, default_value_t = 8)]
    pub r: u64,
    #[arg(long, default_value_t = 32)]
    pub layers: u64,
    #[arg(long, default_value_t = 2)]
    pub matrices_per_layer: u64,
    #[arg(long, default_value_t = 7_000_000_000)]
    pub base_params: u64,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Prediction JSONL whose outputs are rated.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub evaluator: String,
    /// Append-only ratings file; existing ratings are loaded and skipped.
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SESSION_SIZE)]
    pub limit: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub coverage_max: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    /// Per-system checklist size, e.g. `baseline=7`. Others use the config rubric.
    #[arg(long = "system-coverage", value_parser = parse_system_coverage)]
    pub system_coverage: Vec<(String, u32)>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// JSONL `{id, human_mean}`.
    #[arg(long, conflicts_with = "ratings", required_unless_present = "ratings")]
    pub scores: Option<PathBuf>,
    /// Raw ratings JSONL, normalized before ranking.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long)]
    pub coverage_max: Option<u32>,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub fraction: f64,
}

#[derive(Debug, Args)]
pub struct FewshotArgs {
    /// Split whose samples become queries.
    #[arg(long)]
    pub gold: PathBuf,
    /// Split the demonstrations are drawn from.
    #[arg(long)]
    pub demos_from: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Writes `{id, label, prompt}` per query.
    #[arg(long)]
    pub out: PathBuf,
    /// Also run the prompts through the configured backend and write predictions here.
    #[arg(long)]
    pub predict: Option<PathBuf>,
}

fn parse_system_coverage(s: &str) -> Result<(String, u32), String> {
    let (name, max) = s.split_once('=').ok_or("expected NAME=MAX")?;
    let max = max.parse().map_err(|e| format!("bad coverage max: {e}"))?;
    Ok((name.to_string(), max))
}

/// Error surfaced to the user, with its exit code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub context: Value,
    #[serde(skip)]
    pub exit_code: i32,
}

impl CliError {
    fn usage(code: &str, message: impl Into<String>, context: Value) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            context,
            exit_code: 2,
        }
    }

    fn runtime(code: &str, message: impl Into<String>, context: Value) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            context,
            exit_code: 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::usage("ConfigError", e.to_string(), json!({}))
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let code = match &e {
            DatasetError::MalformedLine { .. } => "MalformedLine",
            DatasetError::InsufficientCorpus { .. } => "InsufficientCorpus",
            DatasetError::InsufficientVerified { .. } => "InsufficientVerified",
            DatasetError::Io { .. } => "IoError",
            DatasetError::OddPairCount(_) => return CliError::usage("UsageError", e.to_string(), json!({})),
            _ => "DatasetError",
        };
        CliError::runtime(code, e.to_string(), json!({}))
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::InvalidConfig(_) | GenError::AuthMissing(_) => {
                CliError::usage("ConfigError", e.to_string(), json!({}))
            }
            _ => CliError::runtime("GenerationError", e.to_string(), json!({})),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::runtime("PromptError", e.to_string(), json!({}))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Dataset(e) => e.into(),
            PipelineError::Prompt(e) => e.into(),
            PipelineError::Generation(e) => e.into(),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let code = match e {
            MetricsError::NoPredictions => "EmptyPredictions",
            MetricsError::BadFraction(_) => return CliError::usage("UsageError", e.to_string(), json!({})),
            _ => "MetricsError",
        };
        CliError::runtime(code, e.to_string(), json!({}))
    }
}

impl From<LoraError> for CliError {
    fn from(e: LoraError) -> Self {
        match e {
            LoraError::InvalidRank { .. } | LoraError::InvalidParameter(_) => {
                CliError::usage("UsageError", e.to_string(), json!({}))
            }
            _ => CliError::runtime("LoraError", e.to_string(), json!({})),
        }
    }
}

impl From<HumanEvalError> for CliError {
    fn from(e: HumanEvalError) -> Self {
        match e {
            HumanEvalError::Storage(e) => e.into(),
            HumanEvalError::InvalidRubric(_) => CliError::usage("ConfigError", e.to_string(), json!({})),
            _ => CliError::runtime("HumanEvalError", e.to_string(), json!({})),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::runtime("IoError", e.to_string(), json!({ "path": path.display().to_string() }))
}

fn require_input(path: &Path, code: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(
            code,
            format!("{} does not exist or is not a file", path.display()),
            json!({ "path": path.display().to_string() }),
        ))
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::runtime("IoError", e.to_string(), json!({ "stream": "stdout" })))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let err = CliError::usage("UsageError", e.render().to_string().trim_end(), json!({}));
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code;
        }
    };
    match run(&cli, stdin, stdout) {
        Ok(()) => 0,
        Err(err) => {
            let _ = writeln!(stderr, "{}", err.to_json());
            err.exit_code
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<ToolkitConfig, CliError> {
    match path {
        Some(p) => {
            require_input(p, "ConfigNotFound")?;
            Ok(ToolkitConfig::load(p)?)
        }
        None => Ok(ToolkitConfig::default()),
    }
}

pub fn run(cli: &Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::BuildDataset(a) => build_dataset(a, &config, stdout),
        Command::Evaluate(a) => evaluate(a, stdout),
        Command::Verify(a) => verify(a, &config, stdout),
        Command::LoraDemo(a) => lora_demo(a, &config, stdout),
        Command::LoraBudget(a) => lora_budget(a, stdout),
        Command::Annotate(a) => annotate(a, &config, stdin, stdout),
        Command::SummarizeRatings(a) => summarize_ratings(a, &config, stdout),
        Command::Correlate(a) => correlate(a, &config, stdout),
        Command::FewshotPrompts(a) => fewshot_prompts(a, &config, stdout),
    }
}

fn source_dataset(name: &str) -> SourceDataset {
    match name {
        "imdb" => SourceDataset::Imdb,
        "twitter" => SourceDataset::Twitter,
        "yelp" => SourceDataset::Yelp,
        "synthetic" => SourceDataset::Synthetic,
        other => SourceDataset::Other(other.to_string()),
    }
}

fn prompter(config: &ToolkitConfig) -> Result<Prompter, CliError> {
    let templates = match &config.dataset.templates_dir {
        Some(dir) => TemplateSet::load_dir(dir)?,
        None => TemplateSet::builtin(),
    };
    Ok(Prompter::new(
        templates,
        PromptOptions {
            max_text_chars: config.dataset.max_text_chars,
        },
    ))
}

fn build_dataset(a: &BuildDatasetArgs, config: &ToolkitConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus_path = a
        .corpus
        .clone()
        .or_else(|| config.dataset.corpus.clone())
        .ok_or_else(|| CliError::usage("UsageError", "no corpus given (--corpus or dataset.corpus)", json!({})))?;
    require_input(&corpus_path, "CorpusNotFound")?;
    let prefix = a
        .out
        .clone()
        .or_else(|| config.dataset.out_prefix.clone())
        .ok_or_else(|| CliError::usage("UsageError", "no output prefix given (--out or dataset.out_prefix)", json!({})))?;
    let seed = a.seed.unwrap_or(config.seed);
    let setting = a.setting.unwrap_or(config.dataset.setting);
    let params = PipelineParams {
        setting,
        pool_n: a.pool.unwrap_or(config.dataset.pool),
        train_n: a.train.unwrap_or(config.dataset.train),
        test_n: a.test.unwrap_or(config.dataset.test),
        seed,
        dedup: config.dataset.dedup && !a.allow_repeats,
        temperature: config.decoding.temperature,
        max_new_tokens: config.decoding.max_new_tokens,
        max_in_flight: a.max_in_flight.unwrap_or(config.backend.max_in_flight),
    };
    let corpus = Corpus::load(&corpus_path, source_dataset(&a.source))?;

    let backend_config = match a.mock_corruption {
        Some(rate) => BackendConfig::mock(seed, rate),
        None => config.backend.clone(),
    };
    let demos_path = a.demos.clone().or_else(|| config.dataset.demonstrations.clone());
    let demos: Vec<Demonstration> = match &demos_path {
        Some(p) => {
            require_input(p, "InputNotFound")?;
            read_records(p)?
        }
        None => Vec::new(),
    };
    let prompter = prompter(config)?;

    let output = if setting == DatasetSetting::ClassificationOnly {
        run_pipeline(&corpus, &params, None)?
    } else {
        let backend = backend_config.build()?;
        let generator = Generator {
            backend: backend.as_ref(),
            retry: backend_config.retry_policy(),
            prompter: &prompter,
            demonstrations: &demos,
            policy: &config.policy,
        };
        run_pipeline(&corpus, &params, Some(&generator))?
    };

    let (train_path, test_path) = write_jsonl(&output.split, &prefix)?;
    let dropped_path = PathBuf::from(format!("{prefix}.dropped.jsonl"));
    write_records(&dropped_path, &output.dropped)?;
    let log_path = PathBuf::from(format!("{prefix}.log.jsonl"));
    write_records(&log_path, &output.log)?;

    let summary = json!({
        "stats": output.split.stats,
        "drop_rate": output.drop_rate,
        "dropped": output.dropped.len(),
        "generation_failures": output.failed.len(),
        "train_path": train_path.display().to_string(),
        "test_path": test_path.display().to_string(),
    });
    write_out(out, &format!("{}\n", serde_json::to_string_pretty(&summary).expect("summary serializes")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationLabel {
    pub id: String,
    pub explanation: String,
}

/// Ids in `gold` with no prediction, and prediction ids absent from `gold`.
pub fn id_misalignment(predictions: &[PredictionRecord], gold: &[InstructionSample]) -> (Vec<String>, Vec<String>) {
    let pred_ids: BTreeSet<&str> = predictions.iter().map(|p| p.id.as_str()).collect();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|g| g.id.as_str()).collect();
    (
        gold_ids.difference(&pred_ids).map(|s| s.to_string()).collect(),
        pred_ids.difference(&gold_ids).map(|s| s.to_string()).collect(),
    )
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    require_input(path, "InputNotFound")?;
    Ok(read_records(path)?)
}

fn read_gold(path: &Path) -> Result<Vec<InstructionSample>, CliError> {
    require_input(path, "InputNotFound")?;
    Ok(read_jsonl(path)?)
}

fn aligned(predictions: &[PredictionRecord], gold: &[InstructionSample]) -> Result<(), CliError> {
    if predictions.is_empty() {
        return Err(MetricsError::NoPredictions.into());
    }
    let (missing, unknown) = id_misalignment(predictions, gold);
    if missing.is_empty() && unknown.is_empty() {
        return Ok(());
    }
    Err(CliError::runtime(
        "IdMismatch",
        format!(
            "{} gold ids lack a prediction, {} prediction ids are not in gold",
            missing.len(),
            unknown.len()
        ),
        json!({ "missing_predictions": missing, "unknown_predictions": unknown }),
    ))
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let gold = read_gold(&a.gold)?;
    let predictions = read_predictions(&a.pred)?;
    aligned(&predictions, &gold)?;
    let labels: HashMap<String, String> = match &a.expl_labels {
        Some(p) => {
            require_input(p, "InputNotFound")?;
            read_records::<ExplanationLabel>(p)?
                .into_iter()
                .map(|l| (l.id, l.explanation))
                .collect()
        }
        None => gold
            .iter()
            .filter_map(|g| g.explanation.clone().map(|e| (g.id.clone(), e)))
            .collect(),
    };
    if a.embed_dim == 0 {
        return Err(CliError::usage("UsageError", "--embed-dim must be positive", json!({})));
    }
    let provider = HashEmbedding::new(a.embed_dim, 0);
    let report = aggregate_report(
        &a.system,
        &predictions,
        &gold,
        &labels,
        &provider,
        ReportOptions { full_text: a.full_text },
    )?;
    if let Some(path) = &a.report {
        let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        std::fs::write(path, body).map_err(|e| io_error(path, e))?;
    }
    write_out(
        out,
        &format!(
            "accuracy: {:.3}\nexplained samples: {}\n{}",
            report.accuracy,
            report.n_explained,
            report.to_table()
        ),
    )
}

fn verify(a: &VerifyArgs, config: &ToolkitConfig, out: &mut dyn Write) -> Result<(), CliError> {
    require_input(&a.input, "InputNotFound")?;
    let records: Vec<Value> = read_records(&a.input)?;
    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
    let mut rows = Vec::with_capacity(records.len());
    let mut passed = 0usize;
    for (i, rec) in records.iter().enumerate() {
        let field = |name: &str| {
            rec.get(name).and_then(Value::as_str).ok_or_else(|| {
                CliError::runtime(
                    "MalformedLine",
                    format!("record {} has no string field {name:?}", i + 1),
                    json!({ "path": a.input.display().to_string(), "line_no": i + 1 }),
                )
            })
        };
        let raw_label = field(&a.label_field)?;
        let label = ClassificationLabel::from_yes_no(raw_label).map_err(|e| {
            CliError::runtime(
                "MalformedLine",
                format!("record {}: {e}", i + 1),
                json!({ "path": a.input.display().to_string(), "line_no": i + 1 }),
            )
        })?;
        let id = rec
            .get(&a.id_field)
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| (i + 1).to_string());
        let verdict = verify_alignment(field(&a.text_field)?, label, &config.policy);
        if verdict.passed {
            passed += 1;
        }
        *reasons.entry(reason_name(verdict.reason)).or_default() += 1;
        rows.push(json!({ "id": id, "passed": verdict.passed, "reason": verdict.reason }));
    }
    if let Some(path) = &a.out {
        write_records(path, &rows)?;
    }
    let total = records.len();
    let summary = json!({
        "total": total,
        "passed": passed,
        "failed": total - passed,
        "drop_rate": if total == 0 { 0.0 } else { (total - passed) as f64 / total as f64 },
        "reasons": reasons,
    });
    write_out(out, &format!("{}\n", serde_json::to_string_pretty(&summary).expect("summary serializes")))
}

fn reason_name(r: VerificationReason) -> String {
    serde_json::to_value(r)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{r:?}"))
}

fn lora_demo(a: &LoraDemoArgs, config: &ToolkitConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let task = DemoTask {
        d: a.d,
        rank: a.r,
        n_samples: a.samples,
        init_sigma: a.sigma,
        seed: a.seed.unwrap_or(config.seed),
        ..DemoTask::default()
    };
    let (trace, layer) = train_demo_layer(&task, a.steps, a.lr)?;
    if let Some(path) = &a.trace_csv {
        std::fs::write(path, trace.to_csv()).map_err(|e| io_error(path, e))?;
    }
    if let Some(path) = &a.adapter_out {
        layer.adapter.save(path).map_err(|e| io_error(path, e))?;
    }
    write_out(
        out,
        &format!(
            "d={} r={} steps={} lr={}\ninitial loss: {:.6}\nfinal loss: {:.6}\ninitial accuracy: {:.3}\nfinal accuracy: {:.3}\nW0 unchanged: {}\n",
            a.d,
            a.r,
            a.steps,
            a.lr,
            trace.losses.first().copied().unwrap_or(f64::NAN),
            trace.losses.last().copied().unwrap_or(f64::NAN),
            trace.initial_accuracy,
            trace.final_accuracy,
            trace.w0_unchanged()
        ),
    )
}

fn lora_budget(a: &LoraBudgetArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (trainable, ratio) = param_budget(&LoraBudget {
        d: a.d,
        r: a.r,
        layers: a.layers,
        matrices_per_layer: a.matrices_per_layer,
        base_params: a.base_params,
    })?;
    write_out(
        out,
        &format!("trainable parameters: {trainable}\nshare of base model: {:.4}%\n", ratio * 100.0),
    )
}

fn session_for(config: &ToolkitConfig, coverage_max: Option<u32>) -> Result<RatingSession, CliError> {
    let rubric = match coverage_max {
        Some(m) => RubricConfig { coverage_max: m, ..config.rubric },
        None => config.rubric,
    };
    Ok(RatingSession::new(rubric)?)
}

fn annotate(a: &AnnotateArgs, config: &ToolkitConfig, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let predictions = read_predictions(&a.pred)?;
    let mut session = session_for(config, a.coverage_max)?;
    if a.ratings.exists() {
        load_session(&a.ratings, &mut session)?;
    }
    let items: Vec<AnnotationItem> = predictions
        .into_iter()
        .map(|p| AnnotationItem {
            sample_id: p.id,
            system_name: a.system.clone(),
            text: p.output_text,
        })
        .collect();
    let chosen = select_items(&items, a.limit, a.seed.unwrap_or(config.seed));
    let clock = || {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    };
    let ratings_path = a.ratings.clone();
    let n = crate::humaneval::annotate(&mut session, &chosen, &a.evaluator, input, out, clock, |r| {
        append_rating(&ratings_path, r)
    })?;
    write_out(out, &format!("\nrecorded {n} new ratings in {}\n", a.ratings.display()))
}

fn summarize_ratings(a: &SummarizeArgs, config: &ToolkitConfig, out: &mut dyn Write) -> Result<(), CliError> {
    require_input(&a.ratings, "InputNotFound")?;
    let mut session = session_for(config, None)?;
    for (system, max) in &a.system_coverage {
        session.set_rubric(system.clone(), RubricConfig::with_coverage(*max))?;
    }
    load_session(&a.ratings, &mut session)?;
    let summary = summarize(&session)?;
    if let Some(path) = &a.json {
        std::fs::write(path, summary.to_json() + "\n").map_err(|e| io_error(path, e))?;
    }
    write_out(
        out,
        &format!(
            "{}samples: {}  evaluators: {}\n",
            summary.to_table(),
            summary.n_samples,
            summary.n_evaluators
        ),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMean {
    pub id: String,
    pub human_mean: f64,
}

fn correlate(a: &CorrelateArgs, config: &ToolkitConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let gold = read_gold(&a.gold)?;
    let predictions = read_predictions(&a.pred)?;
    let scores: Vec<(String, f64)> = match (&a.scores, &a.ratings) {
        (Some(p), _) => {
            require_input(p, "InputNotFound")?;
            read_records::<SampleMean>(p)?
                .into_iter()
                .map(|s| (s.id, s.human_mean))
                .collect()
        }
        (None, Some(p)) => {
            require_input(p, "InputNotFound")?;
            let mut session = session_for(config, a.coverage_max)?;
            load_session(p, &mut session)?;
            let max = a.coverage_max.unwrap_or(config.rubric.coverage_max);
            normalized_sample_scores(&session, max)
        }
        (None, None) => return Err(CliError::usage("UsageError", "--scores or --ratings is required", json!({}))),
    };
    let labels: HashMap<&str, ClassificationLabel> = gold.iter().map(|g| (g.id.as_str(), g.label)).collect();
    let mut correct = BTreeMap::new();
    for p in &predictions {
        let gold_label = labels
            .get(p.id.as_str())
            .ok_or_else(|| CliError::from(MetricsError::UnknownId(p.id.clone())))?;
        correct.insert(p.id.clone(), parse_answer(&p.output_text) == Some(*gold_label));
    }
    let unscored: Vec<&String> = scores
        .iter()
        .map(|(id, _)| id)
        .filter(|id| !correct.contains_key(*id))
        .collect();
    if !unscored.is_empty() {
        return Err(CliError::runtime(
            "IdMismatch",
            format!("{} scored samples have no prediction", unscored.len()),
            json!({ "missing_predictions": unscored }),
        ));
    }
    let samples: Vec<ScoredSample> = scored_samples(&scores, &correct);
    let (top, bottom) = quartile_accuracy(&samples, a.fraction)?;
    let summary = json!({
        "n_samples": samples.len(),
        "fraction": a.fraction,
        "top_accuracy": top,
        "bottom_accuracy": bottom,
    });
    write_out(
        out,
        &format!(
            "top {:.0}% accuracy: {top:.3}\nbottom {:.0}% accuracy: {bottom:.3}\n{}\n",
            a.fraction * 100.0,
            a.fraction * 100.0,
            serde_json::to_string(&summary).expect("summary serializes")
        ),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewshotPrompt {
    pub id: String,
    pub label: ClassificationLabel,
    pub prompt: String,
}

fn as_pair(s: &InstructionSample) -> Result<AVPair, CliError> {
    AVPair::new(s.id.clone(), s.text1.clone(), s.text2.clone(), s.label)
        .map_err(|e| CliError::runtime("DatasetError", e.to_string(), json!({ "id": s.id })))
}

fn fewshot_prompts(a: &FewshotArgs, config: &ToolkitConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let queries = read_gold(&a.gold)?;
    let mut pool: Vec<(AVPair, ClassificationLabel)> = read_gold(&a.demos_from)?
        .iter()
        .map(|s| as_pair(s).map(|p| (p, s.label)))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(config.seed));
    pool.shuffle(&mut rng);
    let prompter = prompter(config)?;
    let prompts: Vec<FewshotPrompt> = queries
        .iter()
        .map(|q| {
            Ok(FewshotPrompt {
                id: q.id.clone(),
                label: q.label,
                prompt: prompter.fewshot_eval_prompt(&as_pair(q)?, &pool, a.k)?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    write_records(&a.out, &prompts)?;
    let mut message = format!("wrote {} {}-shot prompts to {}\n", prompts.len(), a.k, a.out.display());
    if let Some(pred_path) = &a.predict {
        let backend = config.backend.build()?;
        let requests: Vec<GenerationRequest> = prompts
            .iter()
            .map(|p| {
                let mut r = GenerationRequest::new(p.prompt.clone()).with_meta("id", p.id.clone());
                r.temperature = config.decoding.temperature;
                r.max_new_tokens = config.decoding.max_new_tokens;
                r
            })
            .collect();
        let results = generate_batch_with(
            backend.as_ref(),
            &requests,
            config.backend.retry_policy(),
            config.backend.max_in_flight,
        );
        let mut records = Vec::with_capacity(results.len());
        for (p, r) in prompts.iter().zip(results) {
            records.push(PredictionRecord {
                id: p.id.clone(),
                output_text: r?.text,
            });
        }
        write_records(pred_path, &records)?;
        message.push_str(&format!("wrote {} predictions to {}\n", records.len(), pred_path.display()));
    }
    write_out(out, &message)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(
            std::iter::once("avkit").chain(args.iter().copied()),
            &mut "".as_bytes(),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn missing_corpus_is_usage_error() {
        let (code, _, err) = run_args(&["build-dataset", "--corpus", "/nonexistent/c.csv", "--out", "/tmp/x"]);
        assert_eq!(code, 2);
        let v: Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["code"], "CorpusNotFound");
        assert!(v["context"]["path"].is_string());
    }

    #[test]
    fn bad_flag_is_usage_error() {
        let (code, _, err) = run_args(&["lora-demo", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("\"code\":\"UsageError\""));
    }

    #[test]
    fn budget_output() {
        let (code, out, _) = run_args(&["lora-budget"]);
        assert_eq!(code, 0);
        assert!(out.contains("4194304"));
        assert!(out.contains("0.0599%"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("build-dataset"));
        assert!(out.contains("fewshot-prompts"));
    }

    #[test]
    fn system_coverage_parser() {
        assert_eq!(parse_system_coverage("base=7").unwrap(), ("base".to_string(), 7));
        assert!(parse_system_coverage("base").is_err());
    }
}
