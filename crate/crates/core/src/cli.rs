//! Command-line entry points.
//!
//! Every command takes its settings from flags, optionally preceded by a
//! `--config FILE` of `key = value` lines (keys are long flag names without
//! dashes). Flags given on the command line win over the file. Outputs are
//! written only on success; a failing command removes anything it started.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::corpus::{
    generate_synthetic, load_corpus, read_presented, split_corpus, write_corpus, write_presented,
    CorpusError, CorpusFormat, Story,
};
use crate::ensemble::{fuse, read_orderings, write_orderings, EnsembleError};
use crate::graph::GraphVariant;
use crate::metrics::{render_table, EvalReport, MetricError};
use crate::nn::{load_checkpoint, save_checkpoint, CheckpointError, DecodeMode, ModelConfig, TrainConfig};
use crate::order::Ordering;
use crate::pipeline::{
    ablate, evaluate, prepare_story, render_ablation, shuffle_all, train_on_split, EmbedderSpec,
    GraphSettings, ModelOrderer, OracleOrderer, Orderer, PipelineError, RandomOrderer,
};
use crate::text::{extract_entities, resolve_pronouns, ResolvedStory};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Exit status: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "story-order", version, about = "Order the shuffled sentences of short stories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus of ordinal-marker stories.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Write shuffled copies of a corpus, keeping each story's gold order.
    #[command(args_override_self = true)]
    Shuffle(ShuffleArgs),
    /// Resolve pronouns and report entity counts per story.
    #[command(args_override_self = true)]
    Prepare(PrepareArgs),
    /// Train a model and save a checkpoint.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Order presented stories with a checkpoint.
    #[command(args_override_self = true)]
    Order(OrderArgs),
    /// Score a checkpoint (or a reference method) on shuffled stories.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Fuse several orderings files by pairwise majority voting.
    #[command(args_override_self = true)]
    Ensemble(EnsembleArgs),
    /// Train and test every graph variant under the same settings.
    #[command(args_override_self = true)]
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Input corpus (JSONL `{"id","sentences"}` or TSV `id<TAB>s1<TAB>...`).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus format; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

impl CorpusArgs {
    fn format(&self) -> Result<CorpusFormat, CliError> {
        match &self.format {
            Some(f) => f.parse().map_err(|e: CorpusError| CliError::Usage(e.to_string())),
            None => Ok(CorpusFormat::from_path(&self.corpus)),
        }
    }

    fn load(&self) -> Result<Vec<Story>, CliError> {
        if !self.corpus.exists() {
            return Err(CliError::Io {
                path: self.corpus.clone(),
                source: io::Error::new(io::ErrorKind::NotFound, "no such file"),
            });
        }
        Ok(load_corpus(&self.corpus, self.format()?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 500)]
    pub stories: usize,
    #[arg(long, default_value_t = 5)]
    pub sentences: usize,
    #[arg(long, default_value_t = 200)]
    pub vocab: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "jsonl")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ShuffleArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSONL with `gold_order` fields.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub coref: Switch,
    /// Resolved corpus, written in the input format.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-story summary `id<TAB>substitutions<TAB>entities`; defaults to
    /// `<out>.entities.tsv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Model, graph and optimisation settings shared by `train` and `ablate`.
#[derive(Debug, Clone, Args)]
pub struct TrainSettings {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, default_value = "pg2")]
    pub variant: String,
    #[arg(long, default_value_t = 768)]
    pub hidden: usize,
    #[arg(long, default_value_t = 768)]
    pub embed_dim: usize,
    /// Message-passing rounds.
    #[arg(long, default_value_t = 3)]
    pub steps: usize,
    /// Rows of the hashed entity-embedding table.
    #[arg(long, default_value_t = 4096)]
    pub buckets: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `hash`, `window:W` or `file:PATH`.
    #[arg(long, default_value = "hash")]
    pub embedder: String,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub coref: Switch,
    /// Train/validation/test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub split: String,
    /// Decoding for the final test report.
    #[arg(long, default_value = "beam:8")]
    pub decode: String,
}

impl TrainSettings {
    fn train_config(&self) -> Result<TrainConfig, CliError> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(CliError::Usage(format!("--{name} must be positive")))
            } else {
                Ok(v)
            }
        };
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(CliError::Usage("--lr must be a positive number".into()));
        }
        Ok(TrainConfig {
            model: ModelConfig {
                hidden: positive("hidden", self.hidden)?,
                embed_dim: positive("embed-dim", self.embed_dim)?,
                steps: self.steps,
                entity_buckets: positive("buckets", self.buckets)?,
            },
            batch_size: positive("batch", self.batch)?,
            learning_rate: self.lr,
            epochs: positive("epochs", self.epochs)?,
            seed: self.seed,
            clip_norm: self.clip,
        })
    }

    fn ratios(&self) -> Result<(f64, f64, f64), CliError> {
        let parts: Vec<f64> = self
            .split
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("bad --split {:?}", self.split)))?;
        match parts[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(CliError::Usage("--split needs three fractions".into())),
        }
    }
}

fn parse_variant(s: &str) -> Result<GraphVariant, CliError> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = GraphVariant::ALL.iter().map(|v| v.name()).collect();
        CliError::Usage(format!("unknown variant {s:?} (expected one of {})", names.join(", ")))
    })
}

fn parse_decode(s: &str) -> Result<DecodeMode, CliError> {
    s.parse().map_err(CliError::Usage)
}

fn parse_embedder(s: &str) -> Result<EmbedderSpec, CliError> {
    s.parse().map_err(|e: PipelineError| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub settings: TrainSettings,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OrderArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Stories in presented order; gold orders, if any, are ignored.
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, default_value = "beam:8")]
    pub decode: String,
    /// Graph variant to build; must match the checkpoint unless `--force`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub force: bool,
    /// Overrides the checkpoint's embedder.
    #[arg(long)]
    pub embedder: Option<String>,
    /// Orderings file: `id<TAB>r0 r1 ...`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Model,
    Oracle,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Required for `--method model`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Model)]
    pub method: Method,
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Seeds the per-story shuffles.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "beam:8")]
    pub decode: String,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub embedder: Option<String>,
    /// Per-story JSONL report with a trailing summary line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    /// Orderings files to fuse, one per method.
    #[arg(long, num_args = 1.., required = true)]
    pub orderings: Vec<PathBuf>,
    /// The presented stories with gold orders (as written by `shuffle`);
    /// when given, every input and the fused result are scored.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Fall back to a greedy order for stories longer than the exact limit.
    #[arg(long)]
    pub heuristic: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// JSONL report of the fused orderings.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub settings: TrainSettings,
    /// Comma-separated variants, or `all`.
    #[arg(long, default_value = "all")]
    pub variants: String,
    /// Markdown table of results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Files a command writes; removed again unless the command succeeds.
struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Self {
            paths: Vec::new(),
            committed: false,
        }
    }

    fn create(&mut self, path: &Path) -> Result<BufWriter<File>, CliError> {
        let f = File::create(path).map_err(io_err(path))?;
        self.paths.push(path.to_path_buf());
        Ok(BufWriter::new(f))
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let mut w = self.create(path)?;
        w.write_all(bytes).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    /// Registers a file produced by someone else.
    fn track(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    if !(2..=8).contains(&args.sentences) {
        return Err(CliError::Usage("--sentences must lie in 2..=8".into()));
    }
    let format: CorpusFormat = args
        .format
        .parse()
        .map_err(|e: CorpusError| CliError::Usage(e.to_string()))?;
    log::info!("generate: stories={} sentences={} seed={}", args.stories, args.sentences, args.seed);
    let stories = generate_synthetic(args.stories, args.sentences, args.vocab, args.seed);
    let mut outputs = Outputs::new();
    let mut w = outputs.create(&args.out)?;
    write_corpus(&mut w, &stories, format)?;
    w.flush().map_err(io_err(&args.out))?;
    drop(w);
    outputs.commit();
    Ok(())
}

pub fn cmd_shuffle(args: &ShuffleArgs) -> Result<(), CliError> {
    let stories = args.input.load()?;
    log::info!("shuffle: {} stories seed={}", stories.len(), args.seed);
    let mut outputs = Outputs::new();
    let mut w = outputs.create(&args.out)?;
    write_presented(&mut w, &shuffle_all(&stories, args.seed))?;
    w.flush().map_err(io_err(&args.out))?;
    drop(w);
    outputs.commit();
    Ok(())
}

/// Returns the total number of pronoun substitutions.
pub fn cmd_prepare(args: &PrepareArgs) -> Result<usize, CliError> {
    let stories = args.input.load()?;
    let format = args.input.format()?;
    log::info!("prepare: {} stories coref={:?}", stories.len(), args.coref);
    let resolved: Vec<ResolvedStory> = if args.coref.on() {
        stories
            .iter()
            .map(|s| resolve_pronouns(s).map_err(|e| PipelineError::from(e).into()))
            .collect::<Result<_, CliError>>()?
    } else {
        stories.iter().cloned().map(ResolvedStory::unresolved).collect()
    };
    let mut summary = String::from("id\tsubstitutions\tentities\n");
    let mut total = 0;
    for r in &resolved {
        let entities = extract_entities(r).map_err(PipelineError::from)?;
        total += r.substitutions.len();
        summary.push_str(&format!("{}\t{}\t{}\n", r.story.id, r.substitutions.len(), entities.len()));
    }
    let summary_path = args.summary.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".entities.tsv");
        PathBuf::from(p)
    });
    let mut outputs = Outputs::new();
    let out_stories: Vec<Story> = resolved.into_iter().map(|r| r.story).collect();
    let mut w = outputs.create(&args.out)?;
    write_corpus(&mut w, &out_stories, format)?;
    w.flush().map_err(io_err(&args.out))?;
    drop(w);
    outputs.write(&summary_path, summary.as_bytes())?;
    outputs.commit();
    println!("{} stories, {total} pronoun substitutions", out_stories.len());
    Ok(total)
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let s = &args.settings;
    let cfg = s.train_config()?;
    let settings = GraphSettings {
        variant: parse_variant(&s.variant)?,
        coref: s.coref.on(),
    };
    let embedder = parse_embedder(&s.embedder)?;
    let mode = parse_decode(&s.decode)?;
    let stories = s.input.load()?;
    let split = split_corpus(&stories, s.ratios()?, s.seed)?;
    log::info!(
        "train: variant={} coref={} embedder={embedder} config={cfg:?} split={}/{}/{}",
        settings.variant,
        settings.coref,
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    let ckpt = train_on_split(&split, &cfg, settings, &embedder, |_| {})?;
    let mut outputs = Outputs::new();
    outputs.track(&args.out);
    save_checkpoint(&ckpt, &args.out)?;
    log::info!("saved checkpoint from epoch {} to {}", ckpt.best_epoch, args.out.display());
    let orderer = ModelOrderer::from_checkpoint(&ckpt, None, false, None, mode)?;
    let report = evaluate(&orderer, &split.test, cfg.seed)?;
    outputs.commit();
    print!("{}", report.to_table());
    Ok(())
}

fn model_orderer(
    checkpoint: &Path,
    variant: Option<&str>,
    force: bool,
    embedder: Option<&str>,
    decode: &str,
) -> Result<ModelOrderer, CliError> {
    let variant = variant.map(parse_variant).transpose()?;
    let embedder = embedder.map(parse_embedder).transpose()?;
    let mode = parse_decode(decode)?;
    let ckpt = load_checkpoint(checkpoint).map_err(|e| match e {
        CheckpointError::Io(source) => CliError::Io {
            path: checkpoint.to_path_buf(),
            source,
        },
        other => other.into(),
    })?;
    Ok(ModelOrderer::from_checkpoint(&ckpt, variant, force, embedder.as_ref(), mode)?)
}

pub fn cmd_order(args: &OrderArgs) -> Result<(), CliError> {
    let orderer = model_orderer(
        &args.checkpoint,
        args.variant.as_deref(),
        args.force,
        args.embedder.as_deref(),
        &args.decode,
    )?;
    let path = &args.input.corpus;
    let file = File::open(path).map_err(io_err(path))?;
    let records = read_presented(BufReader::new(file), args.input.format()?)?;
    log::info!("order: {} stories with {}", records.len(), orderer.label());
    let items = records
        .into_iter()
        .map(|(id, sentences)| {
            let n = sentences.len();
            let story = Story {
                id: id.clone(),
                sentences,
                gold_order: (0..n).collect(),
            };
            let prepared = prepare_story(&story, orderer.settings, orderer.embedder.as_ref())?;
            Ok((id, orderer.order_prepared(&prepared)?))
        })
        .collect::<Result<Vec<(String, Ordering)>, PipelineError>>()?;
    let mut outputs = Outputs::new();
    let mut w = outputs.create(&args.out)?;
    write_orderings(&mut w, &items).map_err(io_err(&args.out))?;
    w.flush().map_err(io_err(&args.out))?;
    drop(w);
    outputs.commit();
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let orderer: Box<dyn Orderer> = match args.method {
        Method::Model => {
            let ckpt = args
                .checkpoint
                .as_deref()
                .ok_or_else(|| CliError::Usage("--checkpoint is required for --method model".into()))?;
            Box::new(model_orderer(
                ckpt,
                args.variant.as_deref(),
                args.force,
                args.embedder.as_deref(),
                &args.decode,
            )?)
        }
        Method::Oracle => Box::new(OracleOrderer),
        Method::Random => Box::new(RandomOrderer { seed: args.seed }),
    };
    let stories = args.input.load()?;
    log::info!("eval: {} stories with {} seed={}", stories.len(), orderer.label(), args.seed);
    let report = evaluate(orderer.as_ref(), &stories, args.seed)?;
    let mut outputs = Outputs::new();
    if let Some(out) = &args.out {
        outputs.write(out, report.to_jsonl().as_bytes())?;
    }
    outputs.commit();
    print!("{}", report.to_table());
    Ok(report)
}

pub fn cmd_ensemble(args: &EnsembleArgs) -> Result<Option<EvalReport>, CliError> {
    let mut inputs = Vec::with_capacity(args.orderings.len());
    for path in &args.orderings {
        let file = File::open(path).map_err(io_err(path))?;
        let items = read_orderings(BufReader::new(file))?;
        inputs.push(items.into_iter().collect::<BTreeMap<_, _>>());
    }
    let first = args.orderings.first().expect("clap requires one file");
    let ids: Vec<String> = {
        let file = File::open(first).map_err(io_err(first))?;
        read_orderings(BufReader::new(file))?.into_iter().map(|(id, _)| id).collect()
    };
    log::info!("ensemble: {} methods over {} stories", inputs.len(), ids.len());
    let mut fused = Vec::with_capacity(ids.len());
    for id in &ids {
        let per_method = inputs
            .iter()
            .zip(&args.orderings)
            .map(|(m, path)| {
                m.get(id).cloned().ok_or_else(|| {
                    CliError::Usage(format!("story {id:?} is missing from {}", path.display()))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let o = fuse(&per_method, args.heuristic).map_err(|e| CliError::Usage(format!("story {id:?}: {e}")))?;
        fused.push((id.clone(), o));
    }

    let mut report = None;
    let mut table = Vec::new();
    if let Some(corpus) = &args.corpus {
        let gold: BTreeMap<String, Ordering> = load_corpus(corpus, CorpusFormat::from_path(corpus))?
            .into_iter()
            .map(|s| Ok((s.id, Ordering::from_ranks(s.gold_order).map_err(PipelineError::from)?)))
            .collect::<Result<_, CliError>>()?;
        let score = |label: String, items: &[(String, Ordering)]| -> Result<EvalReport, CliError> {
            let triples = items
                .iter()
                .map(|(id, o)| {
                    let g = gold
                        .get(id)
                        .ok_or_else(|| CliError::Usage(format!("story {id:?} is missing from the corpus")))?;
                    Ok((id.clone(), o.clone(), g.clone()))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(EvalReport::from_predictions(label, &triples)?)
        };
        for (m, path) in inputs.iter().zip(&args.orderings) {
            let items: Vec<(String, Ordering)> = ids.iter().map(|id| (id.clone(), m[id].clone())).collect();
            table.push(score(path.display().to_string(), &items)?);
        }
        let fused_report = score("fused".into(), &fused)?;
        table.push(fused_report.clone());
        report = Some(fused_report);
    }

    let mut outputs = Outputs::new();
    let mut w = outputs.create(&args.out)?;
    write_orderings(&mut w, &fused).map_err(io_err(&args.out))?;
    w.flush().map_err(io_err(&args.out))?;
    drop(w);
    if let (Some(path), Some(r)) = (&args.report, &report) {
        outputs.write(path, r.to_jsonl().as_bytes())?;
    }
    outputs.commit();
    if !table.is_empty() {
        print!("{}", render_table(&table));
    }
    Ok(report)
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<String, CliError> {
    let s = &args.settings;
    let cfg = s.train_config()?;
    let variants: Vec<GraphVariant> = if args.variants.trim() == "all" {
        GraphVariant::ALL.to_vec()
    } else {
        args.variants.split(',').map(|v| parse_variant(v.trim())).collect::<Result<_, _>>()?
    };
    let embedder = parse_embedder(&s.embedder)?;
    let mode = parse_decode(&s.decode)?;
    let stories = s.input.load()?;
    let split = split_corpus(&stories, s.ratios()?, s.seed)?;
    log::info!("ablate: {} variants config={cfg:?} coref={:?} embedder={embedder}", variants.len(), s.coref);
    let rows = ablate(&split, &variants, &cfg, s.coref.on(), &embedder, mode)?;
    let table = render_ablation(&rows);
    let mut outputs = Outputs::new();
    if let Some(out) = &args.out {
        outputs.write(out, table.as_bytes())?;
    }
    outputs.commit();
    print!("{table}");
    Ok(table)
}

/// Parses `key = value` lines (`#` starts a comment) into flag arguments.
/// A value of `true` becomes a bare switch; `false` drops it.
pub fn config_args(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ if key == "orderings" => {
                out.push(format!("--{key}").into());
                out.extend(value.split_whitespace().map(OsString::from));
            }
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    Ok(out)
}

/// Splices `--config FILE` contents in front of the command-line flags.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut config = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let extra = config_args(&text)?;
    // program name and subcommand first, then the file, then explicit flags
    let split = rest.len().min(2);
    let mut out: Vec<OsString> = rest[..split].to_vec();
    out.extend(extra);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}

pub fn run(args: Vec<OsString>) -> Result<(), CliError> {
    let args = expand_config(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Shuffle(a) => cmd_shuffle(a),
        Command::Prepare(a) => cmd_prepare(a).map(|_| ()),
        Command::Train(a) => cmd_train(a),
        Command::Order(a) => cmd_order(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Ensemble(a) => cmd_ensemble(a).map(|_| ()),
        Command::Ablate(a) => cmd_ablate(a).map(|_| ()),
    }
}
