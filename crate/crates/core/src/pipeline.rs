//! End-to-end plumbing: stories to graphs and embeddings, training on a
//! split, and evaluation of any [`Orderer`] on shuffled stories.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{shuffle_story, story_seed, CorpusError, CorpusSplit, Story};
use crate::embed::{load_embedding_table, EmbedError, Embedder, HashEmbedder, WindowedHashEmbedder};
use crate::graph::{build_variant, canonical_ranks, GraphError, GraphVariant, SEGraph};
use crate::metrics::{EvalReport, MetricError};
use crate::nn::{
    self, Checkpoint, CheckpointError, DecodeMode, EpochStats, Model, NnError, RunInfo, TrainConfig,
    TrainExample,
};
use crate::order::{OrderError, Ordering};
use crate::text::{resolve_in_gold_order, ResolvedStory, TextError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("story {id:?}: {source}")]
    Story {
        id: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("{0}")]
    Config(String),
}

impl PipelineError {
    fn in_story(self, id: &str) -> Self {
        match self {
            e @ PipelineError::Story { .. } => e,
            e => PipelineError::Story {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }
}

/// Where sentence vectors come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderSpec {
    /// Hashed bag of words of the whole sentence.
    Hash,
    /// Mean of hashed word windows of the given width.
    Window(usize),
    /// Precomputed vectors keyed by story id and gold sentence index.
    File(PathBuf),
}

impl FromStr for EmbedderSpec {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "hash" {
            return Ok(EmbedderSpec::Hash);
        }
        if let Some(w) = s.strip_prefix("window:") {
            return match w.parse::<usize>() {
                Ok(w) if w >= 1 => Ok(EmbedderSpec::Window(w)),
                _ => Err(PipelineError::Config(format!("bad window width in {s:?}"))),
            };
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(PipelineError::Config("file: embedder needs a path".into()));
            }
            return Ok(EmbedderSpec::File(PathBuf::from(path)));
        }
        Err(PipelineError::Config(format!(
            "unknown embedder {s:?} (expected hash, window:W or file:PATH)"
        )))
    }
}

impl fmt::Display for EmbedderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbedderSpec::Hash => f.write_str("hash"),
            EmbedderSpec::Window(w) => write!(f, "window:{w}"),
            EmbedderSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl EmbedderSpec {
    /// Hash embedders are seeded with `seed`; file tables must have `dim` columns.
    pub fn build(&self, dim: usize, seed: u64) -> Result<Box<dyn Embedder>, PipelineError> {
        Ok(match self {
            EmbedderSpec::Hash => Box::new(HashEmbedder { dim, seed }),
            EmbedderSpec::Window(window) => Box::new(WindowedHashEmbedder {
                dim,
                seed,
                window: *window,
            }),
            EmbedderSpec::File(path) => {
                let table = load_embedding_table(path)?;
                if table.dim() != dim {
                    return Err(EmbedError::DimMismatch {
                        left: table.dim(),
                        right: dim,
                    }.into());
                }
                Box::new(table)
            }
        })
    }
}

/// How stories are turned into model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphSettings {
    pub variant: GraphVariant,
    pub coref: bool,
}

impl From<&RunInfo> for GraphSettings {
    fn from(run: &RunInfo) -> Self {
        Self {
            variant: run.variant,
            coref: run.coref,
        }
    }
}

/// A story ready for the encoder.
#[derive(Debug, Clone)]
pub struct PreparedStory {
    pub id: String,
    pub resolved: ResolvedStory,
    pub graph: SEGraph,
    pub embeddings: Vec<Vec<f64>>,
    pub tie_order: Vec<usize>,
}

/// Resolves pronouns (when enabled, or always for the coref SE-graph) as
/// corpus preprocessing, i.e. in the story's gold order, embeds the resolved
/// sentences and builds the variant's graph. Pruned
/// graphs on stories shorter than k+1 sentences use k = n-1. A story of one
/// sentence gets an edgeless graph.
pub fn prepare_story(
    story: &Story,
    settings: GraphSettings,
    embedder: &dyn Embedder,
) -> Result<PreparedStory, PipelineError> {
    prepare_inner(story, settings, embedder).map_err(|e| e.in_story(&story.id))
}

fn prepare_inner(
    story: &Story,
    settings: GraphSettings,
    embedder: &dyn Embedder,
) -> Result<PreparedStory, PipelineError> {
    let n = story.sentences.len();
    let resolve = settings.coref || settings.variant == GraphVariant::SEGraphCoref;
    let resolved = if resolve && n >= 2 {
        resolve_in_gold_order(story)?
    } else {
        ResolvedStory::unresolved(story.clone())
    };
    let embedded = resolved
        .story
        .sentences
        .iter()
        .enumerate()
        .map(|(p, text)| embedder.embed(&story.id, story.gold_order[p], text))
        .collect::<Result<Vec<_>, _>>()?;
    let graph = if n < 2 {
        SEGraph::empty(n)
    } else {
        let variant = match settings.variant.neighbor_count() {
            Some(k) if k >= n => [GraphVariant::PG1, GraphVariant::PG2][n - 2],
            _ => settings.variant,
        };
        build_variant(&resolved, &embedded, variant)?
    };
    Ok(PreparedStory {
        id: story.id.clone(),
        tie_order: canonical_ranks(&story.sentences),
        embeddings: embedded.into_iter().map(|e| e.vector).collect(),
        resolved,
        graph,
    })
}

/// Prepares stories in parallel; the output keeps input order.
pub fn prepare_all(
    stories: &[Story],
    settings: GraphSettings,
    embedder: &dyn Embedder,
) -> Result<Vec<PreparedStory>, PipelineError> {
    stories
        .par_iter()
        .map(|s| prepare_story(s, settings, embedder))
        .collect()
}

/// Anything that can put a presented story in order.
pub trait Orderer: Sync {
    fn label(&self) -> String;

    /// Orders `story.sentences` as presented. Real systems see `gold_order`
    /// only through preprocessing: pronoun resolution and embedding-table keys.
    fn order(&self, story: &Story) -> Result<Ordering, PipelineError>;
}

/// A trained encoder-decoder with the input settings it was trained under.
pub struct ModelOrderer {
    pub model: Model<f32>,
    pub settings: GraphSettings,
    pub embedder: Box<dyn Embedder>,
    pub mode: DecodeMode,
}

impl ModelOrderer {
    /// Builds the orderer for a checkpoint. The checkpoint's embedder is used
    /// unless `embedder` overrides it; a different graph variant needs `force`.
    pub fn from_checkpoint(
        ckpt: &Checkpoint,
        variant: Option<GraphVariant>,
        force: bool,
        embedder: Option<&EmbedderSpec>,
        mode: DecodeMode,
    ) -> Result<Self, PipelineError> {
        let mut settings = GraphSettings::from(&ckpt.run);
        if let Some(v) = variant {
            ckpt.check_variant(v, force)?;
            settings.variant = v;
        }
        let spec = match embedder {
            Some(s) => s.clone(),
            None => ckpt.run.embedder.parse()?,
        };
        Ok(Self {
            model: ckpt.to_model()?,
            settings,
            embedder: spec.build(ckpt.model.embed_dim, ckpt.run.seed)?,
            mode,
        })
    }

    pub fn order_prepared(&self, prepared: &PreparedStory) -> Result<Ordering, PipelineError> {
        let mut enc = self
            .model
            .encode(&prepared.graph, &prepared.embeddings)
            .map_err(|e| PipelineError::from(e).in_story(&prepared.id))?;
        enc.tie_order.clone_from(&prepared.tie_order);
        Ok(self.model.decode(&enc, self.mode))
    }
}

impl Orderer for ModelOrderer {
    fn label(&self) -> String {
        let coref = if self.settings.coref { "+coref" } else { "" };
        format!("{}{coref} ({})", self.settings.variant, self.mode)
    }

    fn order(&self, story: &Story) -> Result<Ordering, PipelineError> {
        let prepared = prepare_story(story, self.settings, self.embedder.as_ref())?;
        self.order_prepared(&prepared)
    }
}

/// Reads the gold order back; scores 1.0 / 1.0 by construction.
pub struct OracleOrderer;

impl Orderer for OracleOrderer {
    fn label(&self) -> String {
        "oracle".into()
    }

    fn order(&self, story: &Story) -> Result<Ordering, PipelineError> {
        Ok(Ordering::from_ranks(story.gold_order.clone())?)
    }
}

/// Uniformly random permutation per story, seeded by story id.
pub struct RandomOrderer {
    pub seed: u64,
}

impl Orderer for RandomOrderer {
    fn label(&self) -> String {
        "random".into()
    }

    fn order(&self, story: &Story) -> Result<Ordering, PipelineError> {
        let mut rng = ChaCha8Rng::seed_from_u64(story_seed(self.seed ^ 0xA5A5_5A5A, &story.id));
        let mut seq: Vec<usize> = (0..story.sentences.len()).collect();
        seq.shuffle(&mut rng);
        Ok(Ordering::from_sequence(&seq)?)
    }
}

/// Shuffles each story with a seed derived from `seed` and its id, so the
/// same stories are always presented the same way.
pub fn shuffle_all(stories: &[Story], seed: u64) -> Vec<Story> {
    stories
        .iter()
        .map(|s| shuffle_story(s, story_seed(seed, &s.id)).to_story())
        .collect()
}

/// Shuffles every story, orders it and scores the prediction against the
/// applied shuffle. Per-story work runs in parallel; records keep input order.
pub fn evaluate(orderer: &dyn Orderer, stories: &[Story], seed: u64) -> Result<EvalReport, PipelineError> {
    let shuffled = shuffle_all(stories, seed);
    let items = shuffled
        .par_iter()
        .map(|s| {
            let pred = orderer.order(s).map_err(|e| e.in_story(&s.id))?;
            let gold = Ordering::from_ranks(s.gold_order.clone())?;
            Ok((s.id.clone(), pred, gold))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(EvalReport::from_predictions(orderer.label(), &items)?)
}

/// Training inputs for shuffled copies of `stories`.
pub fn examples(
    stories: &[Story],
    settings: GraphSettings,
    embedder: &dyn Embedder,
    seed: u64,
) -> Result<Vec<TrainExample>, PipelineError> {
    let shuffled = shuffle_all(stories, seed);
    prepare_all(&shuffled, settings, embedder)?
        .into_iter()
        .zip(&shuffled)
        .map(|(p, s)| {
            Ok(TrainExample {
                id: p.id,
                graph: p.graph,
                embeddings: p.embeddings,
                gold: Ordering::from_ranks(s.gold_order.clone())?,
                tie_order: p.tie_order,
            })
        })
        .collect()
}

/// Trains on `split.train`, selecting the epoch by `split.validation`.
pub fn train_on_split(
    split: &CorpusSplit,
    cfg: &TrainConfig,
    settings: GraphSettings,
    embedder_spec: &EmbedderSpec,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<Checkpoint, PipelineError> {
    let embedder = embedder_spec.build(cfg.model.embed_dim, cfg.seed)?;
    let train = examples(&split.train, settings, embedder.as_ref(), cfg.seed)?;
    let val = examples(&split.validation, settings, embedder.as_ref(), cfg.seed)?;
    let trained = nn::train(&train, &val, cfg, on_epoch)?;
    Ok(Checkpoint {
        model: cfg.model,
        run: RunInfo {
            variant: settings.variant,
            seed: cfg.seed,
            coref: settings.coref,
            embedder: embedder_spec.to_string(),
        },
        params: trained.params,
        best_epoch: trained.best_epoch,
        history: trained.history,
    })
}

/// One row of an ablation: a variant's test scores and its mean graph size.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: GraphVariant,
    pub report: EvalReport,
    pub mean_ss_edges: f64,
    pub mean_entities: f64,
}

/// Trains and tests every variant in `variants` under identical settings.
pub fn ablate(
    split: &CorpusSplit,
    variants: &[GraphVariant],
    cfg: &TrainConfig,
    coref: bool,
    embedder_spec: &EmbedderSpec,
    mode: DecodeMode,
) -> Result<Vec<AblationRow>, PipelineError> {
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let settings = GraphSettings { variant, coref };
        log::info!("ablation: training {variant}");
        let ckpt = train_on_split(split, cfg, settings, embedder_spec, |_| {})?;
        let orderer = ModelOrderer::from_checkpoint(&ckpt, None, false, None, mode)?;
        let report = evaluate(&orderer, &split.test, cfg.seed)?;
        let prepared = prepare_all(&split.test, settings, orderer.embedder.as_ref())?;
        let n = prepared.len().max(1) as f64;
        rows.push(AblationRow {
            variant,
            mean_ss_edges: prepared.iter().map(|p| p.graph.ss_edges.len()).sum::<usize>() as f64 / n,
            mean_entities: prepared.iter().map(|p| p.graph.entities.len()).sum::<usize>() as f64 / n,
            report: EvalReport {
                label: variant.to_string(),
                ..report
            },
        });
    }
    Ok(rows)
}

/// `| method | tau | pmr | ss-edges | entities | stories |`
pub fn render_ablation(rows: &[AblationRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.report.label.len())
        .chain(["method".len()])
        .max()
        .unwrap_or(6);
    let mut out = format!(
        "| {:<width$} | {:>6} | {:>6} | {:>8} | {:>8} | {:>7} |\n",
        "method", "tau", "pmr", "ss-edges", "entities", "stories"
    );
    out.push_str(&format!(
        "|{}|{}|{}|{}|{}|{}|\n",
        "-".repeat(width + 2),
        "-".repeat(8),
        "-".repeat(8),
        "-".repeat(10),
        "-".repeat(10),
        "-".repeat(9)
    ));
    for r in rows {
        out.push_str(&format!(
            "| {:<width$} | {:>6.4} | {:>6.4} | {:>8.2} | {:>8.2} | {:>7} |\n",
            r.report.label, r.report.mean_tau, r.report.pmr, r.mean_ss_edges, r.mean_entities, r.report.n_stories
        ));
    }
    out
}
