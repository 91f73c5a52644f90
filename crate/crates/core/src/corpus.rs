//! Story corpora: loading, validation, splitting, shuffling and a synthetic generator.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::is_permutation;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("story {id:?} has {count} sentence(s); at least 2 are required")]
    TooFewSentences { id: String, count: usize },
    #[error("story {id:?}: sentence {index} is empty")]
    EmptySentence { id: String, index: usize },
    #[error("story {id:?}: gold order {order:?} is not a permutation")]
    BadGoldOrder { id: String, order: Vec<usize> },
    #[error("duplicate story id {0:?}")]
    DuplicateId(String),
    #[error("invalid split ratios {0:?}: must be positive and sum to 1")]
    BadRatios((f64, f64, f64)),
    #[error("need at least 3 stories to split, got {0}")]
    TooFewStories(usize),
    #[error("unknown corpus format {0:?} (expected jsonl or tsv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// A story: sentences plus the gold position of each one.
///
/// `gold_order[i]` is the gold position of `sentences[i]`; it is the identity
/// for stories read from a gold corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub id: String,
    pub sentences: Vec<String>,
    pub gold_order: Vec<usize>,
}

impl Story {
    /// A story in gold order.
    pub fn new(id: impl Into<String>, sentences: Vec<String>) -> Result<Self, CorpusError> {
        let n = sentences.len();
        Self::with_gold_order(id, sentences, (0..n).collect())
    }

    pub fn with_gold_order(
        id: impl Into<String>,
        sentences: Vec<String>,
        gold_order: Vec<usize>,
    ) -> Result<Self, CorpusError> {
        let story = Story {
            id: id.into(),
            sentences: sentences.into_iter().map(|s| s.trim().to_string()).collect(),
            gold_order,
        };
        story.validate()?;
        Ok(story)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.sentences.len() < 2 {
            return Err(CorpusError::TooFewSentences {
                id: self.id.clone(),
                count: self.sentences.len(),
            });
        }
        if let Some(index) = self.sentences.iter().position(|s| s.trim().is_empty()) {
            return Err(CorpusError::EmptySentence {
                id: self.id.clone(),
                index,
            });
        }
        if self.gold_order.len() != self.sentences.len() || !is_permutation(&self.gold_order) {
            return Err(CorpusError::BadGoldOrder {
                id: self.id.clone(),
                order: self.gold_order.clone(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentences rearranged into gold order.
    pub fn gold_sentences(&self) -> Vec<String> {
        reorder(&self.sentences, &self.gold_order)
    }

    pub fn has_duplicate_sentences(&self) -> bool {
        let mut seen = HashSet::new();
        !self.sentences.iter().all(|s| seen.insert(s.as_str()))
    }
}

/// Places `items[p]` at `positions[p]`.
pub fn reorder<T: Clone>(items: &[T], positions: &[usize]) -> Vec<T> {
    let mut slots: Vec<Option<T>> = vec![None; items.len()];
    for (item, &pos) in items.iter().zip(positions) {
        slots[pos] = Some(item.clone());
    }
    slots
        .into_iter()
        .map(|s| s.expect("positions must be a permutation"))
        .collect()
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonRecord {
    id: String,
    sentences: Vec<String>,
    /// Present only in shuffled files: gold position of each sentence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_order: Option<Vec<usize>>,
}

struct RawRecord {
    line: usize,
    id: String,
    sentences: Vec<String>,
    gold_order: Option<Vec<usize>>,
}

fn read_records<R: BufRead>(reader: R, format: CorpusFormat) -> Result<Vec<RawRecord>, CorpusError> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec = match format {
            CorpusFormat::Jsonl => {
                let rec: JsonRecord =
                    serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                        line: line_no,
                        reason: e.to_string(),
                    })?;
                RawRecord {
                    line: line_no,
                    id: rec.id,
                    sentences: rec.sentences,
                    gold_order: rec.gold_order,
                }
            }
            CorpusFormat::Tsv => {
                let mut fields = line.split('\t');
                let id = fields.next().unwrap_or_default().trim().to_string();
                if id.is_empty() {
                    return Err(CorpusError::Malformed {
                        line: line_no,
                        reason: "missing story id".into(),
                    });
                }
                RawRecord {
                    line: line_no,
                    id,
                    sentences: fields.map(str::to_string).collect(),
                    gold_order: None,
                }
            }
        };
        out.push(rec);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Story>, CorpusError> {
    let file = File::open(path)?;
    read_corpus(BufReader::new(file), format)
}

/// Parses a corpus from any reader. Blank lines are skipped. JSONL records
/// may carry a `gold_order` field (as written by [`write_presented`]);
/// otherwise sentences are taken to be in gold order.
pub fn read_corpus<R: BufRead>(reader: R, format: CorpusFormat) -> Result<Vec<Story>, CorpusError> {
    let mut stories = Vec::new();
    for rec in read_records(reader, format)? {
        let n = rec.sentences.len();
        let gold = rec.gold_order.unwrap_or_else(|| (0..n).collect());
        let line = rec.line;
        let story = Story::with_gold_order(rec.id, rec.sentences, gold).map_err(|e| match e {
            CorpusError::EmptySentence { id, index } => CorpusError::Malformed {
                line,
                reason: format!("story {id:?}: sentence {index} is empty"),
            },
            other => other,
        })?;
        if story.has_duplicate_sentences() {
            log::warn!("story {:?} contains duplicate sentences", story.id);
        }
        stories.push(story);
    }
    Ok(stories)
}

/// Reads stories to be ordered: like [`read_corpus`] but single-sentence
/// stories are allowed and any gold order is ignored.
pub fn read_presented<R: BufRead>(
    reader: R,
    format: CorpusFormat,
) -> Result<Vec<(String, Vec<String>)>, CorpusError> {
    let mut out = Vec::new();
    for rec in read_records(reader, format)? {
        if rec.sentences.is_empty() {
            return Err(CorpusError::TooFewSentences {
                id: rec.id,
                count: 0,
            });
        }
        let sentences: Vec<String> = rec.sentences.iter().map(|s| s.trim().to_string()).collect();
        if let Some(index) = sentences.iter().position(|s| s.is_empty()) {
            return Err(CorpusError::EmptySentence { id: rec.id, index });
        }
        out.push((rec.id, sentences));
    }
    Ok(out)
}

/// Writes stories as presented (sentence order unchanged) with their gold
/// order, as JSONL.
pub fn write_presented<W: Write>(mut out: W, stories: &[Story]) -> Result<(), CorpusError> {
    for story in stories {
        let rec = JsonRecord {
            id: story.id.clone(),
            sentences: story.sentences.clone(),
            gold_order: Some(story.gold_order.clone()),
        };
        writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
    }
    Ok(())
}

/// Writes stories in gold order.
pub fn write_corpus<W: Write>(
    mut out: W,
    stories: &[Story],
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    for story in stories {
        let sentences = story.gold_sentences();
        match format {
            CorpusFormat::Jsonl => {
                let rec = JsonRecord {
                    id: story.id.clone(),
                    sentences,
                    gold_order: None,
                };
                let line = serde_json::to_string(&rec).expect("record serializes");
                writeln!(out, "{line}")?;
            }
            CorpusFormat::Tsv => {
                writeln!(out, "{}\t{}", story.id, sentences.join("\t"))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<Story>,
    pub validation: Vec<Story>,
    pub test: Vec<Story>,
    pub seed: u64,
}

/// Randomly partitions stories by `ratios`. Train and validation sizes are
/// floored; the test set takes the remainder.
pub fn split_corpus(
    stories: &[Story],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    let (rt, rv, rs) = ratios;
    if !(rt > 0.0 && rv > 0.0 && rs > 0.0) || ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(ratios));
    }
    if stories.len() < 3 {
        return Err(CorpusError::TooFewStories(stories.len()));
    }
    let mut ids = HashSet::new();
    for s in stories {
        if !ids.insert(s.id.as_str()) {
            return Err(CorpusError::DuplicateId(s.id.clone()));
        }
    }

    let n = stories.len();
    let n_train = ((n as f64) * rt).floor() as usize;
    let n_val = ((n as f64) * rv).floor() as usize;

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |range: &[usize]| range.iter().map(|&i| stories[i].clone()).collect();
    Ok(CorpusSplit {
        train: pick(&idx[..n_train]),
        validation: pick(&idx[n_train..n_train + n_val]),
        test: pick(&idx[n_train + n_val..]),
        seed,
    })
}

/// Sentences in presentation order, with the gold position of each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffledStory {
    pub story_id: String,
    pub presented: Vec<String>,
    /// `applied_permutation[p]` is the gold position of `presented[p]`.
    pub applied_permutation: Vec<usize>,
}

impl ShuffledStory {
    pub fn gold_sentences(&self) -> Vec<String> {
        reorder(&self.presented, &self.applied_permutation)
    }

    /// The shuffled story as a [`Story`] whose gold order records the shuffle.
    pub fn to_story(&self) -> Story {
        Story {
            id: self.story_id.clone(),
            sentences: self.presented.clone(),
            gold_order: self.applied_permutation.clone(),
        }
    }
}

pub fn shuffle_story(story: &Story, seed: u64) -> ShuffledStory {
    let n = story.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // sentence index shown at each presented position
    let mut shown: Vec<usize> = (0..n).collect();
    shown.shuffle(&mut rng);
    ShuffledStory {
        story_id: story.id.clone(),
        presented: shown.iter().map(|&i| story.sentences[i].clone()).collect(),
        applied_permutation: shown.iter().map(|&i| story.gold_order[i]).collect(),
    }
}

/// Derives a per-story seed from a root seed and the story id.
pub fn story_seed(root: u64, story_id: &str) -> u64 {
    crate::hash::fnv1a64(story_id.as_bytes()) ^ root.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const MARKERS: [&str; 6] = ["Then", "Next", "After that", "Later", "Soon", "Afterwards"];

pub(crate) const PEOPLE: [&str; 16] = [
    "farmer", "girl", "boy", "teacher", "doctor", "baker", "sailor", "student", "nurse",
    "painter", "driver", "singer", "writer", "hunter", "pilot", "chef",
];

pub(crate) const OBJECTS: [&str; 40] = [
    "bike", "ball", "book", "dog", "cat", "car", "boat", "cake", "garden", "house", "letter",
    "phone", "river", "hat", "kite", "lamp", "map", "coat", "horse", "key", "box", "guitar",
    "apple", "door", "window", "table", "chair", "ticket", "camera", "bottle", "basket",
    "bridge", "market", "park", "school", "store", "tree", "fence", "bag", "pie",
];

pub(crate) const PAST_VERBS: [&str; 30] = [
    "bought", "found", "painted", "cleaned", "carried", "fixed", "sold", "visited", "watched",
    "opened", "washed", "packed", "lost", "liked", "moved", "checked", "wanted", "needed",
    "saw", "took", "made", "brought", "kept", "held", "left", "dropped", "picked", "loved",
    "fed", "rode",
];

/// Generates stories whose order is signalled by ordinal markers
/// ("First", "Then", ..., "Finally"), a recurring protagonist and pronouns.
///
/// `n_sentences` must lie in `2..=8`; `vocab_size` bounds how many distinct
/// filler nouns and verbs are drawn from the bundled lexicon.
pub fn generate_synthetic(
    n_stories: usize,
    n_sentences: usize,
    vocab_size: usize,
    seed: u64,
) -> Vec<Story> {
    assert!(
        (2..=8).contains(&n_sentences),
        "n_sentences must be in 2..=8, got {n_sentences}"
    );
    let half = (vocab_size / 2).max(2);
    let nouns = &OBJECTS[..half.min(OBJECTS.len())];
    let verbs = &PAST_VERBS[..half.min(PAST_VERBS.len())];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_stories)
        .map(|k| {
            let hero = PEOPLE[rng.gen_range(0..PEOPLE.len())];
            let pronoun = if rng.gen_bool(0.5) { "he" } else { "she" };
            let first_object = nouns[rng.gen_range(0..nouns.len())];
            let mut sentences = Vec::with_capacity(n_sentences);
            for pos in 0..n_sentences {
                let verb = verbs[rng.gen_range(0..verbs.len())];
                let object = nouns[rng.gen_range(0..nouns.len())];
                let sentence = if pos == 0 {
                    format!("First, the {hero} {verb} a {first_object}.")
                } else {
                    let marker = if pos == n_sentences - 1 {
                        "Finally"
                    } else {
                        MARKERS[pos - 1]
                    };
                    // the last sentence repeats the protagonist and the first object;
                    // the second always uses a pronoun
                    let template = if pos == n_sentences - 1 {
                        0
                    } else if pos == 1 {
                        1
                    } else {
                        rng.gen_range(0..3)
                    };
                    match template {
                        0 if pos == n_sentences - 1 => {
                            format!("{marker}, the {hero} {verb} the {first_object}.")
                        }
                        0 => format!("{marker}, the {hero} {verb} the {object}."),
                        1 => format!("{marker}, {pronoun} {verb} the {object}."),
                        _ => format!("{marker}, {pronoun} {verb} it near the {object}."),
                    }
                };
                sentences.push(sentence);
            }
            Story::new(format!("syn-{seed}-{k:05}"), sentences)
                .expect("generated stories are valid")
        })
        .collect()
}
