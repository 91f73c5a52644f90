//! Sentence vectors: a feature-hashing embedder, a precomputed-vector table and cosine similarity.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64_seeded;
use crate::text::tokenize;

pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding dimension must be at least 8, got {0}")]
    DimTooSmall(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: row for ({story_id}, {index}) has {found} values, expected {expected}")]
    RowDim {
        line: usize,
        story_id: String,
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("no embedding for story {story_id:?} sentence {index}")]
    MissingKey { story_id: String, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingSource {
    Hash,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    pub vector: Vec<f64>,
    pub source: EmbeddingSource,
}

impl SentenceEmbedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Signed feature hashing of lowercased word tokens, L2-normalised.
///
/// Punctuation is ignored. A sentence whose buckets cancel out exactly (or
/// that has no word tokens) falls back to a single bucket chosen by hashing
/// the whole sentence, so the result is never the zero vector.
pub fn embed_hash(sentence: &str, dim: usize, seed: u64) -> Result<SentenceEmbedding, EmbedError> {
    if dim < 8 {
        return Err(EmbedError::DimTooSmall(dim));
    }
    let mut v = vec![0.0f64; dim];
    if let Ok(tokens) = tokenize(sentence) {
        for tok in tokens
            .iter()
            .filter(|t| t.normalized.chars().any(char::is_alphanumeric))
        {
            let h = fnv1a64_seeded(tok.normalized.as_bytes(), seed);
            let bucket = (h % dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
    }
    let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let h = fnv1a64_seeded(sentence.as_bytes(), seed ^ 0x5eed);
        v[(h % dim as u64) as usize] = 1.0;
        norm = 1.0;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(SentenceEmbedding {
        vector: v,
        source: EmbeddingSource::Hash,
    })
}

pub fn cosine_similarity(a: &SentenceEmbedding, b: &SentenceEmbedding) -> Result<f64, EmbedError> {
    cosine(&a.vector, &b.vector)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Precomputed vectors keyed by (story id, sentence index in the corpus file).
///
/// File format: a header line `dim=<d>`, then one row per sentence:
/// `story_id<TAB>sentence_index<TAB>f1 f2 ... fd`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    rows: BTreeMap<(String, usize), Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, story_id: &str, index: usize, vector: Vec<f64>) -> Result<(), EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::DimMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        self.rows.insert((story_id.to_string(), index), vector);
        Ok(())
    }

    pub fn get(&self, story_id: &str, index: usize) -> Result<SentenceEmbedding, EmbedError> {
        self.rows
            .get(&(story_id.to_string(), index))
            .map(|v| SentenceEmbedding {
                vector: v.clone(),
                source: EmbeddingSource::File,
            })
            .ok_or_else(|| EmbedError::MissingKey {
                story_id: story_id.to_string(),
                index,
            })
    }

    /// Writes the table; floats use Rust's shortest round-trip formatting.
    pub fn write<W: Write>(&self, mut out: W) -> Result<(), EmbedError> {
        writeln!(out, "dim={}", self.dim)?;
        for ((id, idx), v) in &self.rows {
            let values: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            writeln!(out, "{id}\t{idx}\t{}", values.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, EmbedError> {
        let mut lines = reader.lines().enumerate();
        let dim = loop {
            let Some((i, line)) = lines.next() else {
                return Err(EmbedError::Parse {
                    line: 1,
                    reason: "missing dim=<d> header".into(),
                });
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let dim = line
                .trim()
                .strip_prefix("dim=")
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or_else(|| EmbedError::Parse {
                    line: i + 1,
                    reason: format!("expected dim=<d> header, found {line:?}"),
                })?;
            break dim;
        };
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |reason: String| EmbedError::Parse { line: i + 1, reason };
            let mut fields = line.splitn(3, '\t');
            let (Some(id), Some(idx), Some(values)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(parse_err("expected story_id<TAB>index<TAB>values".into()));
            };
            let index: usize = idx
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad sentence index {idx:?}")))?;
            let vector = values
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| parse_err(e.to_string()))?;
            if vector.len() != dim {
                return Err(EmbedError::RowDim {
                    line: i + 1,
                    story_id: id.to_string(),
                    index,
                    found: vector.len(),
                    expected: dim,
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(parse_err("non-finite value".into()));
            }
            table.rows.insert((id.to_string(), index), vector);
        }
        Ok(table)
    }
}

pub fn load_embedding_table(path: &Path) -> Result<EmbeddingTable, EmbedError> {
    EmbeddingTable::read(BufReader::new(File::open(path)?))
}

/// Source of sentence vectors for the pipeline.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// `index` is the sentence's position in the story as stored in the corpus.
    fn embed(&self, story_id: &str, index: usize, text: &str) -> Result<SentenceEmbedding, EmbedError>;
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _: &str, _: usize, text: &str) -> Result<SentenceEmbedding, EmbedError> {
        embed_hash(text, self.dim, self.seed)
    }
}

/// Mean of hashed vectors over sliding token windows, renormalised.
///
/// A cheap stand-in for a learned word-level sentence encoder in ablations.
#[derive(Debug, Clone)]
pub struct WindowedHashEmbedder {
    pub dim: usize,
    pub seed: u64,
    pub window: usize,
}

impl Embedder for WindowedHashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _: &str, _: usize, text: &str) -> Result<SentenceEmbedding, EmbedError> {
        let words: Vec<String> = tokenize(text)
            .map(|ts| ts.into_iter().map(|t| t.surface).collect())
            .unwrap_or_default();
        let w = self.window.max(1);
        if words.len() <= w {
            return embed_hash(text, self.dim, self.seed);
        }
        let mut acc = vec![0.0; self.dim];
        for chunk in words.windows(w) {
            let e = embed_hash(&chunk.join(" "), self.dim, self.seed)?;
            acc.iter_mut().zip(&e.vector).for_each(|(a, x)| *a += x);
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return embed_hash(text, self.dim, self.seed);
        }
        acc.iter_mut().for_each(|x| *x /= norm);
        Ok(SentenceEmbedding {
            vector: acc,
            source: EmbeddingSource::Hash,
        })
    }
}

impl Embedder for EmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, story_id: &str, index: usize, _: &str) -> Result<SentenceEmbedding, EmbedError> {
        self.get(story_id, index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> SentenceEmbedding {
        SentenceEmbedding {
            vector: v.to_vec(),
            source: EmbeddingSource::File,
        }
    }

    #[test]
    fn hash_embedding_is_deterministic_and_normalized() {
        let a = embed_hash("The dog chased the ball.", 64, 3).unwrap();
        let b = embed_hash("The dog chased the ball.", 64, 3).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        let c = embed_hash("...", 64, 3).unwrap();
        assert!((c.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dim_must_be_at_least_eight() {
        assert!(matches!(embed_hash("x", 7, 0), Err(EmbedError::DimTooSmall(7))));
    }

    #[test]
    fn overlap_increases_similarity() {
        let base = embed_hash("alpha beta gamma delta epsilon", 256, 1).unwrap();
        let overlap = embed_hash("alpha beta gamma delta zeta", 256, 1).unwrap();
        let disjoint = embed_hash("one two three four five", 256, 1).unwrap();
        let near = cosine_similarity(&base, &overlap).unwrap();
        let far = cosine_similarity(&base, &disjoint).unwrap();
        assert!(near > far, "{near} <= {far}");
    }

    #[test]
    fn cosine_examples() {
        let v = emb(&[0.3, -1.2, 4.0]);
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77))
        let expected = 32.0 / (14f64.sqrt() * 77f64.sqrt());
        let got = cosine_similarity(&emb(&[1.0, 2.0, 3.0]), &emb(&[4.0, 5.0, 6.0])).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.974631846).abs() < 1e-9);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&emb(&[0.0, 0.0]), &emb(&[1.0, 0.0])),
            Err(EmbedError::ZeroVector)
        ));
        assert!(matches!(
            cosine_similarity(&emb(&[1.0]), &emb(&[1.0, 0.0])),
            Err(EmbedError::DimMismatch { .. })
        ));
    }

    #[test]
    fn table_round_trip_is_bitwise() {
        let mut t = EmbeddingTable::new(768);
        for i in 0..5 {
            let v = embed_hash(&format!("sentence number {i}"), 768, 9).unwrap().vector;
            t.insert("story", i, v).unwrap();
        }
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = EmbeddingTable::read(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 5);
        for i in 0..5 {
            let a = t.get("story", i).unwrap().vector;
            let b = back.get("story", i).unwrap().vector;
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn mixed_dims_are_rejected_with_row() {
        let data = "dim=3\na\t0\t1 2 3\na\t1\t1 2\n";
        match EmbeddingTable::read(data.as_bytes()) {
            Err(EmbedError::RowDim { line, index, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_key_names_the_key() {
        let t = EmbeddingTable::new(8);
        let err = t.get("s9", 4).unwrap_err();
        assert!(err.to_string().contains("s9") && err.to_string().contains('4'));
    }

    #[test]
    fn windowed_embedder_is_normalized() {
        let e = WindowedHashEmbedder { dim: 32, seed: 0, window: 3 };
        let v = e.embed("", 0, "The old man walked his dog to the park.").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }
}
