//! Permutations over the sentences of one story.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("not a permutation of 0..{n}: {values:?}")]
    NotPermutation { n: usize, values: Vec<usize> },
}

/// Returns true if `values` contains each of `0..values.len()` exactly once.
pub fn is_permutation(values: &[usize]) -> bool {
    let mut seen = vec![false; values.len()];
    for &v in values {
        if v >= values.len() || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// Predicted (or gold) order of a story's sentences.
///
/// `ranks[p]` is the position assigned to the sentence presented at `p`.
/// The equivalent reading order is available through [`Ordering::sequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    ranks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
}

impl Ordering {
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self, OrderError> {
        if !is_permutation(&ranks) {
            return Err(OrderError::NotPermutation {
                n: ranks.len(),
                values: ranks,
            });
        }
        Ok(Self {
            ranks,
            scores: None,
        })
    }

    /// Builds an ordering from the sequence of presented indices in reading order.
    pub fn from_sequence(sequence: &[usize]) -> Result<Self, OrderError> {
        if !is_permutation(sequence) {
            return Err(OrderError::NotPermutation {
                n: sequence.len(),
                values: sequence.to_vec(),
            });
        }
        let mut ranks = vec![0; sequence.len()];
        for (rank, &p) in sequence.iter().enumerate() {
            ranks[p] = rank;
        }
        Ok(Self {
            ranks,
            scores: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            ranks: (0..n).collect(),
            scores: None,
        }
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Self {
        self.scores = Some(scores);
        self
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Presented indices in predicted reading order.
    pub fn sequence(&self) -> Vec<usize> {
        let mut seq = vec![0; self.ranks.len()];
        for (p, &r) in self.ranks.iter().enumerate() {
            seq[r] = p;
        }
        seq
    }

    /// True if sentence `a` is placed before sentence `b`.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.ranks[a] < self.ranks[b]
    }

    /// Same ranks, ignoring any attached scores.
    pub fn same_order(&self, other: &Ordering) -> bool {
        self.ranks == other.ranks
    }
}
