//! Fusing several orderings of the same story by pairwise majority voting.
//!
//! Every directed pair (i before j) is scored by how many input orderings
//! contain it. The fused order is the permutation with the largest total
//! score over the pairs it realises. When the strict-majority relation is
//! acyclic this order realises every majority pair; when the majorities form
//! a cycle it is the best linearisation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::Ordering;

/// Largest story length solved exactly.
pub const MAX_EXACT: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnsembleError {
    #[error("no orderings to combine")]
    Empty,
    #[error("ordering {index} has length {found}, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("exact search supports at most {MAX_EXACT} sentences, got {0}; use the greedy heuristic")]
    TooLarge(usize),
    #[error("invalid vote matrix: {0}")]
    Invalid(String),
    #[error("orderings line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVoteMatrix {
    n: usize,
    k: usize,
    /// Row-major `n × n`; `votes[i * n + j]` counts orderings with i before j.
    votes: Vec<u32>,
}

impl PairVoteMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of orderings that voted.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.votes[i * self.n + j]
    }

    /// Builds a matrix from explicit counts; checks `v[i][j] + v[j][i] == k`.
    pub fn from_counts(k: usize, rows: Vec<Vec<u32>>) -> Result<Self, EnsembleError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(EnsembleError::Invalid("matrix is not square".into()));
        }
        let m = Self {
            n,
            k,
            votes: rows.into_iter().flatten().collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        for i in 0..self.n {
            if self.get(i, i) != 0 {
                return Err(EnsembleError::Invalid(format!("diagonal entry {i} is nonzero")));
            }
            for j in (i + 1)..self.n {
                if (self.get(i, j) + self.get(j, i)) as usize != self.k {
                    return Err(EnsembleError::Invalid(format!(
                        "votes for pair ({i}, {j}) do not sum to {}",
                        self.k
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total votes of the pairs an ordering realises.
    pub fn score(&self, ordering: &Ordering) -> u64 {
        score_sequence(self, &ordering.sequence())
    }

    /// True if more than half of the orderings put `i` before `j`.
    pub fn strict_majority(&self, i: usize, j: usize) -> bool {
        2 * self.get(i, j) as usize > self.k
    }
}

fn score_sequence(votes: &PairVoteMatrix, seq: &[usize]) -> u64 {
    let mut total = 0u64;
    for (a, &i) in seq.iter().enumerate() {
        for &j in &seq[a + 1..] {
            total += u64::from(votes.get(i, j));
        }
    }
    total
}

pub fn pair_votes(orderings: &[Ordering]) -> Result<PairVoteMatrix, EnsembleError> {
    let first = orderings.first().ok_or(EnsembleError::Empty)?;
    let n = first.len();
    let mut votes = vec![0u32; n * n];
    for (index, o) in orderings.iter().enumerate() {
        if o.len() != n {
            return Err(EnsembleError::LengthMismatch {
                index,
                expected: n,
                found: o.len(),
            });
        }
        let r = o.ranks();
        for i in 0..n {
            for j in 0..n {
                if r[i] < r[j] {
                    votes[i * n + j] += 1;
                }
            }
        }
    }
    Ok(PairVoteMatrix {
        n,
        k: orderings.len(),
        votes,
    })
}

/// Highest-scoring permutation. Ties go to the lexicographically smallest
/// reading sequence. Solved by dynamic programming over subsets.
pub fn majority_order(votes: &PairVoteMatrix) -> Result<Ordering, EnsembleError> {
    let n = votes.n();
    if n > MAX_EXACT {
        return Err(EnsembleError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Ordering::identity(0));
    }
    let full = (1usize << n) - 1;
    // best[s]: max score of arranging the sentences in subset s among themselves
    let mut best = vec![0u64; 1 << n];
    for s in 1..=full {
        let mut top = 0u64;
        for x in members(s) {
            let rest = s & !(1 << x);
            let v = lead_gain(votes, x, rest) + best[rest];
            top = top.max(v);
        }
        best[s] = top;
    }
    let mut seq = Vec::with_capacity(n);
    let mut s = full;
    while s != 0 {
        let x = members(s)
            .find(|&x| {
                let rest = s & !(1 << x);
                lead_gain(votes, x, rest) + best[rest] == best[s]
            })
            .expect("some element attains the optimum");
        seq.push(x);
        s &= !(1 << x);
    }
    Ok(Ordering::from_sequence(&seq).expect("sequence is a permutation"))
}

fn members(s: usize) -> impl Iterator<Item = usize> {
    (0..usize::BITS as usize).filter(move |&x| s & (1 << x) != 0)
}

/// Votes gained by placing `x` before every member of `rest`.
fn lead_gain(votes: &PairVoteMatrix, x: usize, rest: usize) -> u64 {
    members(rest).map(|y| u64::from(votes.get(x, y))).sum()
}

/// Reference solver: scans all n! sequences in lexicographic order and keeps
/// the first one with the maximal score.
pub fn majority_order_exhaustive(votes: &PairVoteMatrix) -> Result<Ordering, EnsembleError> {
    let n = votes.n();
    if n > MAX_EXACT {
        return Err(EnsembleError::TooLarge(n));
    }
    let mut seq: Vec<usize> = (0..n).collect();
    let mut best_seq = seq.clone();
    let mut best = score_sequence(votes, &seq);
    while next_permutation(&mut seq) {
        let s = score_sequence(votes, &seq);
        if s > best {
            best = s;
            best_seq.clone_from(&seq);
        }
    }
    Ok(Ordering::from_sequence(&best_seq).expect("sequence is a permutation"))
}

/// Advances to the next lexicographic permutation; false after the last one.
pub fn next_permutation(seq: &mut [usize]) -> bool {
    let n = seq.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| seq[i] < seq[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| seq[j] > seq[i]).expect("successor exists");
    seq.swap(i, j);
    seq[i + 1..].reverse();
    true
}

/// Greedy feedback-arc-set heuristic for long stories: repeatedly emits the
/// sentence with the largest (outgoing − incoming) vote margin among those left.
pub fn majority_order_greedy(votes: &PairVoteMatrix) -> Ordering {
    let n = votes.n();
    let mut left: Vec<usize> = (0..n).collect();
    let mut seq = Vec::with_capacity(n);
    while !left.is_empty() {
        let margin = |x: usize, left: &[usize]| -> i64 {
            left.iter()
                .filter(|&&y| y != x)
                .map(|&y| i64::from(votes.get(x, y)) - i64::from(votes.get(y, x)))
                .sum()
        };
        let (pos, _) = left
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| margin(a, &left).cmp(&margin(b, &left)).then(b.cmp(&a)))
            .expect("non-empty");
        seq.push(left.remove(pos));
    }
    Ordering::from_sequence(&seq).expect("sequence is a permutation")
}

/// Fuses orderings: exact for short stories, greedy otherwise when allowed.
pub fn fuse(orderings: &[Ordering], allow_greedy: bool) -> Result<Ordering, EnsembleError> {
    let votes = pair_votes(orderings)?;
    match majority_order(&votes) {
        Err(EnsembleError::TooLarge(_)) if allow_greedy => Ok(majority_order_greedy(&votes)),
        other => other,
    }
}

/// Reads an orderings file: `story_id TAB r0 r1 ...`, where `r_p` is the
/// predicted gold position of the sentence presented at position p.
pub fn read_orderings<R: BufRead>(reader: R) -> Result<Vec<(String, Ordering)>, EnsembleError> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EnsembleError::Io(e.to_string()))?;
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EnsembleError::Parse {
            line: line_no,
            reason,
        };
        let (id, ranks) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected story id, a tab, then ranks".into()))?;
        let ranks = ranks
            .split_whitespace()
            .map(|r| r.parse::<usize>().map_err(|e| bad(format!("rank {r:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let ordering = Ordering::from_ranks(ranks).map_err(|e| bad(e.to_string()))?;
        out.push((id.to_string(), ordering));
    }
    Ok(out)
}

pub fn write_orderings<W: Write>(mut out: W, items: &[(String, Ordering)]) -> std::io::Result<()> {
    for (id, o) in items {
        let ranks: Vec<String> = o.ranks().iter().map(usize::to_string).collect();
        writeln!(out, "{id}\t{}", ranks.join(" "))?;
    }
    Ok(())
}
