//! Sentence-entity graphs and the topology variants compared in ablations.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine_similarity, EmbedError, SentenceEmbedding};
use crate::hash::fnv1a64;
use crate::text::{default_tagger, extract_entities_with, Entity, ResolvedStory, Role, TextError};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("need at least 2 sentences, got {0}")]
    TooFewSentences(usize),
    #[error("neighbour count k={k} must be below the sentence count {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("expected {expected} embeddings, got {found}")]
    EmbeddingCount { expected: usize, found: usize },
    #[error("embedding error: {0}")]
    Embed(#[from] EmbedError),
    #[error("text error: {0}")]
    Text(#[from] TextError),
    #[error("unknown graph variant {0:?}")]
    UnknownVariant(String),
    #[error("invalid graph: {0}")]
    Invalid(String),
}

/// Sentence nodes `0..n_sentences`, entity nodes indexing `entities`, and two
/// edge kinds. There are never entity-entity edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SEGraph {
    pub n_sentences: usize,
    pub entities: Vec<Entity>,
    /// Undirected sentence pairs stored as `(i, j)` with `i < j`.
    pub ss_edges: BTreeSet<(usize, usize)>,
    /// `(sentence, entity, role)`, one per sentence an entity appears in.
    pub se_edges: BTreeSet<(usize, usize, Role)>,
}

impl SEGraph {
    pub fn empty(n_sentences: usize) -> Self {
        Self {
            n_sentences,
            entities: Vec::new(),
            ss_edges: BTreeSet::new(),
            se_edges: BTreeSet::new(),
        }
    }

    pub fn add_ss_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.ss_edges.insert((a.min(b), a.max(b)));
        }
    }

    /// Sentence neighbours of each sentence, ascending.
    pub fn sentence_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_sentences];
        for &(i, j) in &self.ss_edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj.iter_mut().for_each(|v| v.sort_unstable());
        adj
    }

    pub fn ss_degree(&self, i: usize) -> usize {
        self.ss_edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        for &(i, j) in &self.ss_edges {
            if i >= j || j >= self.n_sentences {
                return Err(GraphError::Invalid(format!("bad sentence edge ({i}, {j})")));
            }
        }
        let mut seen = BTreeSet::new();
        for &(s, e, _) in &self.se_edges {
            if s >= self.n_sentences || e >= self.entities.len() {
                return Err(GraphError::Invalid(format!("bad entity edge ({s}, {e})")));
            }
            if !seen.insert((s, e)) {
                return Err(GraphError::Invalid(format!(
                    "sentence {s} linked to entity {e} with more than one role"
                )));
            }
        }
        for (k, ent) in self.entities.iter().enumerate() {
            if ent.sentence_count() < 2 {
                return Err(GraphError::Invalid(format!(
                    "entity {:?} occurs in fewer than 2 sentences",
                    ent.canonical
                )));
            }
            let linked = self.se_edges.iter().filter(|&&(_, e, _)| e == k).count();
            if linked < 2 {
                return Err(GraphError::Invalid(format!(
                    "entity {:?} is linked to {linked} sentence(s)",
                    ent.canonical
                )));
            }
        }
        let mut canon = BTreeSet::new();
        if !self.entities.iter().all(|e| canon.insert(e.canonical.as_str())) {
            return Err(GraphError::Invalid("duplicate entity".into()));
        }
        Ok(())
    }

    /// Line-oriented dump: `n=<count>`, then `S i j` per sentence edge and
    /// `E i <entity> <role>` per entity edge.
    pub fn dump(&self) -> String {
        let mut out = format!("n={}\n", self.n_sentences);
        for &(i, j) in &self.ss_edges {
            out.push_str(&format!("S {i} {j}\n"));
        }
        for &(s, e, role) in &self.se_edges {
            out.push_str(&format!(
                "E {s} {} {}\n",
                self.entities[e].canonical,
                role_name(role)
            ));
        }
        out
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Subject => "subject",
        Role::Object => "object",
        Role::Other => "other",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphVariant {
    /// Every sentence linked to every other, no entities.
    FullyConnected,
    /// Complete sentence edges plus entity nodes.
    SemiFullSE,
    /// Sentence edges between sentences sharing an entity, raw text.
    SEGraphShared,
    /// As `SEGraphShared`, on pronoun-resolved text.
    SEGraphCoref,
    PG1,
    PG2,
    PG3,
}

impl GraphVariant {
    pub const ALL: [GraphVariant; 7] = [
        GraphVariant::FullyConnected,
        GraphVariant::SemiFullSE,
        GraphVariant::SEGraphShared,
        GraphVariant::SEGraphCoref,
        GraphVariant::PG1,
        GraphVariant::PG2,
        GraphVariant::PG3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphVariant::FullyConnected => "fully-connected",
            GraphVariant::SemiFullSE => "semi-full-se",
            GraphVariant::SEGraphShared => "se-graph",
            GraphVariant::SEGraphCoref => "se-graph-coref",
            GraphVariant::PG1 => "pg1",
            GraphVariant::PG2 => "pg2",
            GraphVariant::PG3 => "pg3",
        }
    }

    pub fn neighbor_count(self) -> Option<usize> {
        match self {
            GraphVariant::PG1 => Some(1),
            GraphVariant::PG2 => Some(2),
            GraphVariant::PG3 => Some(3),
            _ => None,
        }
    }

    pub fn needs_embeddings(self) -> bool {
        self.neighbor_count().is_some()
    }
}

impl fmt::Display for GraphVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphVariant {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        GraphVariant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| GraphError::UnknownVariant(s.to_string()))
    }
}

/// Rank of each sentence under the content-canonical order: by text hash,
/// then by index. Used to break similarity ties independently of the
/// presentation order.
pub fn canonical_ranks(sentences: &[String]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sentences.len()).collect();
    idx.sort_by_key(|&i| (fnv1a64(sentences[i].as_bytes()), i));
    let mut ranks = vec![0; sentences.len()];
    for (r, &i) in idx.iter().enumerate() {
        ranks[i] = r;
    }
    ranks
}

fn with_entities(n: usize, entities: Vec<Entity>) -> SEGraph {
    let mut g = SEGraph::empty(n);
    for (k, ent) in entities.iter().enumerate() {
        for (s, role) in ent.sentence_roles() {
            g.se_edges.insert((s, k, role));
        }
    }
    g.entities = entities;
    g
}

fn entities_of(sentences: &[String]) -> Result<Vec<Entity>, GraphError> {
    Ok(extract_entities_with(sentences, default_tagger())?)
}

/// Pruned graph: each sentence is linked to its `k` most cosine-similar
/// sentences; the edge set is the undirected union of those choices.
pub fn build_pg(
    resolved: &ResolvedStory,
    embeddings: &[SentenceEmbedding],
    k: usize,
) -> Result<SEGraph, GraphError> {
    let n = resolved.len();
    if n < 2 {
        return Err(GraphError::TooFewSentences(n));
    }
    if k >= n {
        return Err(GraphError::KTooLarge { k, n });
    }
    if embeddings.len() != n {
        return Err(GraphError::EmbeddingCount {
            expected: n,
            found: embeddings.len(),
        });
    }
    let canon = canonical_ranks(&resolved.story.sentences);
    let mut sim = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = cosine_similarity(&embeddings[i], &embeddings[j])?;
            sim[i][j] = c;
            sim[j][i] = c;
        }
    }
    let mut g = with_entities(n, entities_of(&resolved.story.sentences)?);
    for (i, row) in sim.iter().enumerate() {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(canon[a].cmp(&canon[b])));
        for &j in others.iter().take(k) {
            g.add_ss_edge(i, j);
        }
    }
    Ok(g)
}

/// Sentences sharing at least one entity are linked. With `use_coref`
/// entities come from the pronoun-resolved text, otherwise from the original.
pub fn build_se_graph(resolved: &ResolvedStory, use_coref: bool) -> Result<SEGraph, GraphError> {
    let n = resolved.len();
    if n < 2 {
        return Err(GraphError::TooFewSentences(n));
    }
    let sentences = if use_coref {
        &resolved.story.sentences
    } else {
        &resolved.original.sentences
    };
    let mut g = with_entities(n, entities_of(sentences)?);
    for ent in &g.entities.clone() {
        let ss: Vec<usize> = ent.sentence_roles().into_keys().collect();
        for (a, &i) in ss.iter().enumerate() {
            for &j in &ss[a + 1..] {
                g.add_ss_edge(i, j);
            }
        }
    }
    Ok(g)
}

pub fn build_fully_connected(n: usize) -> Result<SEGraph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewSentences(n));
    }
    let mut g = SEGraph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            g.add_ss_edge(i, j);
        }
    }
    Ok(g)
}

pub fn build_variant(
    resolved: &ResolvedStory,
    embeddings: &[SentenceEmbedding],
    variant: GraphVariant,
) -> Result<SEGraph, GraphError> {
    match variant {
        GraphVariant::FullyConnected => build_fully_connected(resolved.len()),
        GraphVariant::SemiFullSE => {
            let mut g = with_entities(resolved.len(), entities_of(&resolved.story.sentences)?);
            g.ss_edges = build_fully_connected(resolved.len())?.ss_edges;
            Ok(g)
        }
        GraphVariant::SEGraphShared => build_se_graph(resolved, false),
        GraphVariant::SEGraphCoref => build_se_graph(resolved, true),
        GraphVariant::PG1 | GraphVariant::PG2 | GraphVariant::PG3 => {
            let k = variant.neighbor_count().expect("pg variant");
            build_pg(resolved, embeddings, k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Story;
    use crate::embed::{embed_hash, EmbeddingSource};
    use crate::text::resolve_pronouns;

    fn resolved(xs: &[&str]) -> ResolvedStory {
        let s = Story::new("g", xs.iter().map(|s| s.to_string()).collect()).unwrap();
        resolve_pronouns(&s).unwrap()
    }

    fn hashed(r: &ResolvedStory) -> Vec<SentenceEmbedding> {
        r.story
            .sentences
            .iter()
            .map(|s| embed_hash(s, 64, 0).unwrap())
            .collect()
    }

    const FIVE: [&str; 5] = [
        "The boy bought a kite.",
        "He flew it in the park.",
        "The wind was strong.",
        "The kite broke.",
        "The boy walked home.",
    ];

    #[test]
    fn pg2_on_five_sentences() {
        let r = resolved(&FIVE);
        let g = build_pg(&r, &hashed(&r), 2).unwrap();
        g.validate().unwrap();
        assert!((5..=10).contains(&g.ss_edges.len()));
        for i in 0..5 {
            let d = g.ss_degree(i);
            assert!((2..=4).contains(&d), "degree {d}");
        }
    }

    #[test]
    fn pg_two_sentences() {
        let r = resolved(&["A cat slept.", "A dog ran."]);
        let g = build_pg(&r, &hashed(&r), 1).unwrap();
        assert_eq!(g.ss_edges, BTreeSet::from([(0, 1)]));
        assert!(matches!(
            build_pg(&r, &hashed(&r), 2),
            Err(GraphError::KTooLarge { k: 2, n: 2 })
        ));
    }

    #[test]
    fn identical_embeddings_use_canonical_tie_break() {
        let r = resolved(&FIVE);
        let same = vec![
            SentenceEmbedding {
                vector: vec![1.0, 2.0, 3.0],
                source: EmbeddingSource::File
            };
            5
        ];
        let g = build_pg(&r, &same, 2).unwrap();
        let canon = canonical_ranks(&r.story.sentences);
        let mut expected = BTreeSet::new();
        for i in 0..5 {
            let mut others: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            others.sort_by_key(|&j| canon[j]);
            for &j in &others[..2] {
                expected.insert((i.min(j), i.max(j)));
            }
        }
        assert_eq!(g.ss_edges, expected);
    }

    #[test]
    fn se_graph_links_shared_entities() {
        let r = resolved(&[
            "The dog barked.",
            "The boy smiled.",
            "The girl fed the dog.",
        ]);
        let g = build_se_graph(&r, false).unwrap();
        assert_eq!(g.ss_edges, BTreeSet::from([(0, 2)]));
        assert_eq!(g.entities.len(), 1);
        let none = build_se_graph(&resolved(&["A cat slept.", "A dog ran."]), true).unwrap();
        assert!(none.ss_edges.is_empty() && none.se_edges.is_empty());
    }

    #[test]
    fn coref_adds_shared_entities() {
        let r = resolved(&["Anna bought a bike.", "She rode it home.", "The sun set."]);
        let raw = build_se_graph(&r, false).unwrap();
        let co = build_se_graph(&r, true).unwrap();
        assert!(raw.ss_edges.is_empty());
        assert_eq!(co.ss_edges, BTreeSet::from([(0, 1)]));
        assert!(raw.ss_edges.is_subset(&co.ss_edges));
    }

    #[test]
    fn fully_connected_counts() {
        assert_eq!(build_fully_connected(5).unwrap().ss_edges.len(), 10);
        assert_eq!(build_fully_connected(2).unwrap().ss_edges.len(), 1);
        assert!(build_fully_connected(5).unwrap().entities.is_empty());
        assert!(build_fully_connected(1).is_err());
    }

    #[test]
    fn variants_dispatch() {
        let r = resolved(&FIVE);
        let e = hashed(&r);
        assert_eq!(
            build_variant(&r, &e, GraphVariant::PG2).unwrap(),
            build_pg(&r, &e, 2).unwrap()
        );
        let semi = build_variant(&r, &e, GraphVariant::SemiFullSE).unwrap();
        assert_eq!(semi.ss_edges.len(), 10);
        for v in GraphVariant::ALL {
            build_variant(&r, &e, v).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in GraphVariant::ALL {
            assert_eq!(v.name().parse::<GraphVariant>().unwrap(), v);
        }
        assert!("pg4".parse::<GraphVariant>().is_err());
    }

    #[test]
    fn dump_format() {
        let r = resolved(&["The dog barked.", "The girl fed the dog."]);
        let g = build_se_graph(&r, false).unwrap();
        assert_eq!(g.dump(), "n=2\nS 0 1\nE 0 dog subject\nE 1 dog object\n");
    }

    #[test]
    fn validate_rejects_broken_graphs() {
        let mut g = SEGraph::empty(3);
        g.ss_edges.insert((2, 1));
        assert!(g.validate().is_err());
        let mut g = SEGraph::empty(3);
        g.ss_edges.insert((1, 3));
        assert!(g.validate().is_err());
    }
}
