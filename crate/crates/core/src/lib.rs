//! Sentence ordering for short stories.
//!
//! Stories are turned into sentence-entity graphs whose sentence-sentence
//! edges are pruned to each sentence's most similar neighbours, encoded with
//! a graph recurrent network and decoded into an order by a pointer network.
//! Orders from several systems can be fused by pairwise majority voting.

pub mod cli;
pub mod corpus;
pub mod embed;
pub mod ensemble;
pub mod graph;
pub mod hash;
pub mod metrics;
pub mod nn;
pub mod order;
pub mod pipeline;
pub mod text;

pub use corpus::{CorpusSplit, ShuffledStory, Story};
pub use order::Ordering;
