//! Graph recurrent story encoder and pointer decoder.
//!
//! Encoder. Sentence states start as an affine projection of the sentence
//! embeddings, the story state as their mean, and entity states as rows of
//! a hashed entity table. Each of `steps` synchronous rounds then updates
//!
//! * every sentence from `[Σ neighbour sentences ; Σ_role P_role·Σ linked
//!   entities ; story state]`,
//! * every entity from the sum of its linked sentences,
//! * the story state from the mean sentence state,
//!
//! each through its own gated recurrent cell. All inputs of a round are read
//! from the previous round's states.
//!
//! Decoder. A gated recurrent state starts from the story state and is fed
//! the previously selected sentence (a learned start vector first). The
//! score of a remaining candidate j is `dᵀ W s_j / √h`; a softmax over the
//! remaining candidates gives the pointer distribution.


use super::params::{GruCell, ModelConfig, ModelParams, ParamStore};
use super::tape::{log_sum_exp, softmax, Gradients, Tape, Var};
use super::{NnError, Scalar};
use crate::graph::SEGraph;
use crate::hash::fnv1a64;
use crate::order::Ordering;
use crate::text::Role;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput<T> {
    pub sentence_states: Vec<Vec<T>>,
    pub story_state: Vec<T>,
    /// Tie-break rank per sentence (lower wins); identity unless set.
    pub tie_order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

impl std::str::FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "greedy" {
            return Ok(DecodeMode::Greedy);
        }
        if let Some(w) = s.strip_prefix("beam:").or_else(|| s.strip_prefix("beam")) {
            let w = if w.is_empty() { "8" } else { w };
            return match w.parse::<usize>() {
                Ok(w) if w >= 1 => Ok(DecodeMode::Beam(w)),
                _ => Err(format!("bad beam width in {s:?}")),
            };
        }
        Err(format!("unknown decode mode {s:?} (expected greedy or beam:W)"))
    }
}

impl std::fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeMode::Greedy => f.write_str("greedy"),
            DecodeMode::Beam(w) => write!(f, "beam:{w}"),
        }
    }
}

pub fn entity_bucket(canonical: &str, buckets: usize) -> usize {
    (fnv1a64(canonical.as_bytes()) % buckets as u64) as usize
}

/// Encoder-decoder bound to a parameter store.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    ids: ModelParams,
}

struct Encoded {
    sentences: Vec<Var>,
    story: Var,
}

fn gru<T: Scalar>(tape: &mut Tape<'_, T>, cell: &GruCell, state: Var, input: Var) -> Var {
    let zl = tape.affine(&[(cell.w_z, input), (cell.u_z, state)], Some(cell.b_z));
    let z = tape.sigmoid(zl);
    let rl = tape.affine(&[(cell.w_r, input), (cell.u_r, state)], Some(cell.b_r));
    let r = tape.sigmoid(rl);
    let gated = tape.mul(r, state);
    let cl = tape.affine(&[(cell.w_c, input), (cell.u_c, gated)], Some(cell.b_c));
    let c = tape.tanh(cl);
    let keep = tape.mul(z, state);
    let zc = tape.one_minus(z);
    let fresh = tape.mul(zc, c);
    tape.add(keep, fresh)
}

fn cast_vec<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from(x).expect("finite")).collect()
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, params: ParamStore<T>) -> Result<Self, NnError> {
        let ids = ModelParams::lookup(&params, &config).map_err(NnError::Params)?;
        Ok(Self {
            config,
            params,
            ids,
        })
    }

    pub fn ids(&self) -> &ModelParams {
        &self.ids
    }

    fn check_inputs(&self, graph: &SEGraph, embeddings: &[Vec<f64>]) -> Result<(), NnError> {
        if embeddings.len() != graph.n_sentences {
            return Err(NnError::Shape(format!(
                "{} embeddings for {} sentences",
                embeddings.len(),
                graph.n_sentences
            )));
        }
        if let Some(e) = embeddings.iter().find(|e| e.len() != self.config.embed_dim) {
            return Err(NnError::Shape(format!(
                "embedding dimension {} does not match model dimension {}",
                e.len(),
                self.config.embed_dim
            )));
        }
        if graph.n_sentences == 0 {
            return Err(NnError::Shape("story has no sentences".into()));
        }
        Ok(())
    }

    fn encode_on_tape(
        &self,
        tape: &mut Tape<'_, T>,
        graph: &SEGraph,
        embeddings: &[Vec<f64>],
    ) -> Result<Encoded, NnError> {
        self.check_inputs(graph, embeddings)?;
        let ids = &self.ids;
        let h = self.config.hidden;
        let n = graph.n_sentences;
        let inv_n = T::from(1.0 / n as f64).unwrap();
        let zero = tape.leaf(vec![T::zero(); h]);

        let mut sentences: Vec<Var> = embeddings
            .iter()
            .map(|e| {
                let x = tape.leaf(cast_vec(e));
                tape.affine(&[(ids.input_w, x)], Some(ids.input_b))
            })
            .collect();
        let total = tape.sum(&sentences);
        let mut story = tape.scale(total, inv_n);
        let mut entities: Vec<Var> = graph
            .entities
            .iter()
            .map(|e| tape.param_row(ids.entity_table, entity_bucket(&e.canonical, self.config.entity_buckets)))
            .collect();

        let neighbors = graph.sentence_neighbors();
        // per sentence, linked entities grouped by role
        let mut by_role = vec![[Vec::new(), Vec::new(), Vec::new()]; n];
        // per entity, linked sentences
        let mut linked = vec![Vec::new(); graph.entities.len()];
        for &(s, e, role) in &graph.se_edges {
            by_role[s][role.index()].push(e);
            linked[e].push(s);
        }

        for round in 0..self.config.steps {
            let mut next_sentences = Vec::with_capacity(n);
            for i in 0..n {
                let ss = if neighbors[i].is_empty() {
                    zero
                } else {
                    let parts: Vec<Var> = neighbors[i].iter().map(|&j| sentences[j]).collect();
                    tape.sum(&parts)
                };
                let mut terms = Vec::new();
                for role in Role::ALL {
                    let group = &by_role[i][role.index()];
                    if group.is_empty() {
                        continue;
                    }
                    let parts: Vec<Var> = group.iter().map(|&k| entities[k]).collect();
                    let s = tape.sum(&parts);
                    terms.push((ids.role_proj[role.index()], s));
                }
                let ent = if terms.is_empty() {
                    zero
                } else {
                    tape.affine(&terms, None)
                };
                let input = tape.concat(&[ss, ent, story]);
                next_sentences.push(gru(tape, &ids.sentence_cell, sentences[i], input));
            }
            let mut next_entities = Vec::with_capacity(entities.len());
            for (k, &state) in entities.iter().enumerate() {
                let parts: Vec<Var> = linked[k].iter().map(|&s| sentences[s]).collect();
                let input = if parts.is_empty() { zero } else { tape.sum(&parts) };
                next_entities.push(gru(tape, &ids.entity_cell, state, input));
            }
            let total = tape.sum(&sentences);
            let mean = tape.scale(total, inv_n);
            let next_story = gru(tape, &ids.story_cell, story, mean);

            sentences = next_sentences;
            entities = next_entities;
            story = next_story;
            let finite = sentences
                .iter()
                .chain(&entities)
                .chain(std::iter::once(&story))
                .all(|&v| tape.value(v).iter().all(|x| x.is_finite()));
            if !finite {
                return Err(NnError::NonFinite { round: round + 1 });
            }
        }
        Ok(Encoded { sentences, story })
    }

    pub fn encode(&self, graph: &SEGraph, embeddings: &[Vec<f64>]) -> Result<EncoderOutput<T>, NnError> {
        let mut tape = Tape::new(&self.params);
        let enc = self.encode_on_tape(&mut tape, graph, embeddings)?;
        Ok(EncoderOutput {
            sentence_states: enc.sentences.iter().map(|&v| tape.value(v).to_vec()).collect(),
            story_state: tape.value(enc.story).to_vec(),
            tie_order: (0..graph.n_sentences).collect(),
        })
    }

    fn pointer_keys(&self, tape: &mut Tape<'_, T>, sentences: &[Var]) -> Vec<Var> {
        sentences
            .iter()
            .map(|&s| tape.affine(&[(self.ids.pointer_w, s)], None))
            .collect()
    }

    fn logits(&self, tape: &mut Tape<'_, T>, state: Var, keys: &[Var], remaining: &[usize]) -> Var {
        let scale = T::from(1.0 / (self.config.hidden as f64).sqrt()).unwrap();
        let scores: Vec<Var> = remaining
            .iter()
            .map(|&j| {
                let d = tape.dot(state, keys[j]);
                tape.scale(d, scale)
            })
            .collect();
        tape.concat(&scores)
    }

    /// Summed step-wise negative log-likelihood of `sequence` (teacher forcing).
    fn nll_on_tape(&self, tape: &mut Tape<'_, T>, enc: &Encoded, sequence: &[usize]) -> Var {
        let keys = self.pointer_keys(tape, &enc.sentences);
        let mut remaining: Vec<usize> = (0..enc.sentences.len()).collect();
        let mut state = enc.story;
        let mut input = tape.param(self.ids.decoder_start);
        let mut losses = Vec::with_capacity(sequence.len());
        for &target in sequence {
            state = gru(tape, &self.ids.decoder_cell, state, input);
            let logits = self.logits(tape, state, &keys, &remaining);
            let pos = remaining
                .iter()
                .position(|&j| j == target)
                .expect("target among remaining candidates");
            losses.push(tape.neg_log_softmax(logits, pos));
            remaining.remove(pos);
            input = enc.sentences[target];
        }
        tape.sum(&losses)
    }

    /// Loss of one story in gold reading order, and its parameter gradients.
    pub fn loss_and_grad(
        &self,
        graph: &SEGraph,
        embeddings: &[Vec<f64>],
        gold_sequence: &[usize],
    ) -> Result<(T, Gradients<T>), NnError> {
        let mut tape = Tape::new(&self.params);
        let enc = self.encode_on_tape(&mut tape, graph, embeddings)?;
        let loss = self.nll_on_tape(&mut tape, &enc, gold_sequence);
        let mut grads = Gradients::zeros_like(&self.params);
        tape.backward(loss, &mut grads);
        grads.densify(&self.params);
        Ok((tape.scalar(loss), grads))
    }

    pub fn loss(&self, graph: &SEGraph, embeddings: &[Vec<f64>], gold_sequence: &[usize]) -> Result<T, NnError> {
        let mut tape = Tape::new(&self.params);
        let enc = self.encode_on_tape(&mut tape, graph, embeddings)?;
        let loss = self.nll_on_tape(&mut tape, &enc, gold_sequence);
        Ok(tape.scalar(loss))
    }

    fn leaves(&self, tape: &mut Tape<'_, T>, enc: &EncoderOutput<T>) -> Encoded {
        Encoded {
            sentences: enc
                .sentence_states
                .iter()
                .map(|s| tape.leaf(s.clone()))
                .collect(),
            story: tape.leaf(enc.story_state.clone()),
        }
    }

    /// Log-probability of reading the sentences in `sequence` order.
    pub fn sequence_log_prob(&self, enc: &EncoderOutput<T>, sequence: &[usize]) -> f64 {
        let mut tape = Tape::new(&self.params);
        let e = self.leaves(&mut tape, enc);
        let nll = self.nll_on_tape(&mut tape, &e, sequence);
        -tape.scalar(nll).to_f64().unwrap()
    }

    /// Pointer distribution at each step when following `sequence`:
    /// `(candidate, probability)` over the candidates still remaining.
    pub fn step_distributions(&self, enc: &EncoderOutput<T>, sequence: &[usize]) -> Vec<Vec<(usize, f64)>> {
        let mut tape = Tape::new(&self.params);
        let e = self.leaves(&mut tape, enc);
        let keys = self.pointer_keys(&mut tape, &e.sentences);
        let mut remaining: Vec<usize> = (0..e.sentences.len()).collect();
        let mut state = e.story;
        let mut input = tape.param(self.ids.decoder_start);
        let mut out = Vec::new();
        for &target in sequence {
            state = gru(&mut tape, &self.ids.decoder_cell, state, input);
            let logits = self.logits(&mut tape, state, &keys, &remaining);
            let probs = softmax(tape.value(logits));
            out.push(
                remaining
                    .iter()
                    .zip(probs)
                    .map(|(&j, p)| (j, p.to_f64().unwrap()))
                    .collect(),
            );
            remaining.retain(|&j| j != target);
            input = e.sentences[target];
        }
        out
    }

    /// Decodes a full permutation. Beam search keeps the `width` best partial
    /// sequences by log-probability; exact score ties go to the sequence that
    /// is lexicographically smaller under `tie_order`. Greedy is width 1.
    pub fn decode(&self, enc: &EncoderOutput<T>, mode: DecodeMode) -> Ordering {
        let width = match mode {
            DecodeMode::Greedy => 1,
            DecodeMode::Beam(w) => w.max(1),
        };
        let n = enc.sentence_states.len();
        let mut tape = Tape::new(&self.params);
        let e = self.leaves(&mut tape, enc);
        let keys = self.pointer_keys(&mut tape, &e.sentences);
        let start = tape.param(self.ids.decoder_start);

        struct Beam {
            seq: Vec<usize>,
            step_lp: Vec<f64>,
            logp: f64,
            state: Var,
        }
        let mut beams = vec![Beam {
            seq: Vec::new(),
            step_lp: Vec::new(),
            logp: 0.0,
            state: e.story,
        }];
        for _ in 0..n {
            let mut cands: Vec<(f64, Vec<usize>, usize, usize, f64)> = Vec::new();
            let mut states = Vec::with_capacity(beams.len());
            for (b, beam) in beams.iter().enumerate() {
                let input = beam.seq.last().map_or(start, |&j| e.sentences[j]);
                let state = gru(&mut tape, &self.ids.decoder_cell, beam.state, input);
                states.push(state);
                let remaining: Vec<usize> = (0..n).filter(|j| !beam.seq.contains(j)).collect();
                let logits = self.logits(&mut tape, state, &keys, &remaining);
                let lv = tape.value(logits);
                let lse = log_sum_exp(lv);
                for (&j, &l) in remaining.iter().zip(lv) {
                    let lp = (l - lse).to_f64().unwrap();
                    let key: Vec<usize> = beam
                        .seq
                        .iter()
                        .chain(std::iter::once(&j))
                        .map(|&s| enc.tie_order[s])
                        .collect();
                    cands.push((beam.logp + lp, key, b, j, lp));
                }
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            cands.truncate(width);
            beams = cands
                .into_iter()
                .map(|(logp, _, b, j, lp)| {
                    let prev = &beams[b];
                    let mut seq = prev.seq.clone();
                    seq.push(j);
                    let mut step_lp = prev.step_lp.clone();
                    step_lp.push(lp);
                    Beam {
                        seq,
                        step_lp,
                        logp,
                        state: states[b],
                    }
                })
                .collect();
        }
        let best = &beams[0];
        Ordering::from_sequence(&best.seq)
            .expect("decoder emits a permutation")
            .with_scores(best.step_lp.clone())
    }
}
