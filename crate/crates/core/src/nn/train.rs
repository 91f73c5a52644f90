use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{DecodeMode, Model};
use super::params::{init_params, ModelConfig, ParamStore};
use super::tape::Gradients;
use super::{NnError, Scalar};
use crate::graph::SEGraph;
use crate::metrics::kendall_tau;
use crate::order::Ordering;

/// A story ready for the network: graph, sentence vectors and gold order.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub id: String,
    pub graph: SEGraph,
    pub embeddings: Vec<Vec<f64>>,
    pub gold: Ordering,
    /// Content-canonical tie-break ranks for decoding.
    pub tie_order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 32,
            learning_rate: 1e-3,
            epochs: 30,
            seed: 0,
            clip_norm: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-story loss over the epoch's batches.
    pub train_loss: f64,
    pub val_tau: f64,
    pub val_pmr: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    /// Parameters of the best validation epoch.
    pub params: ParamStore<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
}

impl<T: Scalar> Adam<T> {
    fn new(params: &ParamStore<T>, lr: f64) -> Self {
        let zeros = || params.iter().map(|p| vec![T::zero(); p.data.len()]).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
            lr: T::from(lr).unwrap(),
            beta1: T::from(0.9).unwrap(),
            beta2: T::from(0.999).unwrap(),
            eps: T::from(1e-8).unwrap(),
        }
    }

    fn step(&mut self, params: &mut ParamStore<T>, grads: &Gradients<T>) {
        self.t += 1;
        let bc1 = T::one() - self.beta1.powi(self.t);
        let bc2 = T::one() - self.beta2.powi(self.t);
        let ids: Vec<_> = params.ids().collect();
        for pid in ids {
            let g = grads.get(pid);
            let (m, v) = (&mut self.m[pid.index()], &mut self.v[pid.index()]);
            let data = &mut params.get_mut(pid).data;
            for i in 0..data.len() {
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] = data[i] - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Mean τ and PMR of greedy decoding over `examples`.
pub fn validate<T: Scalar>(model: &Model<T>, examples: &[TrainExample], mode: DecodeMode) -> Result<(f64, f64), NnError> {
    let results: Vec<(f64, bool)> = examples
        .par_iter()
        .map(|ex| {
            let mut enc = model.encode(&ex.graph, &ex.embeddings)?;
            enc.tie_order.clone_from(&ex.tie_order);
            let pred = model.decode(&enc, mode);
            let tau = if ex.gold.len() >= 2 {
                kendall_tau(&pred, &ex.gold).expect("same length")
            } else {
                1.0
            };
            Ok((tau, pred.same_order(&ex.gold)))
        })
        .collect::<Result<_, NnError>>()?;
    let n = results.len().max(1) as f64;
    let tau = results.iter().map(|r| r.0).sum::<f64>() / n;
    let pmr = results.iter().filter(|r| r.1).count() as f64 / n;
    Ok((tau, pmr))
}

/// Minimises the summed step-wise pointer loss with Adam and global-norm
/// gradient clipping. Per-example gradients of a batch are computed in
/// parallel and reduced in batch order, so runs are reproducible per seed.
pub fn train(
    train: &[TrainExample],
    val: &[TrainExample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Trained, NnError> {
    if train.is_empty() || val.is_empty() {
        return Err(NnError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params: ParamStore<f32> = init_params(&cfg.model, &mut rng);
    let mut model = Model::new(cfg.model, params)?;
    let mut adam = Adam::new(&model.params, cfg.learning_rate);
    let clip = cfg.clip_norm as f32;
    let gold_seqs: Vec<Vec<usize>> = train.iter().map(|ex| ex.gold.sequence()).collect();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, ParamStore<f32>)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for (batch_idx, batch) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let per_example: Vec<(f32, Gradients<f32>)> = batch
                .par_iter()
                .map(|&i| model.loss_and_grad(&train[i].graph, &train[i].embeddings, &gold_seqs[i]))
                .collect::<Result<_, _>>()?;
            let mut total = Gradients::zeros_like(&model.params);
            let mut batch_loss = 0.0f64;
            for (l, g) in &per_example {
                batch_loss += l.to_f64().unwrap();
                total.accumulate(g);
            }
            if !batch_loss.is_finite() || !total.is_finite() {
                return Err(NnError::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            total.scale(1.0 / batch.len() as f32);
            let norm = total.norm();
            if norm > clip {
                total.scale(clip / norm);
            }
            adam.step(&mut model.params, &total);
            loss_sum += batch_loss;
        }
        if !model.params.all_finite() {
            return Err(NnError::Diverged {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size.max(1)),
            });
        }
        let (val_tau, val_pmr) = validate(&model, val, DecodeMode::Greedy)?;
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_tau,
            val_pmr,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} val tau {:.4} pmr {:.4}",
            stats.train_loss,
            val_tau,
            val_pmr
        );
        on_epoch(&stats);
        history.push(stats);
        let better = match &best {
            None => true,
            Some((p, t, _, _)) => (val_pmr, val_tau) > (*p, *t),
        };
        if better {
            best = Some((val_pmr, val_tau, epoch, model.params.clone()));
        }
    }
    let (params, best_epoch) = match best {
        Some((_, _, e, p)) => (p, e),
        None => (model.params, 0),
    };
    Ok(Trained {
        params,
        best_epoch,
        history,
    })
}
