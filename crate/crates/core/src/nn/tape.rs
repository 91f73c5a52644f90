//! Vector-valued reverse-mode differentiation over a recorded tape.
//!
//! Every node holds a vector (scalars are length-1 vectors). Parameters live
//! outside the tape in a [`ParamStore`]; backward accumulates into a
//! [`Gradients`] of matching shape.

use std::collections::BTreeMap;

use super::params::{ParamId, ParamStore};
use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    ParamRow(ParamId, usize),
    /// Σ W·x over the terms, plus an optional bias vector.
    Affine(Vec<(ParamId, Var)>, Option<ParamId>),
    Add(Var, Var),
    Sum(Vec<Var>),
    Mul(Var, Var),
    Scale(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    OneMinus(Var),
    Concat(Vec<Var>),
    Dot(Var, Var),
    /// −log softmax(logits)[target], with the softmax kept for backward.
    NegLogSoftmax(Var, usize, Vec<T>),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Vec<T>,
    op: Op<T>,
}

/// Parameter gradients. Table rows touched through [`Tape::param_row`] are
/// kept sparse until [`Gradients::densify`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    dense: Vec<Vec<T>>,
    rows: BTreeMap<(ParamId, usize), Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &ParamStore<T>) -> Self {
        Self {
            dense: params.iter().map(|p| vec![T::zero(); p.data.len()]).collect(),
            rows: BTreeMap::new(),
        }
    }

    /// Folds sparse row gradients into the dense buffers.
    pub fn densify(&mut self, params: &ParamStore<T>) {
        for ((pid, row), g) in std::mem::take(&mut self.rows) {
            let cols = params.get(pid).cols;
            let dst = &mut self.dense[pid.index()][row * cols..(row + 1) * cols];
            dst.iter_mut().zip(&g).for_each(|(d, x)| *d = *d + *x);
        }
    }

    /// Adds `other` into `self` (both assumed densified or both sparse).
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (a, b) in self.dense.iter_mut().zip(&other.dense) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x = *x + *y);
        }
        for (key, g) in &other.rows {
            let dst = self
                .rows
                .entry(*key)
                .or_insert_with(|| vec![T::zero(); g.len()]);
            dst.iter_mut().zip(g).for_each(|(x, y)| *x = *x + *y);
        }
    }

    pub fn scale(&mut self, c: T) {
        for buf in self.dense.iter_mut().chain(self.rows.values_mut()) {
            buf.iter_mut().for_each(|x| *x = *x * c);
        }
    }

    pub fn norm(&self) -> T {
        self.dense
            .iter()
            .chain(self.rows.values())
            .flat_map(|b| b.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// Dense gradient of one parameter. Call [`Gradients::densify`] first.
    pub fn get(&self, pid: ParamId) -> &[T] {
        &self.dense[pid.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.dense
            .iter()
            .chain(self.rows.values())
            .all(|b| b.iter().all(|x| x.is_finite()))
    }
}

pub struct Tape<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(1024),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Vec<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, pid: ParamId) -> Var {
        let value = self.params.get(pid).data.clone();
        self.push(value, Op::Param(pid))
    }

    pub fn param_row(&mut self, pid: ParamId, row: usize) -> Var {
        let value = self.params.get(pid).row(row).to_vec();
        self.push(value, Op::ParamRow(pid, row))
    }

    pub fn affine(&mut self, terms: &[(ParamId, Var)], bias: Option<ParamId>) -> Var {
        let rows = match (terms.first(), bias) {
            (Some((pid, _)), _) => self.params.get(*pid).rows,
            (None, Some(b)) => self.params.get(b).data.len(),
            (None, None) => panic!("affine needs a term or a bias"),
        };
        let mut out = match bias {
            Some(b) => self.params.get(b).data.clone(),
            None => vec![T::zero(); rows],
        };
        for &(pid, x) in terms {
            let w = self.params.get(pid);
            let xv = &self.nodes[x.0].value;
            assert_eq!(w.cols, xv.len(), "shape mismatch in {}", w.name);
            assert_eq!(w.rows, rows, "row mismatch in {}", w.name);
            for (r, o) in out.iter_mut().enumerate() {
                let row = &w.data[r * w.cols..(r + 1) * w.cols];
                let mut acc = T::zero();
                for (a, b) in row.iter().zip(xv) {
                    acc = acc + *a * *b;
                }
                *o = *o + acc;
            }
        }
        self.push(out, Op::Affine(terms.to_vec(), bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Vec<T> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.len(), vb.len());
        va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect()
    }

    /// Elementwise sum; `parts` must be non-empty and equally sized.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let mut v = self.nodes[parts[0].0].value.clone();
        for p in &parts[1..] {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.len(), v.len());
            v.iter_mut().zip(pv).for_each(|(a, b)| *a = *a + *b);
        }
        self.push(v, Op::Sum(parts.to_vec()))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.nodes[a.0].value.iter().map(|&x| x * c).collect();
        self.push(v, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.iter().map(|&x| sigmoid(x)).collect();
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.iter().map(|&x| x.tanh()).collect();
        self.push(v, Op::Tanh(a))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.iter().map(|&x| T::one() - x).collect();
        self.push(v, Op::OneMinus(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let v = parts
            .iter()
            .flat_map(|p| self.nodes[p.0].value.iter().copied())
            .collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x * y).into_iter().fold(T::zero(), |s, x| s + x);
        self.push(vec![v], Op::Dot(a, b))
    }

    pub fn neg_log_softmax(&mut self, logits: Var, target: usize) -> Var {
        let probs = softmax(&self.nodes[logits.0].value);
        let lv = &self.nodes[logits.0].value;
        let loss = log_sum_exp(lv) - lv[target];
        self.push(vec![loss], Op::NegLogSoftmax(logits, target, probs))
    }

    /// Reverse pass from a scalar node, accumulating into `grads`.
    pub fn backward(&self, root: Var, grads: &mut Gradients<T>) {
        let mut g: Vec<Vec<T>> = vec![Vec::new(); root.0 + 1];
        g[root.0] = vec![T::one()];
        for idx in (0..=root.0).rev() {
            let gi = std::mem::take(&mut g[idx]);
            if gi.is_empty() {
                continue;
            }
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(pid) => {
                    let dst = &mut grads.dense[pid.index()];
                    dst.iter_mut().zip(&gi).for_each(|(d, x)| *d = *d + *x);
                }
                Op::ParamRow(pid, row) => {
                    let dst = grads
                        .rows
                        .entry((*pid, *row))
                        .or_insert_with(|| vec![T::zero(); gi.len()]);
                    dst.iter_mut().zip(&gi).for_each(|(d, x)| *d = *d + *x);
                }
                Op::Affine(terms, bias) => {
                    if let Some(b) = bias {
                        let dst = &mut grads.dense[b.index()];
                        dst.iter_mut().zip(&gi).for_each(|(d, x)| *d = *d + *x);
                    }
                    for &(pid, x) in terms {
                        let w = self.params.get(pid);
                        let xv = &self.nodes[x.0].value;
                        let gw = &mut grads.dense[pid.index()];
                        let mut gx = vec![T::zero(); w.cols];
                        for (r, &go) in gi.iter().enumerate() {
                            if go == T::zero() {
                                continue;
                            }
                            let wrow = &w.data[r * w.cols..(r + 1) * w.cols];
                            let grow = &mut gw[r * w.cols..(r + 1) * w.cols];
                            for c in 0..w.cols {
                                grow[c] = grow[c] + go * xv[c];
                                gx[c] = gx[c] + go * wrow[c];
                            }
                        }
                        add_into(&mut g, x, &gx);
                    }
                }
                Op::Add(a, b) => {
                    add_into(&mut g, *a, &gi);
                    add_into(&mut g, *b, &gi);
                }
                Op::Sum(parts) => {
                    for p in parts {
                        add_into(&mut g, *p, &gi);
                    }
                }
                Op::Mul(a, b) => {
                    let va = &self.nodes[a.0].value;
                    let vb = &self.nodes[b.0].value;
                    let ga: Vec<T> = gi.iter().zip(vb).map(|(&x, &y)| x * y).collect();
                    let gb: Vec<T> = gi.iter().zip(va).map(|(&x, &y)| x * y).collect();
                    add_into(&mut g, *a, &ga);
                    add_into(&mut g, *b, &gb);
                }
                Op::Scale(a, c) => {
                    let ga: Vec<T> = gi.iter().map(|&x| x * *c).collect();
                    add_into(&mut g, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<T> = gi
                        .iter()
                        .zip(&node.value)
                        .map(|(&x, &s)| x * s * (T::one() - s))
                        .collect();
                    add_into(&mut g, *a, &ga);
                }
                Op::Tanh(a) => {
                    let ga: Vec<T> = gi
                        .iter()
                        .zip(&node.value)
                        .map(|(&x, &t)| x * (T::one() - t * t))
                        .collect();
                    add_into(&mut g, *a, &ga);
                }
                Op::OneMinus(a) => {
                    let ga: Vec<T> = gi.iter().map(|&x| -x).collect();
                    add_into(&mut g, *a, &ga);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        add_into(&mut g, *p, &gi[off..off + len]);
                        off += len;
                    }
                }
                Op::Dot(a, b) => {
                    let s = gi[0];
                    let ga: Vec<T> = self.nodes[b.0].value.iter().map(|&y| s * y).collect();
                    let gb: Vec<T> = self.nodes[a.0].value.iter().map(|&x| s * x).collect();
                    add_into(&mut g, *a, &ga);
                    add_into(&mut g, *b, &gb);
                }
                Op::NegLogSoftmax(logits, target, probs) => {
                    let s = gi[0];
                    let gl: Vec<T> = probs
                        .iter()
                        .enumerate()
                        .map(|(i, &p)| {
                            let y = if i == *target { T::one() } else { T::zero() };
                            s * (p - y)
                        })
                        .collect();
                    add_into(&mut g, *logits, &gl);
                }
            }
        }
    }
}

fn add_into<T: Scalar>(g: &mut [Vec<T>], v: Var, delta: &[T]) {
    let slot = &mut g[v.0];
    if slot.is_empty() {
        *slot = delta.to_vec();
    } else {
        slot.iter_mut().zip(delta).for_each(|(a, b)| *a = *a + *b);
    }
}

pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).fold(T::zero(), |a, b| a + b).ln()
}

pub fn softmax<T: Scalar>(xs: &[T]) -> Vec<T> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|&x| (x - lse).exp()).collect()
}
