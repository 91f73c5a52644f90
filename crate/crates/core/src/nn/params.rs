use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named row-major matrix (vectors are `rows × 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, data: Vec<T>) -> ParamId {
        assert_eq!(data.len(), rows * cols, "{name}: data length");
        assert!(self.find(name).is_none(), "duplicate parameter {name}");
        self.params.push(Param {
            name: name.to_string(),
            rows,
            cols,
            data,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    rows: p.rows,
                    cols: p.cols,
                    data: p
                        .data
                        .iter()
                        .map(|&x| U::from(x).expect("finite parameter"))
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Architecture sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Node state size.
    pub hidden: usize,
    /// Sentence embedding size.
    pub embed_dim: usize,
    /// Message-passing rounds.
    pub steps: usize,
    /// Rows of the hashed entity-embedding table.
    pub entity_buckets: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 768,
            embed_dim: 768,
            steps: 3,
            entity_buckets: 4096,
        }
    }
}

impl ModelConfig {
    pub fn desk() -> Self {
        Self {
            hidden: 64,
            embed_dim: 64,
            ..Self::default()
        }
    }
}

/// Weights of one gated recurrent cell: update gate z, reset gate r and
/// candidate c, each with input weights `w_*`, state weights `u_*` and bias.
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_c: ParamId,
    pub u_c: ParamId,
    pub b_c: ParamId,
}

/// Handles to every parameter of the encoder-decoder.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub input_w: ParamId,
    pub input_b: ParamId,
    /// Entity-message projections indexed by `Role::index()`.
    pub role_proj: [ParamId; 3],
    pub entity_table: ParamId,
    pub sentence_cell: GruCell,
    pub entity_cell: GruCell,
    pub story_cell: GruCell,
    pub decoder_cell: GruCell,
    pub decoder_start: ParamId,
    pub pointer_w: ParamId,
}

/// Parameter layout: (name, rows, cols) in registration order.
pub fn layout(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let h = cfg.hidden;
    let mut out = vec![
        ("input.w".to_string(), h, cfg.embed_dim),
        ("input.b".to_string(), h, 1),
        ("role.subject".to_string(), h, h),
        ("role.object".to_string(), h, h),
        ("role.other".to_string(), h, h),
        ("entity.table".to_string(), cfg.entity_buckets, h),
    ];
    for (cell, input) in [("sentence", 3 * h), ("entity", h), ("story", h), ("decoder", h)] {
        for gate in ["z", "r", "c"] {
            out.push((format!("{cell}.w_{gate}"), h, input));
            out.push((format!("{cell}.u_{gate}"), h, h));
            out.push((format!("{cell}.b_{gate}"), h, 1));
        }
    }
    out.push(("decoder.start".to_string(), h, 1));
    out.push(("pointer.w".to_string(), h, h));
    out
}

impl ModelParams {
    /// Resolves handles by name; the store must follow [`layout`].
    pub fn lookup<T: Scalar>(store: &ParamStore<T>, cfg: &ModelConfig) -> Result<Self, String> {
        for (name, rows, cols) in layout(cfg) {
            let id = store.find(&name).ok_or_else(|| format!("missing parameter {name}"))?;
            let p = store.get(id);
            if (p.rows, p.cols) != (rows, cols) {
                return Err(format!(
                    "parameter {name} has shape {}x{}, expected {rows}x{cols}",
                    p.rows, p.cols
                ));
            }
        }
        let id = |n: &str| store.find(n).expect("checked above");
        let cell = |c: &str| GruCell {
            w_z: id(&format!("{c}.w_z")),
            u_z: id(&format!("{c}.u_z")),
            b_z: id(&format!("{c}.b_z")),
            w_r: id(&format!("{c}.w_r")),
            u_r: id(&format!("{c}.u_r")),
            b_r: id(&format!("{c}.b_r")),
            w_c: id(&format!("{c}.w_c")),
            u_c: id(&format!("{c}.u_c")),
            b_c: id(&format!("{c}.b_c")),
        };
        Ok(Self {
            input_w: id("input.w"),
            input_b: id("input.b"),
            role_proj: [id("role.subject"), id("role.object"), id("role.other")],
            entity_table: id("entity.table"),
            sentence_cell: cell("sentence"),
            entity_cell: cell("entity"),
            story_cell: cell("story"),
            decoder_cell: cell("decoder"),
            decoder_start: id("decoder.start"),
            pointer_w: id("pointer.w"),
        })
    }
}

/// Fresh parameters: matrices uniform in ±√(6/(fan_in+fan_out)), biases
/// zero except update-gate biases at +1. Table rows and the decoder start
/// vector use fan_in = fan_out = hidden.
pub fn init_params<T: Scalar, R: Rng>(cfg: &ModelConfig, rng: &mut R) -> ParamStore<T> {
    let mut store = ParamStore::new();
    for (name, rows, cols) in layout(cfg) {
        let is_bias = name.contains(".b_") || name == "input.b";
        let data: Vec<T> = if is_bias {
            let v = if name.ends_with(".b_z") { 1.0 } else { 0.0 };
            vec![T::from(v).unwrap(); rows * cols]
        } else {
            let (fan_in, fan_out) = if name == "entity.table" || name == "decoder.start" {
                (cfg.hidden, cfg.hidden)
            } else {
                (cols, rows)
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..rows * cols)
                .map(|_| T::from(rng.gen_range(-limit..limit)).unwrap())
                .collect()
        };
        store.add(&name, rows, cols, data);
    }
    store
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_follows_layout() {
        let cfg = ModelConfig {
            hidden: 8,
            embed_dim: 12,
            steps: 2,
            entity_buckets: 16,
        };
        let store: ParamStore<f32> = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let ids = ModelParams::lookup(&store, &cfg).unwrap();
        assert_eq!(store.get(ids.input_w).cols, 12);
        assert_eq!(store.get(ids.sentence_cell.w_z).cols, 24);
        assert!(store.get(ids.story_cell.b_z).data.iter().all(|&x| x == 1.0));
        assert!(store.get(ids.story_cell.b_r).data.iter().all(|&x| x == 0.0));
        let lim = (6.0f32 / 20.0).sqrt();
        assert!(store.get(ids.input_w).data.iter().all(|x| x.abs() <= lim));
    }

    #[test]
    fn lookup_rejects_wrong_shapes() {
        let cfg = ModelConfig {
            hidden: 4,
            embed_dim: 8,
            steps: 1,
            entity_buckets: 4,
        };
        let store: ParamStore<f64> = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let other = ModelConfig { embed_dim: 9, ..cfg };
        assert!(ModelParams::lookup(&store, &other).is_err());
    }
}
