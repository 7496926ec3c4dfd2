//! Self-attentive next-item model.
//!
//! Architecture (per block, pre-norm on the query path):
//!
//! ```text
//! x    = item_emb[ctx] * sqrt(d) + pos_emb[slot]     (dropout, padding rows zeroed)
//! q    = LN_attn(x)
//! x    = q + MHA(q, x, x)                           (causal, padding keys masked)
//! x    = LN_ffn(x)
//! x    = x + W2 · relu(W1 · x + b1) + b2            (dropout after each linear)
//! out  = LN_final(x)                                (padding rows zeroed)
//! ```
//!
//! Contexts are right-aligned in the `max_len` window, so a context without
//! padding gives exactly the same states as the same context left-padded to
//! `max_len`. Items are scored by dot product with their (tied) embedding.

mod checkpoint;
mod optim;
mod tape;
pub mod tensor;

use rand::Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{Adam, AdamConfig};
pub use tape::{Tape, Var};
pub use tensor::Matrix;

use crate::data::{ItemId, PAD};
use crate::loss::TrainingExample;
use crate::rng::{self, Purpose, StreamRng};
use crate::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-8;
const PARAMS_PER_BLOCK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
    pub num_items: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(num_items: usize) -> Self {
        ModelConfig {
            hidden_dim: 50,
            num_blocks: 2,
            num_heads: 1,
            max_len: 50,
            dropout_rate: 0.2,
            num_items,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be >= 1".into());
        }
        if self.num_heads == 0 || !self.hidden_dim.is_multiple_of(self.num_heads) {
            return bad(format!(
                "hidden_dim {} not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            ));
        }
        if self.max_len == 0 {
            return bad("max_len must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.num_items == 0 {
            return bad("num_items must be >= 1".into());
        }
        Ok(())
    }
}

/// Index of each tensor in [`ModelParams::tensors`]. The order is also the
/// on-disk checkpoint order.
#[derive(Debug, Clone, Copy)]
struct BlockIds {
    attn_gamma: usize,
    attn_beta: usize,
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ffn_gamma: usize,
    ffn_beta: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl BlockIds {
    fn new(block: usize) -> Self {
        let b = 2 + block * PARAMS_PER_BLOCK;
        BlockIds {
            attn_gamma: b,
            attn_beta: b + 1,
            wq: b + 2,
            bq: b + 3,
            wk: b + 4,
            bk: b + 5,
            wv: b + 6,
            bv: b + 7,
            wo: b + 8,
            bo: b + 9,
            ffn_gamma: b + 10,
            ffn_beta: b + 11,
            w1: b + 12,
            b1: b + 13,
            w2: b + 14,
            b2: b + 15,
        }
    }
}

pub const ITEM_EMB: usize = 0;
pub const POS_EMB: usize = 1;

const BLOCK_NAMES: [&str; PARAMS_PER_BLOCK] = [
    "attn_norm.gamma",
    "attn_norm.beta",
    "attn.wq",
    "attn.bq",
    "attn.wk",
    "attn.bk",
    "attn.wv",
    "attn.bv",
    "attn.wo",
    "attn.bo",
    "ffn_norm.gamma",
    "ffn_norm.beta",
    "ffn.w1",
    "ffn.b1",
    "ffn.w2",
    "ffn.b2",
];

/// Names of the parameter tensors in storage order.
pub fn param_names(num_blocks: usize) -> Vec<String> {
    let mut names = vec!["item_embeddings".to_string(), "positional_embeddings".to_string()];
    for b in 0..num_blocks {
        names.extend(BLOCK_NAMES.iter().map(|n| format!("block{b}.{n}")));
    }
    names.push("final_norm.gamma".into());
    names.push("final_norm.beta".into());
    names
}

/// Model state at one point in time: per-position hidden states and the
/// attention matrices of every block and head (block-major).
#[derive(Debug, Clone)]
pub struct Trace {
    pub hidden: Matrix,
    pub attention: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: Vec<Matrix>,
}

impl ModelParams {
    /// Embeddings and weight matrices are drawn from N(0, 1/d) (standard
    /// deviation `1/sqrt(d)`); biases start at zero and layer-norm scales at
    /// one. The padding row of the item table is zero.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.hidden_dim;
        let std = 1.0 / (d as f64).sqrt();
        let normal = rand_distr::Normal::new(0.0, std).expect("finite std");
        let mut r = rng::stream(config.seed, Purpose::Init, &[]);
        let random = |rows: usize, cols: usize, r: &mut StreamRng| {
            Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.sample(normal)).collect())
        };
        let mut tensors = Vec::new();
        let mut items = random(config.num_items + 1, d, &mut r);
        items.row_mut(0).fill(0.0);
        tensors.push(items);
        tensors.push(random(config.max_len, d, &mut r));
        for _ in 0..config.num_blocks {
            for name in BLOCK_NAMES {
                let t = if name.ends_with("gamma") {
                    Matrix::filled(1, d, 1.0)
                } else if name.ends_with("beta") || name.contains(".b") {
                    Matrix::zeros(1, d)
                } else {
                    random(d, d, &mut r)
                };
                tensors.push(t);
            }
        }
        tensors.push(Matrix::filled(1, d, 1.0));
        tensors.push(Matrix::zeros(1, d));
        Ok(ModelParams {
            config: config.clone(),
            tensors,
        })
    }

    pub fn from_tensors(config: ModelConfig, tensors: Vec<Matrix>) -> Result<Self> {
        config.validate()?;
        let expected = Self::shapes(&config);
        if tensors.len() != expected.len()
            || tensors.iter().zip(&expected).any(|(t, &s)| t.shape() != s)
        {
            return Err(Error::InvalidConfig("tensor shapes do not match config".into()));
        }
        Ok(ModelParams { config, tensors })
    }

    pub fn shapes(config: &ModelConfig) -> Vec<(usize, usize)> {
        let d = config.hidden_dim;
        let mut s = vec![(config.num_items + 1, d), (config.max_len, d)];
        for _ in 0..config.num_blocks {
            for name in BLOCK_NAMES {
                let is_vec = name.ends_with("gamma") || name.ends_with("beta") || name.contains(".b");
                s.push(if is_vec { (1, d) } else { (d, d) });
            }
        }
        s.push((1, d));
        s.push((1, d));
        s
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn zero_grads(&self) -> Vec<Matrix> {
        self.tensors
            .iter()
            .map(|t| Matrix::zeros(t.rows(), t.cols()))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    fn check_context(&self, context: &[ItemId]) -> Result<()> {
        if context.is_empty() {
            return Err(Error::InvalidArgument("empty context".into()));
        }
        if context.len() > self.config.max_len {
            return Err(Error::InvalidArgument(format!(
                "context length {} exceeds max_len {}",
                context.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = context.iter().find(|&&i| i as usize > self.config.num_items) {
            return Err(Error::ItemOutOfRange {
                id: bad,
                num_items: self.config.num_items,
            });
        }
        Ok(())
    }

    fn dropout(&self, tape: &mut Tape, x: Var, train: bool, r: &mut StreamRng) -> Var {
        let p = self.config.dropout_rate;
        if !train || p == 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let n = tape.value(x).len();
        let mask = (0..n)
            .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        tape.mul_const(x, mask)
    }

    /// Records the forward pass on `tape`; returns the hidden-state node and
    /// the attention nodes.
    pub fn forward_on(
        &self,
        tape: &mut Tape,
        context: &[ItemId],
        train: bool,
        r: &mut StreamRng,
    ) -> Result<(Var, Vec<Var>)> {
        self.check_context(context)?;
        let cfg = &self.config;
        let n = context.len();
        let d = cfg.hidden_dim;
        let dh = d / cfg.num_heads;
        let offset = cfg.max_len - n;

        let real: Vec<bool> = context.iter().map(|&i| i != PAD).collect();
        let row_mask: Vec<f64> = real
            .iter()
            .flat_map(|&k| std::iter::repeat_n(if k { 1.0 } else { 0.0 }, d))
            .collect();
        let allowed: Vec<bool> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| j <= i && real[j])
            .collect();
        let slots: Vec<u32> = (offset..offset + n).map(|s| s as u32).collect();

        let emb = tape.gather(ITEM_EMB, context, (d as f64).sqrt(), true);
        let pos = tape.gather(POS_EMB, &slots, 1.0, false);
        let mut x = tape.add(emb, pos);
        x = self.dropout(tape, x, train, r);
        x = tape.mul_const(x, row_mask.clone());

        let mut attention = Vec::new();
        for b in 0..cfg.num_blocks {
            let ids = BlockIds::new(b);
            let p = |tape: &mut Tape, id| tape.param(id);
            let (g, be) = (p(tape, ids.attn_gamma), p(tape, ids.attn_beta));
            let q_in = tape.layer_norm(x, g, be, LAYER_NORM_EPS);
            let proj = |tape: &mut Tape, input: Var, w: usize, bias: usize| {
                let wv = tape.param(w);
                let bv = tape.param(bias);
                let y = tape.matmul(input, wv);
                tape.add_bias(y, bv)
            };
            let q = proj(tape, q_in, ids.wq, ids.bq);
            let k = proj(tape, x, ids.wk, ids.bk);
            let v = proj(tape, x, ids.wv, ids.bv);
            let mut heads = Vec::with_capacity(cfg.num_heads);
            for h in 0..cfg.num_heads {
                let (qh, kh, vh) = if cfg.num_heads == 1 {
                    (q, k, v)
                } else {
                    (
                        tape.slice_cols(q, h * dh, dh),
                        tape.slice_cols(k, h * dh, dh),
                        tape.slice_cols(v, h * dh, dh),
                    )
                };
                let s = tape.matmul_bt(qh, kh);
                let s = tape.scale(s, 1.0 / (dh as f64).sqrt());
                let a = tape.masked_softmax(s, &allowed);
                attention.push(a);
                let a = self.dropout(tape, a, train, r);
                heads.push(tape.matmul(a, vh));
            }
            let o = if heads.len() == 1 {
                heads[0]
            } else {
                tape.concat_cols(&heads)
            };
            let o = proj(tape, o, ids.wo, ids.bo);
            x = tape.add(q_in, o);

            let (g, be) = (p(tape, ids.ffn_gamma), p(tape, ids.ffn_beta));
            x = tape.layer_norm(x, g, be, LAYER_NORM_EPS);
            let f = proj(tape, x, ids.w1, ids.b1);
            let f = self.dropout(tape, f, train, r);
            let f = tape.relu(f);
            let f = proj(tape, f, ids.w2, ids.b2);
            let f = self.dropout(tape, f, train, r);
            x = tape.add(f, x);
            x = tape.mul_const(x, row_mask.clone());
        }
        let last = self.tensors.len();
        let (g, be) = (tape.param(last - 2), tape.param(last - 1));
        x = tape.layer_norm(x, g, be, LAYER_NORM_EPS);
        x = tape.mul_const(x, row_mask);
        Ok((x, attention))
    }

    /// Per-position hidden states (`len x hidden_dim`). Dropout is applied
    /// only when `train` is set, drawing from `r`.
    pub fn forward(&self, context: &[ItemId], train: bool, r: &mut StreamRng) -> Result<Matrix> {
        Ok(self.forward_traced(context, train, r)?.hidden)
    }

    pub fn forward_traced(&self, context: &[ItemId], train: bool, r: &mut StreamRng) -> Result<Trace> {
        let mut tape = Tape::new(&self.tensors);
        let (h, att) = self.forward_on(&mut tape, context, train, r)?;
        Ok(Trace {
            hidden: tape.value(h).clone(),
            attention: att.into_iter().map(|a| tape.value(a).clone()).collect(),
        })
    }

    /// Evaluation-mode hidden state at the last position of `context`. Longer
    /// contexts are truncated to their most recent `max_len` items.
    pub fn final_hidden(&self, context: &[ItemId]) -> Result<Vec<f64>> {
        let ctx = &context[context.len().saturating_sub(self.config.max_len)..];
        // eval mode never draws from the stream
        let mut r = rng::stream(0, Purpose::Dropout, &[]);
        let h = self.forward(ctx, false, &mut r)?;
        Ok(h.row(h.rows() - 1).to_vec())
    }

    /// `score[j] = dot(hidden, item_emb[items[j]])`.
    pub fn score(&self, hidden: &[f64], items: &[ItemId]) -> Result<Vec<f64>> {
        let table = &self.tensors[ITEM_EMB];
        if hidden.len() != table.cols() {
            return Err(Error::InvalidArgument(format!(
                "hidden state has {} entries, expected {}",
                hidden.len(),
                table.cols()
            )));
        }
        items
            .iter()
            .map(|&i| {
                if i == PAD {
                    Err(Error::InvalidArgument("padding item 0 cannot be scored".into()))
                } else if i as usize > self.config.num_items {
                    Err(Error::ItemOutOfRange {
                        id: i,
                        num_items: self.config.num_items,
                    })
                } else {
                    Ok(tensor::dot(hidden, table.row(i as usize)))
                }
            })
            .collect()
    }

    /// Records forward pass plus the weighted BCE of a training example,
    /// multiplied by `scale`.
    pub fn loss_on(
        &self,
        tape: &mut Tape,
        example: &TrainingExample,
        scale: f64,
        train: bool,
        r: &mut StreamRng,
    ) -> Result<Var> {
        let t = &example.targets;
        if let Some(&(_, bad)) = t
            .pairs
            .iter()
            .find(|&&(_, i)| i == PAD || i as usize > self.config.num_items)
        {
            return Err(Error::ItemOutOfRange {
                id: bad,
                num_items: self.config.num_items,
            });
        }
        let (h, _) = self.forward_on(tape, &example.context, train, r)?;
        let logits = tape.pick(h, ITEM_EMB, &t.pairs);
        let l = tape.bce(logits, &t.labels, &t.weights);
        Ok(if scale == 1.0 { l } else { tape.scale(l, scale) })
    }

    /// Loss of one example; its gradient (times `scale`) is added to `grads`.
    pub fn accumulate_gradients(
        &self,
        example: &TrainingExample,
        scale: f64,
        train: bool,
        r: &mut StreamRng,
        grads: &mut [Matrix],
    ) -> Result<f64> {
        let mut tape = Tape::new(&self.tensors);
        let root = self.loss_on(&mut tape, example, scale, train, r)?;
        tape.backward(root, grads)
    }
}
