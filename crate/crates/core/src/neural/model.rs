//! Parameter layout, batched forward and backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::embed::{self, EmbedOffsets, EmbeddingTables};
use crate::neural::gemm::{gemm, View};
use crate::neural::head::{activate, logit_loss, TaskHead};
use crate::neural::lstm::{dir_backward, dir_forward, DirCache, Dims, LstmDirection, LstmParams, Order, GATES};
use crate::neural::{EmbeddingInit, ModelKind, ModelSpec, SeqInput};
use crate::schema::NUM_CATEGORICAL;

/// Parameter family of a coordinate; the gradient checker samples each one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Embedding(usize),
    LstmWeight { dir: usize, gate: usize },
    LstmBias { dir: usize, gate: usize },
    HiddenWeight,
    HiddenBias,
    HeadWeight,
    HeadBias,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct LstmOffsets {
    w: [usize; 2],
    b: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub schema_hash: [u8; 32],
    params: Vec<f64>,
    blocks: Vec<Block>,
    emb: Option<EmbedOffsets>,
    lstm: Option<LstmOffsets>,
    ann: Option<(usize, usize)>,
    head: (usize, usize),
}

/// Activations kept for the backward pass.
pub(crate) struct Forward {
    x: Vec<f64>,
    lens: Vec<usize>,
    dims: Dims,
    lstm: Option<[DirCache; 2]>,
    xbar: Vec<f64>,
    hidden_pre: Vec<f64>,
    r: Vec<f64>,
    pub z: Vec<f64>,
}

impl Forward {
    /// Signs of every ReLU pre-activation; a change between two parameter
    /// settings means a kink lies between them.
    pub fn relu_signature(&self, model: &Model) -> Vec<bool> {
        let mut s: Vec<bool> = self.hidden_pre.iter().map(|&u| u > 0.0).collect();
        if model.spec.task == crate::types::Task::Los {
            s.extend(self.z.iter().map(|&z| z > 0.0));
        }
        s
    }
}

fn uniform(rng: &mut ChaCha8Rng, out: &mut [f64], a: f64) {
    for x in out {
        *x = rng.gen_range(-a..=a);
    }
}

impl Model {
    /// Lays out and initializes parameters. Embeddings draw from their own
    /// stream so every other block is identical across encodings.
    pub fn new(spec: ModelSpec, schema_hash: [u8; 32], seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::new();
        let mut next = 0;
        let mut add = |name: String, rows: usize, cols: usize| {
            let b = Block { name, offset: next, rows, cols };
            next += rows * cols;
            blocks.push(b.clone());
            b.offset
        };
        let d = spec.input_dim();
        let k = spec.output_dim();
        let emb = spec.uses_embeddings().then(|| {
            std::array::from_fn(|v| add(format!("embedding.{v}"), spec.vocab_sizes[v], spec.embed_dims[v]))
        });
        let (lstm, ann, r) = match spec.kind {
            ModelKind::BiLstm => {
                let h = spec.hidden;
                let mut o = LstmOffsets { w: [0; 2], b: [0; 2] };
                for (dir, name) in ["forward", "backward"].into_iter().enumerate() {
                    o.w[dir] = add(format!("lstm.{name}.w"), GATES * h, d + h);
                    o.b[dir] = add(format!("lstm.{name}.b"), GATES * h, 1);
                }
                (Some(o), None, 2 * h)
            }
            ModelKind::Ann => {
                let a = spec.ann_hidden;
                let w = add("hidden.w".into(), a, d);
                let b = add("hidden.b".into(), a, 1);
                (None, Some((w, b)), a)
            }
            ModelKind::Linear => (None, None, d),
        };
        let head = (add("head.w".into(), k, r), add("head.b".into(), k, 1));
        let mut params = vec![0.0; next];

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(o) = lstm {
            let h = spec.hidden;
            for dir in 0..2 {
                uniform(&mut rng, &mut params[o.w[dir]..o.w[dir] + GATES * h * (d + h)], 1.0 / (h as f64).sqrt());
                params[o.b[dir] + h..o.b[dir] + 2 * h].fill(1.0);
            }
        }
        if let Some((w, _)) = ann {
            uniform(&mut rng, &mut params[w..w + spec.ann_hidden * d], 1.0 / (d as f64).sqrt());
        }
        uniform(&mut rng, &mut params[head.0..head.0 + k * r], 1.0 / (r as f64).sqrt());

        if let Some(off) = emb {
            let mut erng = ChaCha8Rng::seed_from_u64(seed);
            erng.set_stream(1);
            for v in 0..NUM_CATEGORICAL {
                let (n, w) = (spec.vocab_sizes[v], spec.embed_dims[v]);
                let t = &mut params[off[v]..off[v] + n * w];
                match spec.embedding_init {
                    EmbeddingInit::Random => uniform(&mut erng, t, 0.05),
                    EmbeddingInit::Identity => {
                        for i in 0..n {
                            t[i * w + i] = 1.0;
                        }
                    }
                }
            }
        }
        Ok(Self {
            spec,
            schema_hash,
            params,
            blocks,
            emb,
            lstm,
            ann,
            head,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Coordinates the optimizer must leave alone.
    pub fn frozen_ranges(&self) -> Vec<std::ops::Range<usize>> {
        if !self.spec.freeze_embeddings {
            return Vec::new();
        }
        self.blocks.iter().filter(|b| b.name.starts_with("embedding.")).map(Block::range).collect()
    }

    pub fn family_of(&self, i: usize) -> Family {
        let blk = self.blocks.iter().find(|b| b.range().contains(&i)).expect("index inside a block");
        let row = (i - blk.offset) / blk.cols;
        let name = blk.name.as_str();
        let h = self.spec.hidden.max(1);
        match name {
            "hidden.w" => Family::HiddenWeight,
            "hidden.b" => Family::HiddenBias,
            "head.w" => Family::HeadWeight,
            "head.b" => Family::HeadBias,
            _ if name.starts_with("embedding.") => Family::Embedding(name["embedding.".len()..].parse().expect("numbered")),
            _ => {
                let dir = usize::from(name.starts_with("lstm.backward"));
                let gate = row / h;
                if name.ends_with(".w") {
                    Family::LstmWeight { dir, gate }
                } else {
                    Family::LstmBias { dir, gate }
                }
            }
        }
    }

    fn rep_dim(&self) -> usize {
        match self.spec.kind {
            ModelKind::BiLstm => 2 * self.spec.hidden,
            ModelKind::Ann => self.spec.ann_hidden,
            ModelKind::Linear => self.spec.input_dim(),
        }
    }

    /// Sets every output bias, e.g. to the mean training target for LoS.
    pub fn set_output_bias(&mut self, value: f64) {
        let k = self.spec.output_dim();
        self.params[self.head.1..self.head.1 + k].fill(value);
    }

    pub fn head(&self) -> TaskHead {
        let (k, r) = (self.spec.output_dim(), self.rep_dim());
        TaskHead {
            task: self.spec.task,
            w: self.params[self.head.0..self.head.0 + k * r].to_vec(),
            b: self.params[self.head.1..self.head.1 + k].to_vec(),
        }
    }

    pub fn lstm_params(&self) -> Option<LstmParams> {
        let o = self.lstm?;
        let (d, h) = (self.spec.input_dim(), self.spec.hidden);
        let dir = |i: usize| LstmDirection {
            w: self.params[o.w[i]..o.w[i] + GATES * h * (d + h)].to_vec(),
            b: self.params[o.b[i]..o.b[i] + GATES * h].to_vec(),
        };
        Some(LstmParams {
            input_dim: d,
            hidden: h,
            forward: dir(0),
            backward: dir(1),
        })
    }

    pub fn embedding_tables(&self) -> Option<EmbeddingTables> {
        let off = self.emb?;
        let mut t = EmbeddingTables::zeros(self.spec.vocab_sizes, self.spec.embed_dims);
        for v in 0..NUM_CATEGORICAL {
            let n = t.tables[v].len();
            t.tables[v].copy_from_slice(&self.params[off[v]..off[v] + n]);
        }
        Some(t)
    }

    /// Input vectors `x_t` of one sequence.
    pub fn inputs(&self, seq: &SeqInput<'_>) -> Vec<Vec<f64>> {
        let x = embed::assemble(&self.spec, &self.params, self.emb.as_ref(), std::slice::from_ref(seq), seq.len);
        x.chunks_exact(self.spec.input_dim()).map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn forward(&self, batch: &[SeqInput<'_>]) -> Forward {
        let spec = &self.spec;
        let b = batch.len();
        let lens: Vec<usize> = batch.iter().map(|s| s.len).collect();
        let t = lens.iter().copied().max().unwrap_or(0);
        assert!(b > 0 && lens.iter().all(|&l| l > 0), "batch of non-empty sequences");
        let d = spec.input_dim();
        let x = embed::assemble(spec, &self.params, self.emb.as_ref(), batch, t);
        let dims = Dims { t, b, d, h: spec.hidden };
        let r_dim = self.rep_dim();
        let mut r = vec![0.0; b * r_dim];
        let mut xbar = Vec::new();
        let mut hidden_pre = Vec::new();
        let mut lstm = None;
        match (spec.kind, self.lstm) {
            (ModelKind::BiLstm, Some(o)) => {
                let h = spec.hidden;
                let w = |i: usize| &self.params[o.w[i]..o.w[i] + GATES * h * (d + h)];
                let bias = |i: usize| &self.params[o.b[i]..o.b[i] + GATES * h];
                let f = dir_forward(w(0), bias(0), &x, &lens, dims, Order::Forward);
                let bw = dir_forward(w(1), bias(1), &x, &lens, dims, Order::Backward);
                for row in 0..b {
                    r[row * r_dim..row * r_dim + h].copy_from_slice(&f.last_h(dims)[row * h..(row + 1) * h]);
                    r[row * r_dim + h..(row + 1) * r_dim].copy_from_slice(&bw.last_h(dims)[row * h..(row + 1) * h]);
                }
                lstm = Some([f, bw]);
            }
            _ => {
                xbar = vec![0.0; b * d];
                for (row, &len) in lens.iter().enumerate() {
                    let acc = &mut xbar[row * d..(row + 1) * d];
                    for tau in 0..len {
                        for (a, v) in acc.iter_mut().zip(&x[(tau * b + row) * d..(tau * b + row + 1) * d]) {
                            *a += v;
                        }
                    }
                    let inv = 1.0 / len as f64;
                    acc.iter_mut().for_each(|a| *a *= inv);
                }
                if let Some((w, bias)) = self.ann {
                    let a = spec.ann_hidden;
                    hidden_pre = vec![0.0; b * a];
                    gemm(b, d, a, 1.0, View::rows(&xbar, 0, d), View::rows(&self.params, w, d).t(), 0.0, &mut hidden_pre, 0, a, 1);
                    for row in 0..b {
                        for j in 0..a {
                            hidden_pre[row * a + j] += self.params[bias + j];
                            r[row * a + j] = hidden_pre[row * a + j].max(0.0);
                        }
                    }
                } else {
                    r.copy_from_slice(&xbar);
                }
            }
        }
        let k = spec.output_dim();
        let mut z = vec![0.0; b * k];
        gemm(b, r_dim, k, 1.0, View::rows(&r, 0, r_dim), View::rows(&self.params, self.head.0, r_dim).t(), 0.0, &mut z, 0, k, 1);
        for row in 0..b {
            for j in 0..k {
                z[row * k + j] += self.params[self.head.1 + j];
            }
        }
        Forward {
            x,
            lens,
            dims,
            lstm,
            xbar,
            hidden_pre,
            r,
            z,
        }
    }

    /// Accumulates parameter gradients given `dL/dz`.
    pub(crate) fn backward(&self, batch: &[SeqInput<'_>], fw: &Forward, dz: &[f64], grad: &mut [f64]) {
        let spec = &self.spec;
        let Dims { t, b, d, .. } = fw.dims;
        let k = spec.output_dim();
        let r_dim = self.rep_dim();
        gemm(k, b, r_dim, 1.0, View::rows(dz, 0, k).t(), View::rows(&fw.r, 0, r_dim), 1.0, grad, self.head.0, r_dim, 1);
        for row in dz.chunks_exact(k) {
            for j in 0..k {
                grad[self.head.1 + j] += row[j];
            }
        }
        let mut dr = vec![0.0; b * r_dim];
        gemm(b, k, r_dim, 1.0, View::rows(dz, 0, k), View::rows(&self.params, self.head.0, r_dim), 0.0, &mut dr, 0, r_dim, 1);

        let want_dx = self.emb.is_some() && !spec.freeze_embeddings;
        let mut dx = if want_dx { vec![0.0; t * b * d] } else { Vec::new() };
        match (&fw.lstm, self.lstm) {
            (Some(caches), Some(o)) => {
                let h = spec.hidden;
                for dir in 0..2 {
                    let mut dh = vec![0.0; b * h];
                    for row in 0..b {
                        dh[row * h..(row + 1) * h].copy_from_slice(&dr[row * r_dim + dir * h..row * r_dim + (dir + 1) * h]);
                    }
                    let (wl, bl) = (GATES * h * (d + h), GATES * h);
                    let w = &self.params[o.w[dir]..o.w[dir] + wl];
                    let (lo, hi) = grad.split_at_mut(o.b[dir]);
                    let dw = &mut lo[o.w[dir]..o.w[dir] + wl];
                    let db = &mut hi[..bl];
                    dir_backward(w, &fw.x, &fw.lens, fw.dims, &caches[dir], &dh, dw, db, want_dx.then_some(dx.as_mut_slice()));
                }
            }
            _ => {
                let dxbar = if let Some((w, bias)) = self.ann {
                    let a = spec.ann_hidden;
                    let mut du = dr;
                    for (g, &u) in du.iter_mut().zip(&fw.hidden_pre) {
                        if u <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    gemm(a, b, d, 1.0, View::rows(&du, 0, a).t(), View::rows(&fw.xbar, 0, d), 1.0, grad, w, d, 1);
                    for row in du.chunks_exact(a) {
                        for j in 0..a {
                            grad[bias + j] += row[j];
                        }
                    }
                    if !want_dx {
                        return;
                    }
                    let mut dxbar = vec![0.0; b * d];
                    gemm(b, a, d, 1.0, View::rows(&du, 0, a), View::rows(&self.params, w, d), 0.0, &mut dxbar, 0, d, 1);
                    dxbar
                } else {
                    dr
                };
                if !want_dx {
                    return;
                }
                for (row, &len) in fw.lens.iter().enumerate() {
                    let inv = 1.0 / len as f64;
                    for tau in 0..len {
                        let dst = &mut dx[(tau * b + row) * d..(tau * b + row + 1) * d];
                        for (o, g) in dst.iter_mut().zip(&dxbar[row * d..(row + 1) * d]) {
                            *o = g * inv;
                        }
                    }
                }
            }
        }
        if let (true, Some(off)) = (want_dx, self.emb.as_ref()) {
            embed::scatter(spec, off, batch, &dx, grad);
        }
    }

    /// Mean loss over the batch outputs; adds its gradient into `grad`.
    pub fn loss_and_grad(&self, batch: &[SeqInput<'_>], targets: &[&[f64]], grad: &mut [f64]) -> Result<f64> {
        let (fw, dz, l) = self.loss_inner(batch, targets)?;
        self.backward(batch, &fw, &dz, grad);
        Ok(l)
    }

    pub fn loss(&self, batch: &[SeqInput<'_>], targets: &[&[f64]]) -> Result<f64> {
        Ok(self.loss_inner(batch, targets)?.2)
    }

    pub(crate) fn loss_inner(&self, batch: &[SeqInput<'_>], targets: &[&[f64]]) -> Result<(Forward, Vec<f64>, f64)> {
        let k = self.spec.output_dim();
        if targets.len() != batch.len() || targets.iter().any(|t| t.len() != k) {
            return Err(Error::Shape {
                what: "targets",
                expected: batch.len() * k,
                got: targets.iter().map(|t| t.len()).sum(),
            });
        }
        let y: Vec<f64> = targets.iter().flat_map(|t| t.iter().copied()).collect();
        let fw = self.forward(batch);
        let mut dz = vec![0.0; fw.z.len()];
        let scale = 1.0 / fw.z.len() as f64;
        let l = logit_loss(self.spec.task, &fw.z, &y, scale, &mut dz);
        Ok((fw, dz, l))
    }

    /// Outputs per sequence (1 value, or 25 for phenotyping), computed in
    /// length-sorted chunks of at most `max_tokens` padded steps.
    pub fn predict(&self, inputs: &[SeqInput<'_>], max_tokens: usize) -> Vec<Vec<f64>> {
        let k = self.spec.output_dim();
        let mut out = vec![Vec::new(); inputs.len()];
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.sort_by_key(|&i| inputs[i].len);
        for chunk in length_chunks(&order, |i| inputs[i].len, usize::MAX, max_tokens) {
            let batch: Vec<SeqInput<'_>> = chunk.iter().map(|&i| inputs[i]).collect();
            let fw = self.forward(&batch);
            for (j, &i) in chunk.iter().enumerate() {
                out[i] = fw.z[j * k..(j + 1) * k].iter().map(|&z| activate(self.spec.task, z)).collect();
            }
        }
        out
    }
}

/// Splits an index list (already grouped by length) into consecutive chunks
/// of at most `max_batch` items whose padded size `len_max × count` stays
/// within `max_tokens`; a single overlong sequence forms its own chunk.
pub(crate) fn length_chunks<'a, F: Fn(usize) -> usize>(order: &'a [usize], len: F, max_batch: usize, max_tokens: usize) -> Vec<&'a [usize]> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        let mut t_max = len(order[start]);
        while end < order.len() && end - start < max_batch {
            let t = t_max.max(len(order[end]));
            if t * (end - start + 1) > max_tokens {
                break;
            }
            t_max = t;
            end += 1;
        }
        out.push(&order[start..end]);
        start = end;
    }
    out
}
