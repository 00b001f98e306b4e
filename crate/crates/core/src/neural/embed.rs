//! Entity embeddings and assembly of `x_t = [Num_t ; enc(Cat_t)]`.

use crate::neural::{Encoding, ModelSpec, SeqInput};
use crate::schema::{NUM_CATEGORICAL, NUM_NUMERICAL};

/// `min(50, ceil(vocab / 2))`, at least 1.
pub fn default_embed_dim(vocab: usize) -> usize {
    vocab.div_ceil(2).clamp(1, 50)
}

/// Standalone tables `U_v [vocab_v × d_v]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTables {
    pub dims: [usize; NUM_CATEGORICAL],
    pub tables: Vec<Vec<f64>>,
}

impl EmbeddingTables {
    pub fn zeros(vocab: [usize; NUM_CATEGORICAL], dims: [usize; NUM_CATEGORICAL]) -> Self {
        Self {
            dims,
            tables: (0..NUM_CATEGORICAL).map(|v| vec![0.0; vocab[v] * dims[v]]).collect(),
        }
    }

    pub fn identity(vocab: [usize; NUM_CATEGORICAL]) -> Self {
        let mut t = Self::zeros(vocab, vocab);
        for (v, &n) in vocab.iter().enumerate() {
            for i in 0..n {
                t.tables[v][i * n + i] = 1.0;
            }
        }
        t
    }

    pub fn vocab(&self, v: usize) -> usize {
        self.tables[v].len() / self.dims[v].max(1)
    }

    /// Concatenation of the selected rows. Panics on an index outside the
    /// vocabulary: that can only come from a vocabulary built elsewhere.
    pub fn embed(&self, cat: &[u32]) -> Vec<f64> {
        assert_eq!(cat.len(), NUM_CATEGORICAL, "one index per categorical variable");
        let mut out = Vec::with_capacity(self.dims.iter().sum());
        for (v, &i) in cat.iter().enumerate() {
            let d = self.dims[v];
            let i = i as usize;
            assert!(i < self.vocab(v), "category index {i} outside vocabulary of size {}", self.vocab(v));
            out.extend_from_slice(&self.tables[v][i * d..(i + 1) * d]);
        }
        out
    }

    /// Gradient of `g · embed(cat)` with respect to every table entry.
    pub fn embed_grad(&self, cat: &[u32], g: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.tables.iter().map(|t| vec![0.0; t.len()]).collect();
        let mut col = 0;
        for (v, &i) in cat.iter().enumerate() {
            let d = self.dims[v];
            let i = i as usize;
            for j in 0..d {
                out[v][i * d + j] += g[col + j];
            }
            col += d;
        }
        out
    }
}

/// Where each embedding table lives in the flat parameter vector.
pub(crate) type EmbedOffsets = [usize; NUM_CATEGORICAL];

/// Fills `x [T][B][D]` for a batch. Padded steps stay zero.
pub(crate) fn assemble(spec: &ModelSpec, params: &[f64], emb: Option<&EmbedOffsets>, batch: &[SeqInput<'_>], t_max: usize) -> Vec<f64> {
    let d = spec.input_dim();
    let b = batch.len();
    let mut x = vec![0.0; t_max * b * d];
    let use_num = spec.variables.numerical();
    let use_cat = spec.variables.categorical();
    for (r, seq) in batch.iter().enumerate() {
        for tau in 0..seq.len {
            let row = &mut x[(tau * b + r) * d..(tau * b + r + 1) * d];
            let mut col = 0;
            if use_num {
                row[..NUM_NUMERICAL].copy_from_slice(&seq.numeric[tau * NUM_NUMERICAL..(tau + 1) * NUM_NUMERICAL]);
                col = NUM_NUMERICAL;
            }
            if !use_cat {
                continue;
            }
            let cats = &seq.categorical[tau * NUM_CATEGORICAL..(tau + 1) * NUM_CATEGORICAL];
            for (v, &c) in cats.iter().enumerate() {
                let c = c as usize;
                let vocab = spec.vocab_sizes[v];
                assert!(c < vocab, "category index {c} outside vocabulary of size {vocab}");
                match (spec.encoding, emb) {
                    (Encoding::Embedding, Some(off)) => {
                        let w = spec.embed_dims[v];
                        let src = off[v] + c * w;
                        row[col..col + w].copy_from_slice(&params[src..src + w]);
                        col += w;
                    }
                    _ => {
                        row[col + c] = 1.0;
                        col += vocab;
                    }
                }
            }
        }
    }
    x
}

/// Adds the categorical columns of `dx` into the embedding rows they came from.
pub(crate) fn scatter(spec: &ModelSpec, off: &EmbedOffsets, batch: &[SeqInput<'_>], dx: &[f64], grad: &mut [f64]) {
    let d = spec.input_dim();
    let b = batch.len();
    let base = if spec.variables.numerical() { NUM_NUMERICAL } else { 0 };
    for (r, seq) in batch.iter().enumerate() {
        for tau in 0..seq.len {
            let row = &dx[(tau * b + r) * d..(tau * b + r + 1) * d];
            let cats = &seq.categorical[tau * NUM_CATEGORICAL..(tau + 1) * NUM_CATEGORICAL];
            let mut col = base;
            for (v, &c) in cats.iter().enumerate() {
                let w = spec.embed_dims[v];
                let dst = off[v] + c as usize * w;
                for j in 0..w {
                    grad[dst + j] += row[col + j];
                }
                col += w;
            }
        }
    }
}
