//! From-scratch differentiable models: entity embeddings, mean-pooled linear
//! and one-hidden-layer baselines, a BiLSTM encoder, the four task heads,
//! losses, Adam, a finite-difference gradient checker and checkpoints.
//!
//! All arithmetic is `f64`. Parameters of a model live in one flat vector
//! partitioned into named blocks; gradients share that layout.

mod adam;
pub mod checkpoint;
mod embed;
mod gemm;
mod gradcheck;
mod head;
mod lstm;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phenotype::NUM_PHENOTYPES;
use crate::schema::{NUM_CATEGORICAL, NUM_NUMERICAL};
use crate::types::Task;

pub use adam::{Adam, AdamConfig};
pub use embed::{default_embed_dim, EmbeddingTables};
pub use gradcheck::{grad_check, GradCheckReport};
pub use head::{bce, head_forward, loss, TaskHead};
pub use lstm::{bilstm_forward, EncoderState, LstmDirection, LstmParams, GATE_NAMES};
pub use model::{Block, Family, Model};
pub use train::{train, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Logistic regression (linear regression for LoS) over the time-mean input.
    Linear,
    /// One ReLU hidden layer over the time-mean input.
    Ann,
    BiLstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Ohe,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableSet {
    All,
    NumericalOnly,
    CategoricalOnly,
}

impl VariableSet {
    pub fn numerical(self) -> bool {
        self != VariableSet::CategoricalOnly
    }

    pub fn categorical(self) -> bool {
        self != VariableSet::NumericalOnly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingInit {
    /// Uniform in ±0.05.
    Random,
    /// Identity rows; requires `embed_dims == vocab_sizes`.
    Identity,
}

/// Everything that fixes the parameter layout of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub task: Task,
    pub encoding: Encoding,
    pub variables: VariableSet,
    /// LSTM hidden width per direction.
    pub hidden: usize,
    pub ann_hidden: usize,
    pub vocab_sizes: [usize; NUM_CATEGORICAL],
    pub embed_dims: [usize; NUM_CATEGORICAL],
    pub embedding_init: EmbeddingInit,
    pub freeze_embeddings: bool,
}

impl ModelSpec {
    /// Defaults: H = 64, ANN width 64, d_v = min(50, ceil(vocab_v / 2)).
    pub fn new(kind: ModelKind, task: Task, encoding: Encoding, variables: VariableSet, vocab_sizes: [usize; NUM_CATEGORICAL]) -> Self {
        Self {
            kind,
            task,
            encoding,
            variables,
            hidden: 64,
            ann_hidden: 64,
            vocab_sizes,
            embed_dims: vocab_sizes.map(default_embed_dim),
            embedding_init: EmbeddingInit::Random,
            freeze_embeddings: false,
        }
    }

    /// Identity-initialized, frozen tables of width `vocab_v`.
    pub fn with_identity_embeddings(mut self) -> Self {
        self.embed_dims = self.vocab_sizes;
        self.embedding_init = EmbeddingInit::Identity;
        self.freeze_embeddings = true;
        self
    }

    pub fn uses_embeddings(&self) -> bool {
        self.encoding == Encoding::Embedding && self.variables.categorical()
    }

    /// Width of `x_t`.
    pub fn input_dim(&self) -> usize {
        let num = if self.variables.numerical() { NUM_NUMERICAL } else { 0 };
        let cat = if !self.variables.categorical() {
            0
        } else if self.encoding == Encoding::Embedding {
            self.embed_dims.iter().sum()
        } else {
            self.vocab_sizes.iter().sum()
        };
        num + cat
    }

    /// Outputs per instance.
    pub fn output_dim(&self) -> usize {
        match self.task {
            Task::Phenotyping => NUM_PHENOTYPES,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_sizes.iter().any(|&v| v == 0) {
            return Err(Error::Config("vocabulary sizes must be positive".into()));
        }
        if self.uses_embeddings() && self.embed_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("embedding widths must be positive".into()));
        }
        if self.embedding_init == EmbeddingInit::Identity && self.embed_dims != self.vocab_sizes {
            return Err(Error::Config("identity embeddings need width equal to vocabulary size".into()));
        }
        if self.kind == ModelKind::BiLstm && self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.kind == ModelKind::Ann && self.ann_hidden == 0 {
            return Err(Error::Config("ANN width must be positive".into()));
        }
        if self.input_dim() == 0 {
            return Err(Error::Config("model has no input columns".into()));
        }
        Ok(())
    }
}

/// One input sequence: `len` rows of the hourly grid.
#[derive(Debug, Clone, Copy)]
pub struct SeqInput<'a> {
    /// `[len × 13]`, row-major.
    pub numeric: &'a [f64],
    /// `[len × 7]`, row-major.
    pub categorical: &'a [u32],
    pub len: usize,
}

impl<'a> SeqInput<'a> {
    pub fn new(numeric: &'a [f64], categorical: &'a [u32]) -> Result<Self> {
        let len = numeric.len() / NUM_NUMERICAL;
        if len == 0 || numeric.len() != len * NUM_NUMERICAL || categorical.len() != len * NUM_CATEGORICAL {
            return Err(Error::Shape {
                what: "sequence input",
                expected: len.max(1) * NUM_CATEGORICAL,
                got: categorical.len(),
            });
        }
        Ok(Self { numeric, categorical, len })
    }

    /// Rows `[start, end)` of an hourly grid.
    pub fn window(grid: &'a crate::types::HourlyGrid, window: &std::ops::Range<usize>) -> Self {
        Self {
            numeric: &grid.numeric[window.start * NUM_NUMERICAL..window.end * NUM_NUMERICAL],
            categorical: &grid.categorical[window.start * NUM_CATEGORICAL..window.end * NUM_CATEGORICAL],
            len: window.len(),
        }
    }
}

/// Training target, one per instance: 1 value, or 25 for phenotyping.
pub type Target = Vec<f64>;
