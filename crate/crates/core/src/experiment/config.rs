//! Experiment configuration: a flat `key = value` file where every field is
//! addressable, with command-line overrides applied on top.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::TestKind;
use crate::neural::{AdamConfig, Encoding, ModelKind, TrainConfig, VariableSet};
use crate::preprocess::BinPolicy;
use crate::types::{Horizon, Task};

/// The five experiment blocks. Both mortality horizons share one cohort and
/// one fold assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentTask {
    Mortality24,
    Mortality48,
    Los,
    Phenotyping,
    Decompensation,
}

impl ExperimentTask {
    pub const ALL: [ExperimentTask; 5] = [
        ExperimentTask::Mortality24,
        ExperimentTask::Mortality48,
        ExperimentTask::Los,
        ExperimentTask::Phenotyping,
        ExperimentTask::Decompensation,
    ];

    pub fn task(self) -> Task {
        match self {
            Self::Mortality24 | Self::Mortality48 => Task::Mortality,
            Self::Los => Task::Los,
            Self::Phenotyping => Task::Phenotyping,
            Self::Decompensation => Task::Decompensation,
        }
    }

    pub fn horizon(self) -> Option<Horizon> {
        match self {
            Self::Mortality24 => Some(Horizon::H24),
            Self::Mortality48 => Some(Horizon::H48),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mortality24 => "mortality24",
            Self::Mortality48 => "mortality48",
            Self::Los => "los",
            Self::Phenotyping => "phenotyping",
            Self::Decompensation => "decompensation",
        }
    }
}

impl FromStr for ExperimentTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task `{s}` (expected mortality24, mortality48, los, phenotyping or decompensation)")))
    }
}

impl fmt::Display for ExperimentTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn model_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Linear => "lr",
        ModelKind::Ann => "ann",
        ModelKind::BiLstm => "bilstm",
    }
}

pub fn parse_model(s: &str) -> Result<ModelKind> {
    match s {
        "lr" | "linear" => Ok(ModelKind::Linear),
        "ann" => Ok(ModelKind::Ann),
        "bilstm" => Ok(ModelKind::BiLstm),
        _ => Err(Error::Config(format!("unknown model `{s}` (expected lr, ann or bilstm)"))),
    }
}

pub fn encoding_name(e: Encoding) -> &'static str {
    match e {
        Encoding::Ohe => "ohe",
        Encoding::Embedding => "embedding",
    }
}

pub fn parse_encoding(s: &str) -> Result<Encoding> {
    match s {
        "ohe" => Ok(Encoding::Ohe),
        "embedding" => Ok(Encoding::Embedding),
        _ => Err(Error::Config(format!("unknown encoding `{s}` (expected ohe or embedding)"))),
    }
}

pub fn variables_name(v: VariableSet) -> &'static str {
    match v {
        VariableSet::All => "all",
        VariableSet::NumericalOnly => "numerical_only",
        VariableSet::CategoricalOnly => "categorical_only",
    }
}

pub fn parse_variables(s: &str) -> Result<VariableSet> {
    match s {
        "all" => Ok(VariableSet::All),
        "numerical_only" => Ok(VariableSet::NumericalOnly),
        "categorical_only" => Ok(VariableSet::CategoricalOnly),
        _ => Err(Error::Config(format!("unknown variable set `{s}` (expected all, numerical_only or categorical_only)"))),
    }
}

/// Model and optimizer settings. Defaults are the canonical configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub hidden: usize,
    pub ann_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_batch_tokens: usize,
    pub adam: AdamConfig,
    /// Identity-initialized frozen embeddings of width `vocab_v`; turns the
    /// embedding path into an exact one-hot encoder.
    pub identity_embeddings: bool,
    /// Train-fold z-scoring of the numerical channels.
    pub zscore: bool,
    pub max_hours: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: 64,
            ann_hidden: 64,
            epochs: t.epochs,
            batch_size: t.batch_size,
            max_batch_tokens: t.max_batch_tokens,
            adam: t.adam,
            identity_embeddings: false,
            zscore: false,
            max_hours: BinPolicy::default().max_hours,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: ExperimentTask,
    pub model: ModelKind,
    pub encoding: Encoding,
    pub variables: VariableSet,
    pub folds: usize,
    pub seed: u64,
    pub hyper: Hyperparameters,
    pub test: TestKind,
    pub data_dir: PathBuf,
    /// Defaults to `<data_dir>/phenotype_map.csv` when unset.
    pub phenotype_map: Option<PathBuf>,
    /// Optional schema TOML overriding the canonical schema.
    pub schema: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: ExperimentTask::Mortality24,
            model: ModelKind::BiLstm,
            encoding: Encoding::Embedding,
            variables: VariableSet::All,
            folds: 5,
            seed: 42,
            hyper: Hyperparameters::default(),
            test: TestKind::Welch,
            data_dir: PathBuf::from("data"),
            phenotype_map: None,
            schema: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` cannot be `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` must be true or false, not `{value}`"))),
    }
}

impl ExperimentConfig {
    /// Every key accepted by [`set`](Self::set), in echo order.
    pub const KEYS: [&'static str; 23] = [
        "task",
        "model",
        "encoding",
        "variables",
        "folds",
        "seed",
        "hidden",
        "ann_hidden",
        "epochs",
        "batch_size",
        "max_batch_tokens",
        "learning_rate",
        "beta1",
        "beta2",
        "adam_epsilon",
        "identity_embeddings",
        "zscore",
        "max_hours",
        "t_test",
        "data_dir",
        "phenotype_map",
        "schema",
        "out_dir",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let h = &mut self.hyper;
        match key.trim() {
            "task" => self.task = value.parse()?,
            "model" => self.model = parse_model(value)?,
            "encoding" => self.encoding = parse_encoding(value)?,
            "variables" => self.variables = parse_variables(value)?,
            "folds" => self.folds = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "hidden" => h.hidden = num(key, value)?,
            "ann_hidden" => h.ann_hidden = num(key, value)?,
            "epochs" => h.epochs = num(key, value)?,
            "batch_size" => h.batch_size = num(key, value)?,
            "max_batch_tokens" => h.max_batch_tokens = num(key, value)?,
            "learning_rate" => h.adam.lr = num(key, value)?,
            "beta1" => h.adam.beta1 = num(key, value)?,
            "beta2" => h.adam.beta2 = num(key, value)?,
            "adam_epsilon" => h.adam.eps = num(key, value)?,
            "identity_embeddings" => h.identity_embeddings = flag(key, value)?,
            "zscore" => h.zscore = flag(key, value)?,
            "max_hours" => h.max_hours = num(key, value)?,
            "t_test" => {
                self.test = match value {
                    "welch" => TestKind::Welch,
                    "paired" => TestKind::Paired,
                    _ => return Err(Error::Config(format!("`t_test` must be welch or paired, not `{value}`"))),
                }
            }
            "data_dir" => self.data_dir = PathBuf::from(value),
            "phenotype_map" => self.phenotype_map = (!value.is_empty()).then(|| PathBuf::from(value)),
            "schema" => self.schema = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are ignored;
    /// a key given twice keeps the later value.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("configuration error: "))))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        for (k, v) in [
            ("hidden", h.hidden),
            ("ann_hidden", h.ann_hidden),
            ("epochs", h.epochs),
            ("batch_size", h.batch_size),
            ("max_batch_tokens", h.max_batch_tokens),
            ("max_hours", h.max_hours),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if self.task.horizon().is_some_and(|hz| hz.hours() > h.max_hours) {
            return Err(Error::Config("max_hours is shorter than the mortality window".into()));
        }
        if h.identity_embeddings && self.encoding != Encoding::Embedding {
            return Err(Error::Config("identity_embeddings requires encoding = embedding".into()));
        }
        h.adam.validate()
    }

    /// The configuration as `key = value` pairs in [`KEYS`](Self::KEYS)
    /// order. `out_dir` is left out so reports do not depend on where they
    /// are written.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.pairs().into_iter().filter(|(k, _)| k != "out_dir").collect()
    }

    fn pairs(&self) -> Vec<(String, String)> {
        let h = &self.hyper;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values = [
            self.task.to_string(),
            model_name(self.model).into(),
            encoding_name(self.encoding).into(),
            variables_name(self.variables).into(),
            self.folds.to_string(),
            self.seed.to_string(),
            h.hidden.to_string(),
            h.ann_hidden.to_string(),
            h.epochs.to_string(),
            h.batch_size.to_string(),
            h.max_batch_tokens.to_string(),
            h.adam.lr.to_string(),
            h.adam.beta1.to_string(),
            h.adam.beta2.to_string(),
            h.adam.eps.to_string(),
            h.identity_embeddings.to_string(),
            h.zscore.to_string(),
            h.max_hours.to_string(),
            match self.test {
                TestKind::Welch => "welch".into(),
                TestKind::Paired => "paired".into(),
            },
            self.data_dir.display().to_string(),
            path(&self.phenotype_map),
            path(&self.schema),
            self.out_dir.display().to_string(),
        ];
        Self::KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    /// Renders a config file that [`from_text`](Self::from_text) reads back
    /// to an equal value.
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.hyper.epochs,
            batch_size: self.hyper.batch_size,
            max_batch_tokens: self.hyper.max_batch_tokens,
            adam: self.hyper.adam,
            seed,
        }
    }

    pub fn bin_policy(&self) -> BinPolicy {
        BinPolicy {
            max_hours: self.hyper.max_hours,
            ..BinPolicy::default()
        }
    }

    pub fn phenotype_map_path(&self) -> PathBuf {
        self.phenotype_map
            .clone()
            .unwrap_or_else(|| self.data_dir.join(crate::synth::PHENOTYPE_MAP_FILE))
    }
}
