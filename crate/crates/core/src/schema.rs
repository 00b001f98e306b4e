//! The fixed twenty-variable input schema and its normal-value table.
//!
//! Order is part of the contract: the 13 numerical variables come first, then
//! the 7 categorical ones. Grids, input vectors and checkpoints all index
//! channels by position in this list.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const NUM_NUMERICAL: usize = 13;
pub const NUM_CATEGORICAL: usize = 7;
pub const NUM_VARIABLES: usize = NUM_NUMERICAL + NUM_CATEGORICAL;

/// Reserved vocabulary entry at index 0 of every categorical variable.
pub const UNKNOWN: &str = "unknown";

/// Positional indices into the numerical block.
pub mod num {
    pub const HEART_RATE: usize = 0;
    pub const MEAN_BP: usize = 1;
    pub const DIASTOLIC_BP: usize = 2;
    pub const SYSTOLIC_BP: usize = 3;
    pub const O2: usize = 4;
    pub const RESPIRATORY_RATE: usize = 5;
    pub const TEMPERATURE: usize = 6;
    pub const GLUCOSE: usize = 7;
    pub const FIO2: usize = 8;
    pub const PH: usize = 9;
    pub const HEIGHT: usize = 10;
    pub const WEIGHT: usize = 11;
    pub const AGE: usize = 12;
}

/// Positional indices into the categorical block (not the full schema).
pub mod cat {
    pub const ADMISSION_DIAGNOSIS: usize = 0;
    pub const ETHNICITY: usize = 1;
    pub const GENDER: usize = 2;
    pub const GCS_TOTAL: usize = 3;
    pub const GCS_EYES: usize = 4;
    pub const GCS_MOTOR: usize = 5;
    pub const GCS_VERBAL: usize = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Numerical,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    /// Imputation fill value in native clinical units. Numerical only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_value: Option<f64>,
    /// Ordered category strings with `unknown` at index 0. `None` until built
    /// from data. Categorical only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vec<String>>,
}

impl VariableSpec {
    fn numerical(name: &str, normal: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: VariableKind::Numerical,
            normal_value: Some(normal),
            vocab: None,
        }
    }

    fn categorical(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: VariableKind::Categorical,
            normal_value: None,
            vocab: None,
        }
    }

    /// Vocabulary index of `value`, or 0 when the value is unseen or the
    /// vocabulary has not been built.
    pub fn vocab_index(&self, value: &str) -> u32 {
        match &self.vocab {
            Some(v) => v[1..]
                .binary_search_by(|probe| probe.as_str().cmp(value))
                .map(|i| i as u32 + 1)
                .unwrap_or(0),
            None => 0,
        }
    }

    pub fn vocab_len(&self) -> Option<usize> {
        self.vocab.as_ref().map(Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "variable")]
    pub variables: Vec<VariableSpec>,
}

/// The twenty input variables in canonical order, with the built-in normal
/// value table. Categorical vocabularies are left unbuilt.
pub fn canonical_schema() -> Schema {
    let variables = vec![
        VariableSpec::numerical("Heart rate", 86.0),
        VariableSpec::numerical("Mean arterial pressure", 77.0),
        VariableSpec::numerical("Diastolic blood pressure", 59.0),
        VariableSpec::numerical("Systolic blood pressure", 118.0),
        VariableSpec::numerical("O2", 98.0),
        VariableSpec::numerical("Respiratory rate", 19.0),
        VariableSpec::numerical("Temperature", 37.0),
        VariableSpec::numerical("Glucose", 128.0),
        // eICU reports FiO2 in percent.
        VariableSpec::numerical("FiO2", 21.0),
        VariableSpec::numerical("pH", 7.4),
        VariableSpec::numerical("Height", 170.0),
        VariableSpec::numerical("Weight", 81.0),
        VariableSpec::numerical("Age", 62.0),
        VariableSpec::categorical("Admission diagnosis"),
        VariableSpec::categorical("Ethnicity"),
        VariableSpec::categorical("Gender"),
        VariableSpec::categorical("Glasgow Coma Score Total"),
        VariableSpec::categorical("Glasgow Coma Score Eyes"),
        VariableSpec::categorical("Glasgow Coma Score Motor"),
        VariableSpec::categorical("Glasgow Coma Score Verbal"),
    ];
    Schema { variables }
}

impl Schema {
    pub fn numerical(&self) -> &[VariableSpec] {
        &self.variables[..NUM_NUMERICAL]
    }

    pub fn categorical(&self) -> &[VariableSpec] {
        &self.variables[NUM_NUMERICAL..]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn normal_values(&self) -> [f64; NUM_NUMERICAL] {
        let mut out = [0.0; NUM_NUMERICAL];
        for (o, v) in out.iter_mut().zip(self.numerical()) {
            *o = v.normal_value.unwrap_or(0.0);
        }
        out
    }

    /// Vocabulary sizes of the categorical variables, in order.
    pub fn vocab_sizes(&self) -> Result<[usize; NUM_CATEGORICAL]> {
        let mut out = [0; NUM_CATEGORICAL];
        for (o, v) in out.iter_mut().zip(self.categorical()) {
            *o = v.vocab_len().ok_or_else(|| {
                Error::Config(format!("vocabulary for `{}` has not been built", v.name))
            })?;
        }
        Ok(out)
    }

    /// Checks the structural invariants: 13 + 7 variables in canonical order,
    /// finite normal values, `unknown` first in every built vocabulary.
    pub fn validate(&self) -> Result<()> {
        let canonical = canonical_schema();
        if self.variables.len() != NUM_VARIABLES {
            return Err(Error::Config(format!(
                "schema must list {NUM_VARIABLES} variables, found {}",
                self.variables.len()
            )));
        }
        for (got, want) in self.variables.iter().zip(&canonical.variables) {
            if got.name != want.name || got.kind != want.kind {
                return Err(Error::Config(format!(
                    "schema variable `{}` out of canonical order (expected `{}`)",
                    got.name, want.name
                )));
            }
            match got.kind {
                VariableKind::Numerical => match got.normal_value {
                    Some(x) if x.is_finite() => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "`{}` needs a finite normal_value",
                            got.name
                        )))
                    }
                },
                VariableKind::Categorical => {
                    if let Some(vocab) = &got.vocab {
                        if vocab.first().map(String::as_str) != Some(UNKNOWN) {
                            return Err(Error::Config(format!(
                                "vocabulary of `{}` must start with `{UNKNOWN}`",
                                got.name
                            )));
                        }
                        if vocab[1..].windows(2).any(|w| w[0] >= w[1]) {
                            return Err(Error::Config(format!(
                                "vocabulary of `{}` must be sorted and distinct",
                                got.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Content hash over names, kinds, normal values and vocabularies.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for v in &self.variables {
            h.update(v.name.as_bytes());
            h.update([0u8, v.kind as u8]);
            if let Some(x) = v.normal_value {
                h.update(x.to_le_bytes());
            }
            if let Some(vocab) = &v.vocab {
                h.update((vocab.len() as u64).to_le_bytes());
                for s in vocab {
                    h.update(s.as_bytes());
                    h.update([0u8]);
                }
            }
        }
        h.finalize().into()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("schema is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: Schema =
            toml::from_str(text).map_err(|e| Error::Config(format!("schema file: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

/// One-hot width: the sum of the categorical vocabulary sizes.
pub fn total_ohe_width(schema: &Schema) -> Result<usize> {
    Ok(schema.vocab_sizes()?.iter().sum())
}
