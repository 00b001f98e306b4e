//! Shared domain types. All of them are plain values once constructed.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::phenotype::NUM_PHENOTYPES;
use crate::schema::{NUM_CATEGORICAL, NUM_NUMERICAL};

pub type StayId = i64;
pub type PatientId = i64;

/// One raw measurement row from the lab or nurse-charting tables, mapped to a
/// schema variable. The value is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StayRecordRaw {
    pub stay_id: StayId,
    /// Index into the canonical schema.
    pub variable: usize,
    /// Minutes since unit admission; may be negative.
    pub offset_minutes: i64,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DischargeStatus {
    Alive,
    Expired,
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StayMeta {
    pub stay_id: StayId,
    pub patient_id: PatientId,
    /// Years; the masked "> 89" bucket is stored as 90.
    pub age: f64,
    /// Raw category strings; empty means unknown.
    pub gender: String,
    pub ethnicity: String,
    pub admission_diagnosis: String,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub hospital_discharge_status: DischargeStatus,
    pub unit_discharge_offset_minutes: i64,
    /// Set only for deaths in the unit.
    pub death_offset_minutes: Option<i64>,
    pub icd9_codes: BTreeSet<String>,
}

impl StayMeta {
    pub fn los_days(&self) -> f64 {
        self.unit_discharge_offset_minutes as f64 / (24.0 * 60.0)
    }

    pub fn los_hours(&self) -> f64 {
        self.unit_discharge_offset_minutes as f64 / 60.0
    }
}

/// Hour-by-hour matrix for one stay: numerical channels in native units,
/// categorical channels as vocabulary indices.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyGrid {
    pub stay_id: StayId,
    pub n_hours: usize,
    /// Row-major `[n_hours × 13]`. NaN marks an unobserved cell before imputation.
    pub numeric: Vec<f64>,
    /// Row-major `[n_hours × 7]`.
    pub categorical: Vec<u32>,
    /// Row-major `[n_hours × 13]`.
    pub observed_mask: Vec<bool>,
}

impl HourlyGrid {
    pub fn numeric_row(&self, hour: usize) -> &[f64] {
        &self.numeric[hour * NUM_NUMERICAL..(hour + 1) * NUM_NUMERICAL]
    }

    pub fn categorical_row(&self, hour: usize) -> &[u32] {
        &self.categorical[hour * NUM_CATEGORICAL..(hour + 1) * NUM_CATEGORICAL]
    }

    pub fn numeric_at(&self, hour: usize, var: usize) -> f64 {
        self.numeric[hour * NUM_NUMERICAL + var]
    }

    pub fn categorical_at(&self, hour: usize, var: usize) -> u32 {
        self.categorical[hour * NUM_CATEGORICAL + var]
    }

    pub fn observed(&self, hour: usize, var: usize) -> bool {
        self.observed_mask[hour * NUM_NUMERICAL + var]
    }

    /// True when every numeric cell is finite and every categorical index is
    /// inside its vocabulary.
    pub fn is_complete(&self, vocab_sizes: &[usize; NUM_CATEGORICAL]) -> bool {
        self.numeric.iter().all(|x| x.is_finite())
            && self
                .categorical
                .chunks_exact(NUM_CATEGORICAL)
                .all(|row| row.iter().zip(vocab_sizes).all(|(&c, &n)| (c as usize) < n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Mortality,
    Los,
    Phenotyping,
    Decompensation,
}

impl Task {
    pub fn is_binary(self) -> bool {
        matches!(self, Task::Mortality | Task::Decompensation)
    }
}

/// 25-bit phenotype membership mask; bit `n` is category `n` in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PhenotypeMask(pub u32);

impl PhenotypeMask {
    pub fn set(&mut self, n: usize) {
        assert!(n < NUM_PHENOTYPES);
        self.0 |= 1 << n;
    }

    pub fn get(self, n: usize) -> bool {
        self.0 >> n & 1 == 1
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn to_targets(self) -> [f64; NUM_PHENOTYPES] {
        std::array::from_fn(|n| if self.get(n) { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Binary(bool),
    Phenotypes(PhenotypeMask),
    RemainingLosDays(f64),
}

/// One supervised example: a half-open hour window into a stay's grid and its
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub stay_id: StayId,
    pub window: Range<usize>,
    pub label: Label,
    pub task: Task,
}

impl TaskInstance {
    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn binary_label(&self) -> Option<bool> {
        match self.label {
            Label::Binary(b) => Some(b),
            _ => None,
        }
    }
}

/// Which mortality block: prediction from the first 24 or 48 hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    #[serde(rename = "24h")]
    H24,
    #[serde(rename = "48h")]
    H48,
}

impl Horizon {
    pub fn hours(self) -> usize {
        match self {
            Horizon::H24 => 24,
            Horizon::H48 => 48,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Mortality => "mortality",
            Task::Los => "los",
            Task::Phenotyping => "phenotyping",
            Task::Decompensation => "decompensation",
        })
    }
}

impl FromStr for DischargeStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alive" => Ok(Self::Alive),
            "expired" => Ok(Self::Expired),
            "" => Ok(Self::Missing),
            other => Err(Error::Input(format!("unknown discharge status `{other}`"))),
        }
    }
}
