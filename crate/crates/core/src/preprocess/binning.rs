//! Hourly binning and imputation.

use serde::{Deserialize, Serialize};

use crate::schema::{Schema, VariableKind, NUM_CATEGORICAL, NUM_NUMERICAL};
use crate::types::{HourlyGrid, StayMeta, StayRecordRaw};

/// Marks a categorical cell with no observation before imputation.
pub const UNOBSERVED_CAT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    /// Last parseable value in the bin, ignoring unparseable entries.
    LastValid,
    /// Last parseable value when the bin's last entry parses; otherwise the
    /// mean of the parseable entries.
    MeanFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMode {
    /// Carry the last observation forward; normal value before the first one.
    CarryForwardThenNormal,
    /// Every unobserved numerical cell takes the normal value.
    NormalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinPolicy {
    pub bin_minutes: i64,
    pub aggregator: Aggregator,
    pub impute: ImputeMode,
    pub max_hours: usize,
}

impl Default for BinPolicy {
    fn default() -> Self {
        Self {
            bin_minutes: 60,
            aggregator: Aggregator::MeanFallback,
            impute: ImputeMode::CarryForwardThenNormal,
            max_hours: 500,
        }
    }
}

impl BinPolicy {
    /// ceil(unit LoS / bin), clipped to `[1, max_hours]`.
    pub fn grid_hours(&self, unit_discharge_offset_minutes: i64) -> usize {
        let m = unit_discharge_offset_minutes.max(1);
        let bins = (m + self.bin_minutes - 1) / self.bin_minutes;
        (bins as usize).clamp(1, self.max_hours)
    }
}

/// Stay-level values from the patient table, emitted as records at offset 0
/// so that binning treats them like any other measurement.
pub fn static_records(meta: &StayMeta, schema: &Schema) -> Vec<StayRecordRaw> {
    let mut out = Vec::with_capacity(6);
    let mut push = |name: &str, value: String| {
        if !value.trim().is_empty() {
            out.push(StayRecordRaw {
                stay_id: meta.stay_id,
                variable: schema.index_of(name).expect("canonical variable"),
                offset_minutes: 0,
                value,
            });
        }
    };
    push("Age", meta.age.to_string());
    push("Height", meta.height_cm.map(|h| h.to_string()).unwrap_or_default());
    push("Weight", meta.weight_kg.map(|w| w.to_string()).unwrap_or_default());
    push("Admission diagnosis", meta.admission_diagnosis.clone());
    push("Ethnicity", meta.ethnicity.clone());
    push("Gender", meta.gender.clone());
    out
}

fn parse_numeric(value: &str) -> Option<f64> {
    value.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_categorical(value: &str) -> Option<&str> {
    let v = value.trim();
    (!v.is_empty()).then_some(v)
}

#[derive(Clone, Copy, Default)]
struct NumBin {
    sum: f64,
    count: u32,
    last_parsed: f64,
    last_entry_parsed: bool,
}

/// Aggregates one stay's records into hourly bins. Records with negative
/// offsets or beyond `n_hours` are dropped. Within a bin, ties on offset are
/// resolved by input order. Unobserved numeric cells are NaN with a false
/// mask; unobserved categorical cells hold [`UNOBSERVED_CAT`].
pub fn bin_hourly(
    stay_id: i64,
    n_hours: usize,
    records: &[StayRecordRaw],
    schema: &Schema,
    policy: &BinPolicy,
) -> HourlyGrid {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].offset_minutes);

    let mut num_bins = vec![NumBin::default(); n_hours * NUM_NUMERICAL];
    let mut cat_cells = vec![UNOBSERVED_CAT; n_hours * NUM_CATEGORICAL];
    for i in order {
        let rec = &records[i];
        if rec.offset_minutes < 0 {
            continue;
        }
        let hour = (rec.offset_minutes / policy.bin_minutes) as usize;
        if hour >= n_hours {
            continue;
        }
        match schema.variables[rec.variable].kind {
            VariableKind::Numerical => {
                let bin = &mut num_bins[hour * NUM_NUMERICAL + rec.variable];
                match parse_numeric(&rec.value) {
                    Some(x) => {
                        bin.sum += x;
                        bin.count += 1;
                        bin.last_parsed = x;
                        bin.last_entry_parsed = true;
                    }
                    None => bin.last_entry_parsed = false,
                }
            }
            VariableKind::Categorical => {
                if let Some(v) = parse_categorical(&rec.value) {
                    let c = rec.variable - NUM_NUMERICAL;
                    cat_cells[hour * NUM_CATEGORICAL + c] = schema.variables[rec.variable].vocab_index(v);
                }
            }
        }
    }

    let mut numeric = vec![f64::NAN; n_hours * NUM_NUMERICAL];
    let mut observed_mask = vec![false; n_hours * NUM_NUMERICAL];
    for (k, bin) in num_bins.iter().enumerate() {
        if bin.count == 0 {
            continue;
        }
        observed_mask[k] = true;
        numeric[k] = match policy.aggregator {
            Aggregator::LastValid => bin.last_parsed,
            Aggregator::MeanFallback if bin.last_entry_parsed => bin.last_parsed,
            Aggregator::MeanFallback => bin.sum / bin.count as f64,
        };
    }
    HourlyGrid {
        stay_id,
        n_hours,
        numeric,
        categorical: cat_cells,
        observed_mask,
    }
}

/// Fills every unobserved cell. Numerical channels carry forward (per the
/// policy) and otherwise take the normal value; categorical channels carry
/// forward and otherwise take index 0. The observed mask is unchanged.
pub fn impute(mut grid: HourlyGrid, schema: &Schema, mode: ImputeMode) -> HourlyGrid {
    let normals = schema.normal_values();
    for v in 0..NUM_NUMERICAL {
        let mut carry: Option<f64> = None;
        for h in 0..grid.n_hours {
            let k = h * NUM_NUMERICAL + v;
            if grid.observed_mask[k] {
                carry = Some(grid.numeric[k]);
            } else {
                grid.numeric[k] = match (mode, carry) {
                    (ImputeMode::CarryForwardThenNormal, Some(x)) => x,
                    _ => normals[v],
                };
            }
        }
    }
    for c in 0..NUM_CATEGORICAL {
        let mut carry = 0u32;
        for h in 0..grid.n_hours {
            let k = h * NUM_CATEGORICAL + c;
            if grid.categorical[k] == UNOBSERVED_CAT {
                grid.categorical[k] = carry;
            } else {
                carry = grid.categorical[k];
            }
        }
    }
    grid
}

/// Bins and imputes one stay, including its static patient-table values.
pub fn build_grid(
    meta: &StayMeta,
    records: &[StayRecordRaw],
    schema: &Schema,
    policy: &BinPolicy,
) -> HourlyGrid {
    let n_hours = policy.grid_hours(meta.unit_discharge_offset_minutes);
    let mut all = static_records(meta, schema);
    all.extend_from_slice(records);
    let grid = bin_hourly(meta.stay_id, n_hours, &all, schema, policy);
    impute(grid, schema, policy.impute)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::num::{self, HEART_RATE as HR};
    use crate::schema::{canonical_schema, cat, UNKNOWN};

    fn rec(var: usize, offset: i64, value: &str) -> StayRecordRaw {
        StayRecordRaw {
            stay_id: 1,
            variable: var,
            offset_minutes: offset,
            value: value.into(),
        }
    }

    fn schema_with_gender() -> Schema {
        let mut s = canonical_schema();
        s.variables[NUM_NUMERICAL + cat::GENDER].vocab =
            Some(vec![UNKNOWN.into(), "Female".into(), "Male".into()]);
        s
    }

    #[test]
    fn last_valid_wins() {
        let s = canonical_schema();
        let g = bin_hourly(1, 2, &[rec(HR, 10, "80"), rec(HR, 50, "90")], &s, &BinPolicy::default());
        assert_eq!(g.numeric_at(0, HR), 90.0);
        assert!(g.observed(0, HR));
        assert!(!g.observed(1, HR));
    }

    #[test]
    fn mean_fallback_when_last_unparseable() {
        let s = canonical_schema();
        let recs = [rec(HR, 5, "80"), rec(HR, 20, "err")];
        let g = bin_hourly(1, 1, &recs, &s, &BinPolicy::default());
        assert_eq!(g.numeric_at(0, HR), 80.0);

        let recs = [rec(HR, 5, "80"), rec(HR, 10, "100"), rec(HR, 20, "")];
        let g = bin_hourly(1, 1, &recs, &s, &BinPolicy::default());
        assert_eq!(g.numeric_at(0, HR), 90.0);
        let last_valid = BinPolicy {
            aggregator: Aggregator::LastValid,
            ..BinPolicy::default()
        };
        let g = bin_hourly(1, 1, &recs, &s, &last_valid);
        assert_eq!(g.numeric_at(0, HR), 100.0);
    }

    #[test]
    fn unparseable_only_bin_is_unobserved() {
        let s = canonical_schema();
        let g = bin_hourly(1, 4, &[rec(HR, 190, "n/a")], &s, &BinPolicy::default());
        assert!(!g.observed(3, HR));
        assert!(g.numeric_at(3, HR).is_nan());
    }

    #[test]
    fn negative_and_late_offsets_dropped() {
        let s = canonical_schema();
        let g = bin_hourly(1, 2, &[rec(HR, -5, "70"), rec(HR, 130, "75")], &s, &BinPolicy::default());
        assert!(g.observed_mask.iter().all(|&o| !o));
    }

    #[test]
    fn carry_forward_then_normal() {
        let s = canonical_schema();
        let temp = num::TEMPERATURE;
        let g = bin_hourly(1, 6, &[rec(HR, 0, "80"), rec(HR, 185, "90")], &s, &BinPolicy::default());
        let g = impute(g, &s, ImputeMode::CarryForwardThenNormal);
        let hr: Vec<f64> = (0..6).map(|h| g.numeric_at(h, HR)).collect();
        assert_eq!(hr, vec![80.0, 80.0, 80.0, 90.0, 90.0, 90.0]);
        assert!((0..6).all(|h| g.numeric_at(h, temp) == 37.0));
        assert_eq!(g.observed_mask.iter().filter(|&&o| o).count(), 2);

        let g = bin_hourly(1, 3, &[rec(HR, 70, "80")], &s, &BinPolicy::default());
        let g = impute(g, &s, ImputeMode::NormalOnly);
        let hr: Vec<f64> = (0..3).map(|h| g.numeric_at(h, HR)).collect();
        assert_eq!(hr, vec![86.0, 80.0, 86.0]);
    }

    #[test]
    fn categorical_carry_forward_and_unknown() {
        let s = schema_with_gender();
        let gender = NUM_NUMERICAL + cat::GENDER;
        let g = bin_hourly(1, 4, &[rec(gender, 0, "Male")], &s, &BinPolicy::default());
        let g = impute(g, &s, ImputeMode::CarryForwardThenNormal);
        assert!((0..4).all(|h| g.categorical_at(h, cat::GENDER) == 2));
        assert!((0..4).all(|h| g.categorical_at(h, cat::GCS_TOTAL) == 0));

        let g = bin_hourly(1, 1, &[rec(gender, 0, "Other")], &s, &BinPolicy::default());
        assert_eq!(g.categorical_at(0, cat::GENDER), 0);
        let g = bin_hourly(1, 1, &[rec(gender, 0, "Female"), rec(gender, 5, " ")], &s, &BinPolicy::default());
        assert_eq!(g.categorical_at(0, cat::GENDER), 1);
    }

    #[test]
    fn grid_hours_rule() {
        let p = BinPolicy::default();
        assert_eq!(p.grid_hours(60), 1);
        assert_eq!(p.grid_hours(61), 2);
        assert_eq!(p.grid_hours(30 * 60), 30);
        assert_eq!(p.grid_hours(10_000 * 60), 500);
    }
}
