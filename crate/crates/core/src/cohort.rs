//! Inclusion criteria, task cohorts, labels and rolling prediction schedules.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::phenotype::PhenotypeCatalog;
use crate::types::{DischargeStatus, Horizon, HourlyGrid, Label, StayId, StayMeta, Task, TaskInstance};

pub const MIN_AGE_EXCLUSIVE: f64 = 18.0;
pub const MIN_RECORDS: usize = 15;
pub const MORTALITY_MIN_STAY_HOURS: i64 = 48;
pub const DERIVATION_HOURS: usize = 12;
pub const SLIDE_HOURS: usize = 6;
pub const DECOMP_HORIZON_HOURS: i64 = 24;

/// Exclusion rules in the order they are applied. A stay is counted under the
/// first rule it fails.
pub const BASE_RULES: [&str; 3] = ["age <= 18", "fewer than 15 records", "non-positive unit stay"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    pub total: usize,
    /// `(rule, excluded count)` in application order.
    pub excluded: Vec<(String, usize)>,
    pub included: Vec<StayId>,
}

impl CohortReport {
    pub fn excluded_total(&self) -> usize {
        self.excluded.iter().map(|(_, n)| n).sum()
    }

    pub fn excluded_by(&self, rule: &str) -> usize {
        self.excluded
            .iter()
            .find(|(r, _)| r == rule)
            .map_or(0, |(_, n)| *n)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("cohort selection\n  input stays {:>10}\n", self.total);
        for (rule, n) in &self.excluded {
            let _ = writeln!(out, "  excluded: {rule:<28} {n:>8}");
        }
        let _ = writeln!(out, "  included stays {:>8}", self.included.len());
        out
    }
}

/// Keeps adult stays (age > 18) with at least 15 mapped records and a
/// positive unit length of stay.
pub fn select_base_cohort(metas: &[StayMeta], record_counts: &BTreeMap<StayId, usize>) -> CohortReport {
    let mut excluded = [0usize; BASE_RULES.len()];
    let mut included = Vec::new();
    for m in metas {
        let records = record_counts.get(&m.stay_id).copied().unwrap_or(0);
        if m.age <= MIN_AGE_EXCLUSIVE {
            excluded[0] += 1;
        } else if records < MIN_RECORDS {
            excluded[1] += 1;
        } else if m.unit_discharge_offset_minutes <= 0 {
            excluded[2] += 1;
        } else {
            included.push(m.stay_id);
        }
    }
    included.sort_unstable();
    CohortReport {
        total: metas.len(),
        excluded: BASE_RULES
            .iter()
            .zip(excluded)
            .map(|(r, n)| (r.to_string(), n))
            .collect(),
        included,
    }
}

/// Prediction points `t = 12, 18, 24, …` with `t < n_hours`; each has the full
/// derivation window `[t − 12, t)`. No trailing partial point is added.
pub fn schedule_points(n_hours: usize) -> Vec<usize> {
    (DERIVATION_HOURS..n_hours).step_by(SLIDE_HOURS).collect()
}

fn grids_in_order<'a>(
    grids: &'a BTreeMap<StayId, HourlyGrid>,
    metas: &'a [StayMeta],
) -> impl Iterator<Item = (&'a HourlyGrid, &'a StayMeta)> {
    let by_id: BTreeMap<StayId, &StayMeta> = metas.iter().map(|m| (m.stay_id, m)).collect();
    grids
        .values()
        .filter_map(move |g| by_id.get(&g.stay_id).map(|m| (g, *m)))
}

/// One instance per stay with a known hospital outcome and at least 48 unit
/// hours; window `[0, horizon)`, label = expired at hospital discharge.
pub fn build_mortality_instances(
    grids: &BTreeMap<StayId, HourlyGrid>,
    metas: &[StayMeta],
    horizon: Horizon,
) -> Vec<TaskInstance> {
    grids_in_order(grids, metas)
        .filter(|(g, m)| {
            m.hospital_discharge_status != DischargeStatus::Missing
                && m.unit_discharge_offset_minutes >= MORTALITY_MIN_STAY_HOURS * 60
                && g.n_hours >= horizon.hours()
        })
        .map(|(g, m)| TaskInstance {
            stay_id: g.stay_id,
            window: 0..horizon.hours(),
            label: Label::Binary(m.hospital_discharge_status == DischargeStatus::Expired),
            task: Task::Mortality,
        })
        .collect()
}

/// Remaining unit length of stay in days at each schedule point.
pub fn build_los_instances(grids: &BTreeMap<StayId, HourlyGrid>, metas: &[StayMeta]) -> Vec<TaskInstance> {
    let mut out = Vec::new();
    for (g, m) in grids_in_order(grids, metas) {
        if m.unit_discharge_offset_minutes <= 0 {
            continue;
        }
        for t in schedule_points(g.n_hours) {
            let remaining = (m.los_days() - t as f64 / 24.0).max(0.0);
            out.push(TaskInstance {
                stay_id: g.stay_id,
                window: t - DERIVATION_HOURS..t,
                label: Label::RemainingLosDays(remaining),
                task: Task::Los,
            });
        }
    }
    out
}

/// Death within `(t, t + 24]` hours at each schedule point. Points at or after
/// the death hour are not generated.
pub fn build_decomp_instances(grids: &BTreeMap<StayId, HourlyGrid>, metas: &[StayMeta]) -> Vec<TaskInstance> {
    let mut out = Vec::new();
    for (g, m) in grids_in_order(grids, metas) {
        for t in schedule_points(g.n_hours) {
            let t_min = t as i64 * 60;
            let label = match m.death_offset_minutes {
                Some(d) if d <= t_min => break,
                Some(d) => d <= t_min + DECOMP_HORIZON_HOURS * 60,
                None => false,
            };
            out.push(TaskInstance {
                stay_id: g.stay_id,
                window: t - DERIVATION_HOURS..t,
                label: Label::Binary(label),
                task: Task::Decompensation,
            });
        }
    }
    out
}

/// Whole-stay window with the 25-bit phenotype mask; stays with no mappable
/// code are skipped.
pub fn build_phenotype_instances(
    grids: &BTreeMap<StayId, HourlyGrid>,
    metas: &[StayMeta],
    catalog: &PhenotypeCatalog,
) -> Vec<TaskInstance> {
    grids_in_order(grids, metas)
        .filter_map(|(g, m)| {
            let mask = catalog.mask(&m.icd9_codes);
            (mask.count() > 0).then(|| TaskInstance {
                stay_id: g.stay_id,
                window: 0..g.n_hours,
                label: Label::Phenotypes(mask),
                task: Task::Phenotyping,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{NUM_CATEGORICAL, NUM_NUMERICAL};

    fn meta(id: StayId, age: f64, los_minutes: i64) -> StayMeta {
        StayMeta {
            stay_id: id,
            patient_id: id,
            age,
            gender: String::new(),
            ethnicity: String::new(),
            admission_diagnosis: String::new(),
            height_cm: None,
            weight_kg: None,
            hospital_discharge_status: DischargeStatus::Alive,
            unit_discharge_offset_minutes: los_minutes,
            death_offset_minutes: None,
            icd9_codes: Default::default(),
        }
    }

    fn grid(id: StayId, n: usize) -> HourlyGrid {
        HourlyGrid {
            stay_id: id,
            n_hours: n,
            numeric: vec![0.0; n * NUM_NUMERICAL],
            categorical: vec![0; n * NUM_CATEGORICAL],
            observed_mask: vec![false; n * NUM_NUMERICAL],
        }
    }

    fn grids_for(metas: &[StayMeta]) -> BTreeMap<StayId, HourlyGrid> {
        metas
            .iter()
            .map(|m| (m.stay_id, grid(m.stay_id, ((m.unit_discharge_offset_minutes + 59) / 60) as usize)))
            .collect()
    }

    #[test]
    fn base_cohort_rules() {
        let metas = vec![meta(1, 17.0, 3000), meta(2, 40.0, 3000), meta(3, 40.0, 3000), meta(4, 18.0, 3000)];
        let counts: BTreeMap<_, _> = [(1, 200), (2, 14), (3, 15), (4, 100)].into_iter().collect();
        let r = select_base_cohort(&metas, &counts);
        assert_eq!(r.included, vec![3]);
        assert_eq!(r.excluded_by("age <= 18"), 2);
        assert_eq!(r.excluded_by("fewer than 15 records"), 1);
        assert_eq!(r.included.len() + r.excluded_total(), r.total);
    }

    #[test]
    fn mortality_rules() {
        let mut dead = meta(2, 60.0, 72 * 60);
        dead.hospital_discharge_status = DischargeStatus::Expired;
        let mut missing = meta(3, 60.0, 72 * 60);
        missing.hospital_discharge_status = DischargeStatus::Missing;
        let metas = vec![meta(1, 60.0, 36 * 60), dead, missing];
        let inst = build_mortality_instances(&grids_for(&metas), &metas, Horizon::H24);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].stay_id, 2);
        assert_eq!(inst[0].window, 0..24);
        assert_eq!(inst[0].label, Label::Binary(true));
        let inst = build_mortality_instances(&grids_for(&metas), &metas, Horizon::H48);
        assert_eq!(inst[0].window, 0..48);
    }

    #[test]
    fn los_thirty_hour_stay() {
        let metas = vec![meta(1, 60.0, 30 * 60), meta(2, 60.0, 12 * 60)];
        let inst = build_los_instances(&grids_for(&metas), &metas);
        let ends: Vec<usize> = inst.iter().map(|i| i.window.end).collect();
        assert_eq!(ends, vec![12, 18, 24]);
        let labels: Vec<f64> = inst
            .iter()
            .map(|i| match i.label {
                Label::RemainingLosDays(d) => d,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(labels, vec![0.75, 0.5, 0.25]);
        assert!(inst.iter().all(|i| i.window.len() == 12));
    }

    #[test]
    fn decompensation_labels() {
        let mut d30 = meta(1, 60.0, 30 * 60);
        d30.hospital_discharge_status = DischargeStatus::Expired;
        d30.death_offset_minutes = Some(30 * 60);
        let mut d40 = meta(2, 60.0, 40 * 60);
        d40.hospital_discharge_status = DischargeStatus::Expired;
        d40.death_offset_minutes = Some(40 * 60);
        let alive = meta(3, 60.0, 60 * 60);
        let metas = vec![d30, d40, alive];
        let inst = build_decomp_instances(&grids_for(&metas), &metas);
        let of = |id| -> Vec<(usize, bool)> {
            inst.iter()
                .filter(|i| i.stay_id == id)
                .map(|i| (i.window.end, i.binary_label().unwrap()))
                .collect()
        };
        assert_eq!(of(1), vec![(12, true), (18, true), (24, true)]);
        assert_eq!(of(2), vec![(12, false), (18, true), (24, true), (30, true), (36, true)]);
        assert!(of(3).iter().all(|&(_, y)| !y));
    }

    #[test]
    fn phenotype_instances() {
        let catalog = PhenotypeCatalog::parse("038.9,2\n785.52,8\n").unwrap();
        let mut a = meta(1, 60.0, 600);
        a.icd9_codes = ["038.9", "785.52"].iter().map(|s| s.to_string()).collect();
        let mut b = meta(2, 60.0, 600);
        b.icd9_codes = ["999.9"].iter().map(|s| s.to_string()).collect();
        let metas = vec![a, b];
        let inst = build_phenotype_instances(&grids_for(&metas), &metas, &catalog);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].window, 0..10);
        match inst[0].label {
            Label::Phenotypes(m) => assert_eq!(m.count(), 2),
            _ => unreachable!(),
        }
    }

    #[test]
    fn schedule_has_no_partial_point() {
        assert_eq!(schedule_points(12), Vec::<usize>::new());
        assert_eq!(schedule_points(13), vec![12]);
        assert_eq!(schedule_points(31), vec![12, 18, 24, 30]);
        assert_eq!(schedule_points(35), vec![12, 18, 24, 30]);
    }
}
