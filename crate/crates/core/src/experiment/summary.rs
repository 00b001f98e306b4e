//! Cohort demographics split by hospital outcome.

use std::fmt::Write as _;

use serde::Serialize;

use crate::types::{DischargeStatus, StayMeta};

const ETHNICITIES: [&str; 5] = ["Caucasian", "African American", "Hispanic", "Asian", "Native American"];
const EMPTY: &str = "—";

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `(median, q1, q3)`, or nothing for an empty stratum.
pub fn median_iqr(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some((quantile(&v, 0.5), quantile(&v, 0.25), quantile(&v, 0.75)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    /// Overall, died in hospital, alive at discharge.
    pub cells: [String; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub n: usize,
    pub n_dead: usize,
    pub n_alive: usize,
    /// Hospital deaths over stays with a known outcome.
    pub mortality_rate: Option<f64>,
    pub median_age: Option<f64>,
    pub rows: Vec<SummaryRow>,
}

fn count_cell(k: usize, n: usize) -> String {
    if n == 0 {
        EMPTY.into()
    } else {
        format!("{k} ({:.1})", 100.0 * k as f64 / n as f64)
    }
}

fn count_where(g: &[&StayMeta], pred: impl Fn(&StayMeta) -> bool) -> String {
    count_cell(g.iter().filter(|m| pred(m)).count(), g.len())
}

fn median_cell(values: &[f64]) -> String {
    median_iqr(values).map_or(EMPTY.into(), |(m, a, b)| format!("{m:.2} [{a:.2}-{b:.2}]"))
}

/// Counts with percentages and median [IQR] rows, in three columns: all
/// stays, hospital deaths, and survivors. Stays with an unknown outcome only
/// count towards the first column.
pub fn summarize_cohort(metas: &[StayMeta]) -> CohortSummary {
    let overall: Vec<&StayMeta> = metas.iter().collect();
    let dead: Vec<&StayMeta> = metas
        .iter()
        .filter(|m| m.hospital_discharge_status == DischargeStatus::Expired)
        .collect();
    let alive: Vec<&StayMeta> = metas
        .iter()
        .filter(|m| m.hospital_discharge_status == DischargeStatus::Alive)
        .collect();
    let groups = [&overall, &dead, &alive];
    let row = |label: &str, f: &dyn Fn(&[&StayMeta]) -> String| SummaryRow {
        label: label.into(),
        cells: groups.map(|g| f(g)),
    };

    let mut rows = vec![
        row("ICU admissions", &|g| if g.is_empty() { EMPTY.into() } else { g.len().to_string() }),
        row("Age", &|g| median_cell(&g.iter().map(|m| m.age).collect::<Vec<_>>())),
        row("Gender (F)", &|g| count_where(g, |m| m.gender.eq_ignore_ascii_case("female"))),
    ];
    for e in ETHNICITIES {
        rows.push(row(e, &|g| count_where(g, |m| m.ethnicity == e)));
    }
    rows.push(row("Other/Unknown", &|g| count_where(g, |m| !ETHNICITIES.contains(&m.ethnicity.as_str()))));
    rows.push(row("ICU LoS (days)", &|g| median_cell(&g.iter().map(|m| m.los_days()).collect::<Vec<_>>())));
    rows.push(row("Hospital death", &|g| {
        let k = g.iter().filter(|m| m.hospital_discharge_status == DischargeStatus::Expired).count();
        if k == 0 && g.iter().all(|m| m.hospital_discharge_status == DischargeStatus::Alive) && !g.is_empty() {
            EMPTY.into()
        } else {
            count_cell(k, g.len())
        }
    }));
    rows.push(row("ICU death", &|g| {
        let k = g.iter().filter(|m| m.death_offset_minutes.is_some()).count();
        if k == 0 && !g.is_empty() && g.iter().all(|m| m.hospital_discharge_status == DischargeStatus::Alive) {
            EMPTY.into()
        } else {
            count_cell(k, g.len())
        }
    }));
    let known = dead.len() + alive.len();
    CohortSummary {
        n: metas.len(),
        n_dead: dead.len(),
        n_alive: alive.len(),
        mortality_rate: (known > 0).then(|| dead.len() as f64 / known as f64),
        median_age: median_iqr(&metas.iter().map(|m| m.age).collect::<Vec<_>>()).map(|t| t.0),
        rows,
    }
}

impl CohortSummary {
    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0);
        let cw = self
            .rows
            .iter()
            .flat_map(|r| r.cells.iter().map(|c| c.chars().count()))
            .max()
            .unwrap_or(0)
            .max(18);
        let mut out = format!("{:<w$}  {:>cw$}  {:>cw$}  {:>cw$}\n", "", "Overall", "Dead at hospital", "Alive at hospital");
        for r in &self.rows {
            let _ = write!(out, "{:<w$}", r.label);
            for c in &r.cells {
                let pad = cw.saturating_sub(c.chars().count());
                let _ = write!(out, "  {}{c}", " ".repeat(pad));
            }
            out.push('\n');
        }
        out.push_str("Continuous rows: median [Q1-Q3]; counts: n (%).\n");
        out
    }
}
