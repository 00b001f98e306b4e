mod common;

use std::collections::BTreeMap;

use icubench::cohort::{select_base_cohort, BASE_RULES};
use icubench::ingest::load_dataset;
use icubench::preprocess::{build_grid, build_vocabs, BinPolicy};
use icubench::schema::{canonical_schema, num};
use icubench::synth::{self, SynthConfig};
use icubench::types::DischargeStatus;

/// Probability that a random positive outscores a random negative, ties
/// counting half.
fn pair_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| !y).map(|(s, _)| *s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Scores every adult stay with at least a day of data by the mean of
/// z(heart rate) + z(respiratory rate) over its first 24 hours, and returns
/// the AUROC of that score against hospital death.
fn vital_score_auroc(cfg: &SynthConfig) -> f64 {
    let data = common::synth_dir(cfg);
    let schema = canonical_schema();
    let ds = load_dataset(data.path(), &schema).unwrap();
    let cohort = select_base_cohort(&ds.metas, &ds.record_counts());
    let empty = Vec::new();
    let recs = |id| ds.records.get(&id).unwrap_or(&empty).as_slice();
    let vocab = build_vocabs(&schema, ds.metas.iter().map(|m| (m, recs(m.stay_id))));
    let policy = BinPolicy::default();

    let mut rows: Vec<([f64; 2], bool)> = Vec::new();
    for &id in &cohort.included {
        let m = ds.meta(id).unwrap();
        if m.hospital_discharge_status == DischargeStatus::Missing {
            continue;
        }
        let g = build_grid(m, recs(id), &vocab.schema, &policy);
        if g.n_hours < 24 {
            continue;
        }
        let mean = |v: usize| (0..24).map(|h| g.numeric_at(h, v)).sum::<f64>() / 24.0;
        rows.push(([mean(num::HEART_RATE), mean(num::RESPIRATORY_RATE)], m.hospital_discharge_status == DischargeStatus::Expired));
    }
    let z = |k: usize| {
        let n = rows.len() as f64;
        let mu = rows.iter().map(|r| r.0[k]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r.0[k] - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (mu, sd)
    };
    let (zh, zr) = (z(0), z(1));
    let scores: Vec<f64> = rows.iter().map(|r| (r.0[0] - zh.0) / zh.1 + (r.0[1] - zr.0) / zr.1).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
    pair_auroc(&scores, &labels)
}

#[test]
fn planted_mortality_rate_is_near_the_configured_rate() {
    let out = synth::generate(&common::synth_cfg(10_000, 11, 1.0)).unwrap();
    let s = &out.summary;
    let rate = s.n_expired as f64 / s.n_stays as f64;
    assert!((0.075..=0.091).contains(&rate), "expired fraction {rate}");
    assert!(s.n_unit_deaths <= s.n_expired);
}

#[test]
fn cohort_exclusions_match_what_the_generator_planted() {
    let cfg = common::synth_cfg(1500, 12, 1.0);
    let data = common::synth_dir(&cfg);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.path().join(synth::SUMMARY_FILE)).unwrap()).unwrap();
    let ds = load_dataset(data.path(), &canonical_schema()).unwrap();
    assert_eq!(ds.report.total_skipped(), 0, "{}", ds.report.to_text());
    assert_eq!(ds.metas.len() as u64, summary["n_stays"].as_u64().unwrap());

    let cohort = select_base_cohort(&ds.metas, &ds.record_counts());
    assert_eq!(cohort.excluded_by(BASE_RULES[0]) as u64, summary["expected_excluded_age"].as_u64().unwrap());
    assert_eq!(cohort.excluded_by(BASE_RULES[1]) as u64, summary["expected_excluded_records"].as_u64().unwrap());
    assert_eq!(cohort.included.len() + cohort.excluded_total(), ds.metas.len());
}

#[test]
fn loading_twice_gives_identical_data() {
    let data = common::synth_dir(&common::synth_cfg(200, 13, 1.0));
    let schema = canonical_schema();
    let a = load_dataset(data.path(), &schema).unwrap();
    let b = load_dataset(data.path(), &schema).unwrap();
    assert_eq!(a.metas, b.metas);
    assert_eq!(a.records, b.records);
    let counts: BTreeMap<_, _> = a.record_counts();
    assert_eq!(counts.values().sum::<usize>(), a.records.values().map(Vec::len).sum::<usize>());
}

#[test]
fn vital_signal_is_absent_at_zero_strength_and_grows_with_it() {
    let null = vital_score_auroc(&common::synth_cfg(2000, 14, 0.0));
    assert!((null - 0.5).abs() <= 0.05, "signal 0 auroc {null}");
    let weak = vital_score_auroc(&common::synth_cfg(2000, 14, 0.5));
    let strong = vital_score_auroc(&common::synth_cfg(2000, 14, 1.5));
    assert!(null < weak && weak < strong, "auroc {null} {weak} {strong}");
}
