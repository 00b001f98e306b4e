//! Synthetic eICU-shaped datasets with planted outcome signal.
//!
//! Vitals and labs are drawn around the schema's normal values: a per-patient
//! offset plus AR(1) noise, truncated at ±4 scale units. For patients who die
//! in hospital, heart rate and respiratory rate drift upward and the Glasgow
//! Coma Score downward by `signal_strength` scale units. The drift ramps in
//! over the first 24 hours and stays at full strength afterwards, so the final
//! 24 hours of every such stay carry the full shift; unit deaths add a second
//! ramp over the 24 hours before death. Outputs are a pure function of the
//! config; each patient draws from its own ChaCha stream `(seed, index)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TableKind;
use crate::phenotype::{PhenotypeCatalog, CATEGORIES, NUM_PHENOTYPES};
use crate::types::{DischargeStatus, PhenotypeMask, StayMeta};

/// Record variables the generator emits, with the eICU item label, source
/// table, default missingness, scale unit and print precision.
struct Channel {
    variable: &'static str,
    item: &'static str,
    table: TableKind,
    missingness: f64,
    scale: f64,
    decimals: usize,
}

const VITALS: [Channel; 10] = [
    Channel { variable: "Heart rate", item: "Heart Rate", table: TableKind::NurseCharting, missingness: 0.1, scale: 12.0, decimals: 0 },
    Channel { variable: "Mean arterial pressure", item: "Non-Invasive BP Mean", table: TableKind::NurseCharting, missingness: 0.1, scale: 10.0, decimals: 0 },
    Channel { variable: "Diastolic blood pressure", item: "Non-Invasive BP Diastolic", table: TableKind::NurseCharting, missingness: 0.1, scale: 9.0, decimals: 0 },
    Channel { variable: "Systolic blood pressure", item: "Non-Invasive BP Systolic", table: TableKind::NurseCharting, missingness: 0.1, scale: 15.0, decimals: 0 },
    Channel { variable: "O2", item: "O2 Saturation", table: TableKind::NurseCharting, missingness: 0.1, scale: 1.5, decimals: 0 },
    Channel { variable: "Respiratory rate", item: "Respiratory Rate", table: TableKind::NurseCharting, missingness: 0.1, scale: 4.0, decimals: 0 },
    Channel { variable: "Temperature", item: "Temperature (C)", table: TableKind::NurseCharting, missingness: 0.5, scale: 0.5, decimals: 1 },
    Channel { variable: "Glucose", item: "glucose", table: TableKind::Lab, missingness: 0.8, scale: 30.0, decimals: 0 },
    Channel { variable: "FiO2", item: "FiO2", table: TableKind::Lab, missingness: 0.9, scale: 10.0, decimals: 0 },
    Channel { variable: "pH", item: "pH", table: TableKind::Lab, missingness: 0.9, scale: 0.05, decimals: 2 },
];

const GCS_ITEMS: [(&str, &str); 4] = [
    ("Glasgow Coma Score Total", "GCS Total"),
    ("Glasgow Coma Score Eyes", "Eyes"),
    ("Glasgow Coma Score Motor", "Motor"),
    ("Glasgow Coma Score Verbal", "Verbal"),
];
const GCS_MISSINGNESS: f64 = 0.6;
const GCS_SCALE: f64 = 1.5;

const ETHNICITIES: [(&str, f64); 6] = [
    ("Caucasian", 0.772),
    ("African American", 0.108),
    ("Hispanic", 0.040),
    ("Asian", 0.016),
    ("Native American", 0.006),
    ("", 0.058),
];

const ADMISSION_DX: [&str; 12] = [
    "Sepsis, pulmonary",
    "CHF, congestive heart failure",
    "CVA, cerebrovascular accident/stroke",
    "Infarction, acute myocardial (MI)",
    "Bleeding, upper GI",
    "Diabetic ketoacidosis",
    "Overdose, sedatives",
    "Rhythm disturbance (atrial, supraventricular)",
    "Emphysema/bronchitis",
    "Renal failure, acute",
    "CABG alone, coronary artery bypass grafting",
    "Pneumonia, bacterial",
];

/// Admission diagnosis most associated with each phenotype category.
const DX_FOR_CATEGORY: [usize; NUM_PHENOTYPES] = [
    0, 9, 0, 9, 11, 2, 3, 4, 0, 8, 8, 10, 8, 1, 1, 9, 8, 10, 3, 5, 7, 1, 5, 4, 7,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_patients: usize,
    /// Unit length of stay bounds in hours.
    pub hours_range: (u32, u32),
    /// Per-variable probability that an hourly measurement is absent. Keys are
    /// schema variable names; unlisted variables use built-in defaults.
    pub missingness: BTreeMap<String, f64>,
    pub mortality_rate: f64,
    /// Fraction of patients who die in the unit (subset of hospital deaths).
    pub decomp_rate: f64,
    pub signal_strength: f64,
    pub seed: u64,
    pub median_los_hours: f64,
    pub pediatric_rate: f64,
    /// Patients generated with fewer than 15 records.
    pub sparse_rate: f64,
    /// Probability that a patient has a second unit stay.
    pub readmission_rate: f64,
    /// Probability that a survivor's hospital discharge status is blank.
    pub missing_status_rate: f64,
    /// Probability that an emitted value is replaced by an unparseable token.
    pub junk_value_rate: f64,
    pub phenotype_prevalence: Vec<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_patients: 1000,
            hours_range: (12, 336),
            missingness: BTreeMap::new(),
            mortality_rate: 0.083,
            decomp_rate: 0.065,
            signal_strength: 1.0,
            seed: 1,
            median_los_hours: 55.0,
            pediatric_rate: 0.01,
            sparse_rate: 0.02,
            readmission_rate: 0.0,
            missing_status_rate: 0.01,
            junk_value_rate: 0.0,
            phenotype_prevalence: CATEGORIES.iter().map(|c| c.2).collect(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("mortality_rate", self.mortality_rate),
            ("decomp_rate", self.decomp_rate),
            ("pediatric_rate", self.pediatric_rate),
            ("sparse_rate", self.sparse_rate),
            ("readmission_rate", self.readmission_rate),
            ("missing_status_rate", self.missing_status_rate),
            ("junk_value_rate", self.junk_value_rate),
        ];
        for (name, p) in probs
            .into_iter()
            .chain(self.missingness.iter().map(|(k, v)| (k.as_str(), *v)))
            .chain(self.phenotype_prevalence.iter().map(|&p| ("phenotype_prevalence", p)))
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.decomp_rate > self.mortality_rate {
            return Err(Error::Config("decomp_rate cannot exceed mortality_rate".into()));
        }
        let (lo, hi) = self.hours_range;
        if lo < 1 || lo > hi {
            return Err(Error::Config(format!("hours_range ({lo}, {hi}) must satisfy 1 <= min <= max")));
        }
        if self.phenotype_prevalence.len() != NUM_PHENOTYPES {
            return Err(Error::Config(format!("phenotype_prevalence needs {NUM_PHENOTYPES} entries")));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return Err(Error::Config("signal_strength must be finite and >= 0".into()));
        }
        let known: BTreeSet<&str> = VITALS
            .iter()
            .map(|c| c.variable)
            .chain(GCS_ITEMS.iter().map(|g| g.0))
            .collect();
        if let Some(k) = self.missingness.keys().find(|k| !known.contains(k.as_str())) {
            return Err(Error::Config(format!("no generated channel named `{k}`")));
        }
        Ok(())
    }

    /// Sets the same missingness for every generated record variable.
    pub fn with_uniform_missingness(mut self, p: f64) -> Self {
        for c in &VITALS {
            self.missingness.insert(c.variable.into(), p);
        }
        for (v, _) in &GCS_ITEMS {
            self.missingness.insert(v.to_string(), p);
        }
        self
    }

    fn missingness_of(&self, variable: &str, default: f64) -> f64 {
        self.missingness.get(variable).copied().unwrap_or(default)
    }
}

/// One generated raw record before serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRecord {
    pub table: TableKind,
    pub item: &'static str,
    pub offset_minutes: i64,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStay {
    pub meta: StayMeta,
    pub unique_pid: String,
    pub died_in_unit: bool,
    pub records: Vec<GeneratedRecord>,
    /// `(cell text)` rows of the diagnosis table.
    pub diagnosis_cells: Vec<String>,
    pub phenotypes: PhenotypeMask,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SynthSummary {
    pub n_patients: usize,
    pub n_stays: usize,
    pub n_expired: usize,
    pub n_unit_deaths: usize,
    /// Stays the base cohort will drop, by rule, in rule order.
    pub expected_excluded_age: usize,
    pub expected_excluded_records: usize,
    pub total_records: usize,
    pub phenotype_counts: Vec<usize>,
}

/// Serialized tables plus the phenotype map and a summary of what was planted.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub patient_csv: Vec<u8>,
    pub lab_csv: Vec<u8>,
    pub nurse_csv: Vec<u8>,
    pub diagnosis_csv: Vec<u8>,
    pub phenotype_map: String,
    pub summary: SynthSummary,
}

/// Two ICU-9-shaped codes per category. The map is part of the generated
/// dataset, not a clinical grouping.
pub fn synthetic_catalog() -> PhenotypeCatalog {
    PhenotypeCatalog::from_pairs((0..NUM_PHENOTYPES).flat_map(|n| {
        let base = 800 + 7 * n;
        [(format!("{base}.1"), n), (format!("{base}.2"), n)]
    }))
    .expect("generated codes are distinct")
}

fn normal_of(variable: &str) -> f64 {
    let schema = crate::schema::canonical_schema();
    schema.variables[schema.index_of(variable).expect("canonical variable")]
        .normal_value
        .expect("numerical")
}

fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

fn pick_weighted<R: Rng, T: Copy>(rng: &mut R, items: &[(T, f64)]) -> T {
    let total: f64 = items.iter().map(|i| i.1).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(item, w) in items {
        if u < w {
            return item;
        }
        u -= w;
    }
    items[items.len() - 1].0
}

/// Shift multiplier at `hour` for outcome-positive patients.
fn drift(hour: f64, expired: bool, death_hour: Option<f64>) -> f64 {
    if !expired {
        return 0.0;
    }
    let mut s = (hour / 24.0).min(1.0);
    if let Some(d) = death_hour {
        s += (1.0 - (d - hour) / 24.0).clamp(0.0, 1.0);
    }
    s
}

struct Series {
    offset: f64,
    noise: f64,
}

const AR: f64 = 0.7;

impl Series {
    fn new<R: Rng>(rng: &mut R, std: &Normal<f64>) -> Self {
        Self {
            offset: std.sample(rng),
            noise: 0.5 * std.sample(rng),
        }
    }

    /// Next value in scale units (offset + AR noise, stationary sd 0.5).
    fn step<R: Rng>(&mut self, rng: &mut R, std: &Normal<f64>) -> f64 {
        self.noise = AR * self.noise + 0.5 * (1.0 - AR * AR).sqrt() * std.sample(rng);
        self.offset + self.noise
    }
}

fn format_value(x: f64, decimals: usize) -> String {
    format!("{x:.decimals$}")
}

fn generate_stay(cfg: &SynthConfig, patient: usize, stay_k: usize, rng: &mut ChaCha8Rng, age: f64, sex_female: bool, ethnicity: &str) -> GeneratedStay {
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let catalog_codes: Vec<Vec<String>> = (0..NUM_PHENOTYPES)
        .map(|n| {
            let base = 800 + 7 * n;
            vec![format!("{base}.1"), format!("{base}.2")]
        })
        .collect();

    let expired = bernoulli(rng, cfg.mortality_rate);
    let unit_death = expired
        && cfg.mortality_rate > 0.0
        && bernoulli(rng, (cfg.decomp_rate / cfg.mortality_rate).min(1.0));
    let status = if expired {
        DischargeStatus::Expired
    } else if bernoulli(rng, cfg.missing_status_rate) {
        DischargeStatus::Missing
    } else {
        DischargeStatus::Alive
    };

    let (lo, hi) = cfg.hours_range;
    let los_dist = LogNormal::new(cfg.median_los_hours.ln(), 0.6).expect("valid lognormal");
    let los_hours = los_dist.sample(rng).clamp(lo as f64, hi as f64);
    let los_minutes = ((los_hours * 60.0).round() as i64).clamp(lo as i64 * 60, hi as i64 * 60).max(1);
    let death_minutes = unit_death.then_some(los_minutes);
    let death_hour = death_minutes.map(|m| m as f64 / 60.0);
    let n_hours = ((los_minutes + 59) / 60) as usize;

    let mut phenotypes = PhenotypeMask::default();
    for (n, &p) in cfg.phenotype_prevalence.iter().enumerate() {
        if bernoulli(rng, p) {
            phenotypes.set(n);
        }
    }
    let first_cat = (0..NUM_PHENOTYPES).find(|&n| phenotypes.get(n));
    let admit = match first_cat {
        Some(n) if bernoulli(rng, 0.6) => ADMISSION_DX[DX_FOR_CATEGORY[n]],
        _ => ADMISSION_DX[rng.gen_range(0..ADMISSION_DX.len())],
    };

    let mut records = Vec::new();
    let junk = |rng: &mut ChaCha8Rng, v: String| -> String {
        if cfg.junk_value_rate > 0.0 && bernoulli(rng, cfg.junk_value_rate) {
            "ERROR".into()
        } else {
            v
        }
    };
    let sparse = bernoulli(rng, cfg.sparse_rate);
    if sparse {
        let k = rng.gen_range(1..=14);
        for _ in 0..k {
            let c = &VITALS[rng.gen_range(0..7)];
            let offset = rng.gen_range(0..los_minutes);
            let x = normal_of(c.variable) + c.scale * std.sample(rng);
            records.push(GeneratedRecord {
                table: c.table,
                item: c.item,
                offset_minutes: offset,
                value: format_value(x, c.decimals),
            });
        }
    } else {
        // Pre-admission labs exist in eICU; they count as records but are
        // dropped when binning.
        if bernoulli(rng, 0.05) {
            records.push(GeneratedRecord {
                table: TableKind::Lab,
                item: "glucose",
                offset_minutes: -rng.gen_range(1..120),
                value: format_value(normal_of("Glucose") + 30.0 * std.sample(rng), 0),
            });
        }
        for c in &VITALS {
            let miss = cfg.missingness_of(c.variable, c.missingness);
            let normal = normal_of(c.variable);
            let direction = match c.variable {
                "Heart rate" | "Respiratory rate" => 1.0,
                _ => 0.0,
            };
            let mut series = Series::new(rng, &std);
            for h in 0..n_hours {
                let z = series.step(rng, &std) + direction * cfg.signal_strength * drift(h as f64 + 0.5, expired, death_hour);
                if bernoulli(rng, miss) {
                    continue;
                }
                let minute = rng.gen_range(0..60);
                let offset = (h * 60 + minute) as i64;
                if offset >= los_minutes {
                    continue;
                }
                let x = normal + c.scale * z.clamp(-4.0, 4.0 + 2.0 * cfg.signal_strength);
                let value = junk(rng, format_value(x, c.decimals));
                records.push(GeneratedRecord {
                    table: c.table,
                    item: c.item,
                    offset_minutes: offset,
                    value,
                });
            }
        }
        let mut series = Series::new(rng, &std);
        let miss: Vec<f64> = GCS_ITEMS
            .iter()
            .map(|(v, _)| cfg.missingness_of(v, GCS_MISSINGNESS))
            .collect();
        for h in 0..n_hours {
            let z = series.step(rng, &std) - cfg.signal_strength * drift(h as f64 + 0.5, expired, death_hour);
            let total = (14.0 + GCS_SCALE * z).round().clamp(3.0, 15.0) as i64;
            let eyes = ((total as f64 * 4.0 / 15.0).round() as i64).clamp(1, 4);
            let motor = ((total as f64 * 6.0 / 15.0).round() as i64).clamp(1, 6);
            let verbal = (total - eyes - motor).clamp(1, 5);
            let minute = rng.gen_range(0..60);
            let offset = (h * 60 + minute) as i64;
            for (k, value) in [total, eyes, motor, verbal].into_iter().enumerate() {
                if bernoulli(rng, miss[k]) || offset >= los_minutes {
                    continue;
                }
                records.push(GeneratedRecord {
                    table: TableKind::NurseCharting,
                    item: GCS_ITEMS[k].1,
                    offset_minutes: offset,
                    value: value.to_string(),
                });
            }
        }
    }

    let mut diagnosis_cells = Vec::new();
    let mut icd9 = BTreeSet::new();
    for n in 0..NUM_PHENOTYPES {
        if !phenotypes.get(n) {
            continue;
        }
        let codes = &catalog_codes[n];
        if bernoulli(rng, 0.2) {
            diagnosis_cells.push(format!("{}, {}", codes[0], codes[1]));
            icd9.extend(codes.iter().cloned());
        } else {
            let c = codes[rng.gen_range(0..2)].clone();
            diagnosis_cells.push(c.clone());
            icd9.insert(c);
        }
    }
    if bernoulli(rng, 0.3) {
        let c = format!("V{}.{}", 10 + rng.gen_range(0..80), rng.gen_range(0..10));
        diagnosis_cells.push(c.clone());
        icd9.insert(c);
    }

    let height = bernoulli(rng, 0.9).then(|| (170.0 + 10.0 * std.sample(rng)).clamp(130.0, 210.0).round());
    let weight = bernoulli(rng, 0.9).then(|| ((81.0 + 18.0 * std.sample(rng)).clamp(35.0, 200.0) * 10.0).round() / 10.0);

    let patient_id = patient as i64 + 1;
    GeneratedStay {
        meta: StayMeta {
            stay_id: patient_id * 10 + stay_k as i64,
            patient_id,
            age,
            gender: if sex_female { "Female" } else { "Male" }.into(),
            ethnicity: ethnicity.into(),
            admission_diagnosis: admit.into(),
            height_cm: height,
            weight_kg: weight,
            hospital_discharge_status: status,
            unit_discharge_offset_minutes: los_minutes,
            death_offset_minutes: death_minutes,
            icd9_codes: icd9,
        },
        unique_pid: format!("{:03}-{:06}", patient / 1_000_000, patient_id),
        died_in_unit: unit_death,
        records,
        diagnosis_cells,
        phenotypes,
    }
}

/// All stays of the configured patients, in patient order.
pub fn generate_stays(cfg: &SynthConfig) -> Result<Vec<GeneratedStay>> {
    cfg.validate()?;
    let age_dist = Normal::new(62.0, 16.0).expect("valid normal");
    let mut out = Vec::with_capacity(cfg.n_patients);
    for p in 0..cfg.n_patients {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(p as u64);
        let age = if bernoulli(&mut rng, cfg.pediatric_rate) {
            rng.gen_range(10..=18) as f64
        } else {
            let a: f64 = age_dist.sample(&mut rng);
            a.clamp(19.0, 95.0).round()
        };
        let female = bernoulli(&mut rng, 0.455);
        let ethnicity = pick_weighted(&mut rng, &ETHNICITIES);
        let n_stays = if bernoulli(&mut rng, cfg.readmission_rate) { 2 } else { 1 };
        for k in 0..n_stays {
            let stay = generate_stay(cfg, p, k, &mut rng, age, female, ethnicity);
            // A patient who died cannot be readmitted.
            let done = stay.meta.hospital_discharge_status == DischargeStatus::Expired;
            out.push(stay);
            if done {
                break;
            }
        }
    }
    Ok(out)
}

fn age_cell(age: f64) -> String {
    if age > 89.0 {
        "> 89".into()
    } else {
        format!("{age:.0}")
    }
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Vec<u8>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).expect("in-memory write");
        fill(&mut w).expect("in-memory write");
        w.flush().expect("in-memory write");
    }
    buf
}

/// Serializes generated stays into the four eICU-shaped tables.
pub fn serialize(stays: &[GeneratedStay]) -> SynthOutput {
    let mut summary = SynthSummary {
        phenotype_counts: vec![0; NUM_PHENOTYPES],
        ..Default::default()
    };
    let patients: BTreeSet<i64> = stays.iter().map(|s| s.meta.patient_id).collect();
    summary.n_patients = patients.len();
    summary.n_stays = stays.len();
    for s in stays {
        let n_rec = s.records.len();
        summary.total_records += n_rec;
        if s.meta.hospital_discharge_status == DischargeStatus::Expired {
            summary.n_expired += 1;
        }
        if s.died_in_unit {
            summary.n_unit_deaths += 1;
        }
        if s.meta.age <= crate::cohort::MIN_AGE_EXCLUSIVE {
            summary.expected_excluded_age += 1;
        } else if n_rec < crate::cohort::MIN_RECORDS {
            summary.expected_excluded_records += 1;
        }
        for n in 0..NUM_PHENOTYPES {
            if s.phenotypes.get(n) {
                summary.phenotype_counts[n] += 1;
            }
        }
    }

    let patient_csv = csv_bytes(
        &[
            "patientunitstayid", "uniquepid", "gender", "age", "ethnicity", "apacheadmissiondx",
            "admissionheight", "admissionweight", "hospitaldischargestatus", "unitdischargeoffset",
            "unitdischargestatus",
        ],
        |w| {
            for s in stays {
                let m = &s.meta;
                let status = match m.hospital_discharge_status {
                    DischargeStatus::Alive => "Alive",
                    DischargeStatus::Expired => "Expired",
                    DischargeStatus::Missing => "",
                };
                w.write_record([
                    m.stay_id.to_string(),
                    s.unique_pid.clone(),
                    m.gender.clone(),
                    age_cell(m.age),
                    m.ethnicity.clone(),
                    m.admission_diagnosis.clone(),
                    m.height_cm.map(|h| format!("{h:.1}")).unwrap_or_default(),
                    m.weight_kg.map(|x| format!("{x:.1}")).unwrap_or_default(),
                    status.to_string(),
                    m.unit_discharge_offset_minutes.to_string(),
                    if s.died_in_unit { "Expired" } else { "Alive" }.to_string(),
                ])?;
            }
            Ok(())
        },
    );

    let lab_csv = csv_bytes(
        &["labid", "patientunitstayid", "labresultoffset", "labtypeid", "labname", "labresult"],
        |w| {
            let mut id = 0u64;
            for s in stays {
                for r in s.records.iter().filter(|r| r.table == TableKind::Lab) {
                    id += 1;
                    w.write_record([
                        id.to_string(),
                        s.meta.stay_id.to_string(),
                        r.offset_minutes.to_string(),
                        "3".to_string(),
                        r.item.to_string(),
                        r.value.clone(),
                    ])?;
                }
            }
            Ok(())
        },
    );

    let nurse_csv = csv_bytes(
        &[
            "nursingchartid", "patientunitstayid", "nursingchartoffset", "nursingchartentryoffset",
            "nursingchartcelltypecat", "nursingchartcelltypevallabel", "nursingchartcelltypevalname",
            "nursingchartvalue",
        ],
        |w| {
            let mut id = 0u64;
            for s in stays {
                for r in s.records.iter().filter(|r| r.table == TableKind::NurseCharting) {
                    id += 1;
                    let (cat, label) = if GCS_ITEMS.iter().any(|g| g.1 == r.item) {
                        ("Scores", "Glasgow coma score")
                    } else {
                        ("Vital Signs", r.item)
                    };
                    w.write_record([
                        id.to_string(),
                        s.meta.stay_id.to_string(),
                        r.offset_minutes.to_string(),
                        r.offset_minutes.to_string(),
                        cat.to_string(),
                        label.to_string(),
                        r.item.to_string(),
                        r.value.clone(),
                    ])?;
                }
            }
            Ok(())
        },
    );

    let diagnosis_csv = csv_bytes(
        &["diagnosisid", "patientunitstayid", "diagnosisoffset", "diagnosisstring", "icd9code"],
        |w| {
            let mut id = 0u64;
            for s in stays {
                for cell in &s.diagnosis_cells {
                    id += 1;
                    w.write_record([
                        id.to_string(),
                        s.meta.stay_id.to_string(),
                        "10".to_string(),
                        "synthetic".to_string(),
                        cell.clone(),
                    ])?;
                }
            }
            Ok(())
        },
    );

    SynthOutput {
        patient_csv,
        lab_csv,
        nurse_csv,
        diagnosis_csv,
        phenotype_map: synthetic_catalog().to_text(),
        summary,
    }
}

/// Generates and serializes a dataset.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    Ok(serialize(&generate_stays(cfg)?))
}

pub const PHENOTYPE_MAP_FILE: &str = "phenotype_map.csv";
pub const SUMMARY_FILE: &str = "synth_summary.json";

impl SynthOutput {
    /// Writes the tables (eICU file names), the phenotype map and a JSON summary.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files: [(&str, &[u8]); 6] = [
            (TableKind::Patient.file_name(), &self.patient_csv),
            (TableKind::Lab.file_name(), &self.lab_csv),
            (TableKind::NurseCharting.file_name(), &self.nurse_csv),
            (TableKind::Diagnosis.file_name(), &self.diagnosis_csv),
            (PHENOTYPE_MAP_FILE, self.phenotype_map.as_bytes()),
            (SUMMARY_FILE, &serde_json::to_vec_pretty(&self.summary)?),
        ];
        for (name, bytes) in files {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
