//! Reading eICU-shaped CSV tables.
//!
//! Source columns per variable (documented choices where eICU offers several):
//!
//! | variable | table | item |
//! |---|---|---|
//! | Heart rate | nurseCharting | `Heart Rate` |
//! | Mean/Diastolic/Systolic BP | nurseCharting | `Non-Invasive BP *` and `Invasive BP *` |
//! | O2 | nurseCharting | `O2 Saturation` |
//! | Respiratory rate | nurseCharting | `Respiratory Rate` |
//! | Temperature | nurseCharting | `Temperature (C)` (vitalPeriodic is not read) |
//! | Glucose | lab | `glucose`, `bedside glucose` |
//! | FiO2, pH | lab | `FiO2`, `pH` |
//! | GCS Total/Eyes/Motor/Verbal | nurseCharting | `GCS Total`, `Eyes`, `Motor`, `Verbal` (physicalExam is not read) |
//! | Age, Height, Weight, Gender, Ethnicity, Admission diagnosis | patient | static per stay |
//!
//! Record tables are streamed row by row; only the per-stay grouping step
//! holds records in memory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use csv::StringRecord;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::phenotype::normalize_code;
use crate::schema::Schema;
use crate::types::{DischargeStatus, PatientId, StayId, StayMeta, StayRecordRaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TableKind {
    Patient,
    Lab,
    NurseCharting,
    Diagnosis,
}

impl TableKind {
    pub fn file_name(self) -> &'static str {
        match self {
            TableKind::Patient => "patient.csv",
            TableKind::Lab => "lab.csv",
            TableKind::NurseCharting => "nurseCharting.csv",
            TableKind::Diagnosis => "diagnosis.csv",
        }
    }

    fn name(self) -> &'static str {
        match self {
            TableKind::Patient => "patient",
            TableKind::Lab => "lab",
            TableKind::NurseCharting => "nursecharting",
            TableKind::Diagnosis => "diagnosis",
        }
    }
}

/// Fixed structural columns of the long-format record tables.
struct RecordLayout {
    stay: &'static str,
    offset: &'static str,
    item: &'static str,
    value: &'static str,
}

const LAB_LAYOUT: RecordLayout = RecordLayout {
    stay: "patientunitstayid",
    offset: "labresultoffset",
    item: "labname",
    value: "labresult",
};

const NURSE_LAYOUT: RecordLayout = RecordLayout {
    stay: "patientunitstayid",
    offset: "nursingchartoffset",
    item: "nursingchartcelltypevalname",
    value: "nursingchartvalue",
};

const DIAGNOSIS_STAY: &str = "patientunitstayid";
const DIAGNOSIS_CODE: &str = "icd9code";

// StayMeta targets for the patient table.
pub const META_STAY_ID: &str = "stay_id";
pub const META_PATIENT_ID: &str = "patient_id";
pub const META_HOSPITAL_STATUS: &str = "hospital_discharge_status";
pub const META_UNIT_STATUS: &str = "unit_discharge_status";
pub const META_UNIT_DISCHARGE: &str = "unit_discharge_offset_minutes";

const META_FIELDS: [&str; 5] = [
    META_STAY_ID,
    META_PATIENT_ID,
    META_HOSPITAL_STATUS,
    META_UNIT_STATUS,
    META_UNIT_DISCHARGE,
];

/// A CSV file plus how its columns (patient table) or item labels (lab and
/// nurse charting) map onto schema variables and stay fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSource {
    pub path: PathBuf,
    pub table: TableKind,
    pub column_map: BTreeMap<String, String>,
}

impl TableSource {
    /// The eICU-CRD file name and default mapping for `table` inside `dir`.
    pub fn eicu(dir: &Path, table: TableKind) -> Self {
        let pairs: &[(&str, &str)] = match table {
            TableKind::Patient => &[
                ("patientunitstayid", META_STAY_ID),
                ("uniquepid", META_PATIENT_ID),
                ("age", "Age"),
                ("gender", "Gender"),
                ("ethnicity", "Ethnicity"),
                ("apacheadmissiondx", "Admission diagnosis"),
                ("admissionheight", "Height"),
                ("admissionweight", "Weight"),
                ("hospitaldischargestatus", META_HOSPITAL_STATUS),
                ("unitdischargestatus", META_UNIT_STATUS),
                ("unitdischargeoffset", META_UNIT_DISCHARGE),
            ],
            TableKind::Lab => &[
                ("glucose", "Glucose"),
                ("bedside glucose", "Glucose"),
                ("FiO2", "FiO2"),
                ("pH", "pH"),
            ],
            TableKind::NurseCharting => &[
                ("Heart Rate", "Heart rate"),
                ("Non-Invasive BP Mean", "Mean arterial pressure"),
                ("Invasive BP Mean", "Mean arterial pressure"),
                ("Non-Invasive BP Diastolic", "Diastolic blood pressure"),
                ("Invasive BP Diastolic", "Diastolic blood pressure"),
                ("Non-Invasive BP Systolic", "Systolic blood pressure"),
                ("Invasive BP Systolic", "Systolic blood pressure"),
                ("O2 Saturation", "O2"),
                ("Respiratory Rate", "Respiratory rate"),
                ("Temperature (C)", "Temperature"),
                ("GCS Total", "Glasgow Coma Score Total"),
                ("Eyes", "Glasgow Coma Score Eyes"),
                ("Motor", "Glasgow Coma Score Motor"),
                ("Verbal", "Glasgow Coma Score Verbal"),
            ],
            TableKind::Diagnosis => &[],
        };
        Self {
            path: dir.join(table.file_name()),
            table,
            column_map: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    fn expect(&self, table: TableKind) -> Result<()> {
        if self.table != table {
            return Err(Error::Config(format!(
                "expected a {} table source, got {}",
                table.name(),
                self.table.name()
            )));
        }
        Ok(())
    }

    fn open(&self) -> Result<(csv::Reader<File>, StringRecord)> {
        let file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(file);
        let headers = rdr.headers()?.clone();
        Ok((rdr, headers))
    }

    fn column(&self, headers: &StringRecord, name: &str) -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                table: self.table.name().to_string(),
                column: name.to_string(),
            })
    }
}

/// Row counts and skip reasons collected while reading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows_read: BTreeMap<String, u64>,
    pub rows_emitted: BTreeMap<String, u64>,
    /// Rows whose item label is not mapped to a schema variable.
    pub filtered_unmapped: BTreeMap<String, u64>,
    /// `(table, reason) → count` for rows dropped as malformed.
    pub skipped: BTreeMap<(String, String), u64>,
}

impl IngestReport {
    fn read(&mut self, table: TableKind) {
        *self.rows_read.entry(table.name().into()).or_default() += 1;
    }

    fn emitted(&mut self, table: TableKind) {
        *self.rows_emitted.entry(table.name().into()).or_default() += 1;
    }

    fn skip(&mut self, table: TableKind, reason: &str) {
        *self
            .skipped
            .entry((table.name().into(), reason.into()))
            .or_default() += 1;
    }

    pub fn total_skipped(&self) -> u64 {
        self.skipped.values().sum()
    }

    pub fn merge(&mut self, other: &IngestReport) {
        for (k, v) in &other.rows_read {
            *self.rows_read.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.rows_emitted {
            *self.rows_emitted.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.filtered_unmapped {
            *self.filtered_unmapped.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.skipped {
            *self.skipped.entry(k.clone()).or_default() += v;
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("ingestion report\n");
        let tables: BTreeSet<&String> = self.rows_read.keys().collect();
        for t in tables {
            let _ = writeln!(
                out,
                "  {t:<14} read {:>10}  emitted {:>10}  unmapped {:>10}",
                self.rows_read.get(t).copied().unwrap_or(0),
                self.rows_emitted.get(t).copied().unwrap_or(0),
                self.filtered_unmapped.get(t).copied().unwrap_or(0),
            );
        }
        if self.skipped.is_empty() {
            out.push_str("  skipped rows: none\n");
        } else {
            out.push_str("  skipped rows:\n");
            for ((t, reason), n) in &self.skipped {
                let _ = writeln!(out, "    {t:<14} {reason:<28} {n:>10}");
            }
        }
        out
    }
}

/// Parses an eICU age cell. The masked bucket `> 89` becomes 90.
pub fn parse_age(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.starts_with('>') {
        return Some(90.0);
    }
    cell.parse::<f64>().ok().filter(|a| a.is_finite())
}

/// eICU `uniquepid` values look like `002-34851`; integers pass through and
/// anything else is hashed to a stable non-negative id.
pub fn parse_patient_id(cell: &str) -> Option<PatientId> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    if let Ok(id) = cell.parse::<i64>() {
        return Some(id);
    }
    let digest = Sha256::digest(cell.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    Some((u64::from_le_bytes(bytes) >> 1) as i64)
}

fn parse_int(cell: &str) -> Option<i64> {
    let cell = cell.trim();
    cell.parse::<i64>()
        .ok()
        .or_else(|| cell.parse::<f64>().ok().filter(|x| x.fract() == 0.0).map(|x| x as i64))
}

fn parse_measure(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|x| x.is_finite() && *x > 0.0)
}

/// One `StayMeta` per patient-unit-stay row. Malformed rows are skipped and
/// counted in the returned report.
pub fn load_stay_meta(src: &TableSource) -> Result<(Vec<StayMeta>, IngestReport)> {
    src.expect(TableKind::Patient)?;
    let schema = crate::schema::canonical_schema();
    for target in src.column_map.values() {
        if !META_FIELDS.contains(&target.as_str()) && schema.index_of(target).is_none() {
            return Err(Error::Config(format!(
                "patient column_map target `{target}` is neither a schema variable nor a stay field"
            )));
        }
    }
    let (mut rdr, headers) = src.open()?;
    let by_target: BTreeMap<&str, &str> = src
        .column_map
        .iter()
        .map(|(col, target)| (target.as_str(), col.as_str()))
        .collect();
    let required = |target: &str| -> Result<usize> {
        let col = by_target.get(target).ok_or_else(|| {
            Error::Config(format!("patient column_map has no source for `{target}`"))
        })?;
        src.column(&headers, col)
    };
    let optional = |target: &str| -> Option<usize> {
        by_target
            .get(target)
            .and_then(|col| headers.iter().position(|h| h.trim() == *col))
    };

    let i_stay = required(META_STAY_ID)?;
    let i_patient = required(META_PATIENT_ID)?;
    let i_age = required("Age")?;
    let i_hstatus = required(META_HOSPITAL_STATUS)?;
    let i_ustatus = required(META_UNIT_STATUS)?;
    let i_discharge = required(META_UNIT_DISCHARGE)?;
    let i_gender = optional("Gender");
    let i_ethnicity = optional("Ethnicity");
    let i_admit = optional("Admission diagnosis");
    let i_height = optional("Height");
    let i_weight = optional("Weight");

    let mut report = IngestReport::default();
    let mut metas = Vec::new();
    let mut row = StringRecord::new();
    while rdr.read_record(&mut row)? {
        report.read(TableKind::Patient);
        let cell = |i: usize| row.get(i).unwrap_or("");
        let text = |i: Option<usize>| i.map(|i| cell(i).trim().to_string()).unwrap_or_default();
        let Some(stay_id) = parse_int(cell(i_stay)) else {
            report.skip(TableKind::Patient, "bad stay id");
            continue;
        };
        let Some(patient_id) = parse_patient_id(cell(i_patient)) else {
            report.skip(TableKind::Patient, "bad patient id");
            continue;
        };
        let Some(age) = parse_age(cell(i_age)) else {
            report.skip(TableKind::Patient, "bad age");
            continue;
        };
        let Some(discharge) = parse_int(cell(i_discharge)) else {
            report.skip(TableKind::Patient, "bad unit discharge offset");
            continue;
        };
        let Ok(hospital_status) = cell(i_hstatus).parse::<DischargeStatus>() else {
            report.skip(TableKind::Patient, "bad discharge status");
            continue;
        };
        let died_in_unit = cell(i_ustatus).trim().eq_ignore_ascii_case("expired");
        // A unit death is a hospital death even when the hospital column is blank.
        let hospital_status = if died_in_unit {
            DischargeStatus::Expired
        } else {
            hospital_status
        };
        report.emitted(TableKind::Patient);
        metas.push(StayMeta {
            stay_id,
            patient_id,
            age,
            gender: text(i_gender),
            ethnicity: text(i_ethnicity),
            admission_diagnosis: text(i_admit),
            height_cm: i_height.and_then(|i| parse_measure(cell(i))),
            weight_kg: i_weight.and_then(|i| parse_measure(cell(i))),
            hospital_discharge_status: hospital_status,
            unit_discharge_offset_minutes: discharge,
            death_offset_minutes: died_in_unit.then_some(discharge),
            icd9_codes: BTreeSet::new(),
        });
    }
    Ok((metas, report))
}

/// Streaming reader over a lab or nurse-charting table.
pub struct RecordStream {
    table: TableKind,
    reader: csv::Reader<File>,
    row: StringRecord,
    cols: [usize; 4],
    item_map: BTreeMap<String, usize>,
    report: IngestReport,
    done: bool,
}

impl RecordStream {
    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn into_report(self) -> IngestReport {
        self.report
    }
}

impl Iterator for RecordStream {
    type Item = Result<StayRecordRaw>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.reader.read_record(&mut self.row) {
                Ok(true) => {}
                Ok(false) => {
                    self.done = true;
                    return None;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
            let table = self.table;
            self.report.read(table);
            let [i_stay, i_offset, i_item, i_value] = self.cols;
            let item = self.row.get(i_item).unwrap_or("").trim();
            let Some(&variable) = self.item_map.get(item) else {
                *self
                    .report
                    .filtered_unmapped
                    .entry(table.name().into())
                    .or_default() += 1;
                continue;
            };
            let Some(stay_id) = self.row.get(i_stay).and_then(parse_int) else {
                self.report.skip(table, "bad stay id");
                continue;
            };
            let Some(offset_minutes) = self.row.get(i_offset).and_then(parse_int) else {
                self.report.skip(table, "bad offset");
                continue;
            };
            self.report.emitted(table);
            return Some(Ok(StayRecordRaw {
                stay_id,
                variable,
                offset_minutes,
                value: self.row.get(i_value).unwrap_or("").to_string(),
            }));
        }
    }
}

/// Streams the rows of a lab or nurse-charting table whose item maps onto a
/// schema variable, in file order.
pub fn load_records(src: &TableSource, schema: &Schema) -> Result<RecordStream> {
    let layout = match src.table {
        TableKind::Lab => &LAB_LAYOUT,
        TableKind::NurseCharting => &NURSE_LAYOUT,
        other => {
            return Err(Error::Config(format!(
                "load_records needs a lab or nursecharting source, got {}",
                other.name()
            )))
        }
    };
    let mut item_map = BTreeMap::new();
    for (item, target) in &src.column_map {
        let idx = schema.index_of(target).ok_or_else(|| {
            Error::Config(format!("column_map target `{target}` is not a schema variable"))
        })?;
        item_map.insert(item.trim().to_string(), idx);
    }
    let (reader, headers) = src.open()?;
    let cols = [
        src.column(&headers, layout.stay)?,
        src.column(&headers, layout.offset)?,
        src.column(&headers, layout.item)?,
        src.column(&headers, layout.value)?,
    ];
    Ok(RecordStream {
        table: src.table,
        reader,
        row: StringRecord::new(),
        cols,
        item_map,
        report: IngestReport::default(),
        done: false,
    })
}

/// Stay id → normalized ICD-9 codes. Cells holding several comma-separated
/// codes are split.
pub fn load_diagnoses(src: &TableSource) -> Result<(BTreeMap<StayId, BTreeSet<String>>, IngestReport)> {
    src.expect(TableKind::Diagnosis)?;
    let (mut rdr, headers) = src.open()?;
    let i_stay = src.column(&headers, DIAGNOSIS_STAY)?;
    let i_code = src.column(&headers, DIAGNOSIS_CODE)?;
    let mut out: BTreeMap<StayId, BTreeSet<String>> = BTreeMap::new();
    let mut report = IngestReport::default();
    let mut row = StringRecord::new();
    while rdr.read_record(&mut row)? {
        report.read(TableKind::Diagnosis);
        let Some(stay) = row.get(i_stay).and_then(parse_int) else {
            report.skip(TableKind::Diagnosis, "bad stay id");
            continue;
        };
        let codes: Vec<String> = row
            .get(i_code)
            .unwrap_or("")
            .split(',')
            .map(normalize_code)
            .filter(|c| !c.is_empty())
            .collect();
        if codes.is_empty() {
            *report
                .filtered_unmapped
                .entry(TableKind::Diagnosis.name().into())
                .or_default() += 1;
            continue;
        }
        report.emitted(TableKind::Diagnosis);
        out.entry(stay).or_default().extend(codes);
    }
    Ok((out, report))
}

/// Everything read from one data directory, grouped per stay.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub metas: Vec<StayMeta>,
    /// Mapped lab + nurse-charting records per stay, in file order (lab first).
    pub records: BTreeMap<StayId, Vec<StayRecordRaw>>,
    pub report: IngestReport,
}

impl Dataset {
    /// Total mapped records per stay (lab + nurse charting, any offset).
    pub fn record_counts(&self) -> BTreeMap<StayId, usize> {
        self.metas
            .iter()
            .map(|m| (m.stay_id, self.records.get(&m.stay_id).map_or(0, Vec::len)))
            .collect()
    }

    pub fn meta(&self, stay: StayId) -> Option<&StayMeta> {
        self.metas
            .binary_search_by_key(&stay, |m| m.stay_id)
            .ok()
            .map(|i| &self.metas[i])
    }
}

fn collect_stream(stream: RecordStream) -> Result<(Vec<StayRecordRaw>, IngestReport)> {
    let mut stream = stream;
    let mut out = Vec::new();
    for rec in stream.by_ref() {
        out.push(rec?);
    }
    Ok((out, stream.into_report()))
}

/// Reads the four eICU tables from `dir`. Lab and nurse-charting files are
/// read concurrently; grouping by stay happens after both are complete.
pub fn load_dataset(dir: &Path, schema: &Schema) -> Result<Dataset> {
    let patient = TableSource::eicu(dir, TableKind::Patient);
    let lab = TableSource::eicu(dir, TableKind::Lab);
    let nurse = TableSource::eicu(dir, TableKind::NurseCharting);
    let diagnosis = TableSource::eicu(dir, TableKind::Diagnosis);

    let (mut metas, mut report) = load_stay_meta(&patient)?;
    let lab_stream = load_records(&lab, schema)?;
    let nurse_stream = load_records(&nurse, schema)?;
    let (lab_res, nurse_res) = std::thread::scope(|s| {
        let h = s.spawn(move || collect_stream(lab_stream));
        let nurse_res = collect_stream(nurse_stream);
        (h.join().expect("lab reader panicked"), nurse_res)
    });
    let (lab_recs, lab_report) = lab_res?;
    let (nurse_recs, nurse_report) = nurse_res?;
    report.merge(&lab_report);
    report.merge(&nurse_report);

    let (diagnoses, diag_report) = if diagnosis.path.exists() {
        load_diagnoses(&diagnosis)?
    } else {
        (BTreeMap::new(), IngestReport::default())
    };
    report.merge(&diag_report);

    metas.sort_by_key(|m| m.stay_id);
    if let Some(w) = metas.windows(2).find(|w| w[0].stay_id == w[1].stay_id) {
        return Err(Error::Data(format!("duplicate stay id {} in patient table", w[0].stay_id)));
    }
    for m in &mut metas {
        if let Some(codes) = diagnoses.get(&m.stay_id) {
            m.icd9_codes = codes.clone();
        }
    }

    let mut records: BTreeMap<StayId, Vec<StayRecordRaw>> = BTreeMap::new();
    for rec in lab_recs.into_iter().chain(nurse_recs) {
        records.entry(rec.stay_id).or_default().push(rec);
    }
    Ok(Dataset {
        metas,
        records,
        report,
    })
}

/// Reads a whole file; used for content hashing of inputs.
pub(crate) fn hash_file(path: &Path, hasher: &mut Sha256) -> Result<()> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::canonical_schema;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    const PATIENT_HEADER: &str = "patientunitstayid,uniquepid,gender,age,ethnicity,apacheadmissiondx,admissionheight,admissionweight,hospitaldischargestatus,unitdischargeoffset,unitdischargestatus\n";

    #[test]
    fn stay_meta_parsing() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "patient.csv",
            &format!(
                "{PATIENT_HEADER}\
                 1,002-1,Female,> 89,Caucasian,\"Sepsis, pulmonary\",160.0,70,Expired,3000,Expired\n\
                 2,002-2,Male,45,,CHF,,,Alive,1500,Alive\n\
                 3,002-3,Male,abc,,CHF,,,Alive,1500,Alive\n\
                 4,002-4,Male,50,,CHF,,,,900,Alive\n\
                 5,002-5,Male,51,,CHF,,,Expired,900,Alive\n"
            ),
        );
        let src = TableSource::eicu(dir.path(), TableKind::Patient);
        let (metas, report) = load_stay_meta(&src).unwrap();
        assert_eq!(metas.len(), 4);
        assert_eq!(metas[0].age, 90.0);
        assert_eq!(metas[0].hospital_discharge_status, DischargeStatus::Expired);
        assert_eq!(metas[0].death_offset_minutes, Some(3000));
        assert_eq!(metas[0].admission_diagnosis, "Sepsis, pulmonary");
        assert_eq!(metas[0].height_cm, Some(160.0));
        assert_eq!(metas[1].hospital_discharge_status, DischargeStatus::Alive);
        assert_eq!(metas[1].ethnicity, "");
        assert_eq!(metas[1].height_cm, None);
        assert_eq!(metas[2].hospital_discharge_status, DischargeStatus::Missing);
        // Hospital death after unit discharge carries no death offset.
        assert_eq!(metas[3].hospital_discharge_status, DischargeStatus::Expired);
        assert_eq!(metas[3].death_offset_minutes, None);
        assert_eq!(report.total_skipped(), 1);
        assert_ne!(metas[0].patient_id, metas[1].patient_id);
    }

    #[test]
    fn missing_stay_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "patient.csv", "uniquepid,age,hospitaldischargestatus,unitdischargeoffset,unitdischargestatus\nx,40,Alive,100,Alive\n");
        let src = TableSource::eicu(dir.path(), TableKind::Patient);
        match load_stay_meta(&src) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "patientunitstayid"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn lab_records_filtered_and_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "lab.csv",
            "patientunitstayid,labresultoffset,labname,labresult\n7,95,pH,7.31\n7,100,sodium,140\n7,-30,glucose, 110 \n",
        );
        let schema = canonical_schema();
        let mut stream = load_records(&TableSource::eicu(dir.path(), TableKind::Lab), &schema).unwrap();
        let recs: Vec<_> = stream.by_ref().map(Result::unwrap).collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(
            recs[0],
            StayRecordRaw {
                stay_id: 7,
                variable: schema.index_of("pH").unwrap(),
                offset_minutes: 95,
                value: "7.31".into()
            }
        );
        assert_eq!(recs[1].offset_minutes, -30);
        assert_eq!(recs[1].value, " 110 ");
        assert_eq!(stream.report().filtered_unmapped["lab"], 1);
    }

    #[test]
    fn diagnoses_split_and_normalize() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "diagnosis.csv",
            "patientunitstayid,diagnosisoffset,diagnosisstring,icd9code\n\
             1,10,sepsis,\"038.9, A41.9\"\n\
             1,20,x,038.9\n\
             2,5,y,v45.81\n\
             3,5,z,\"\"\n\
             4,5,w,\"401.9,428.0\"\n",
        );
        let (map, _) = load_diagnoses(&TableSource::eicu(dir.path(), TableKind::Diagnosis)).unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(
            map[&1],
            ["038.9", "A41.9"].iter().map(|s| s.to_string()).collect()
        );
        assert!(map[&2].contains("V45.81"));
        assert!(!map.contains_key(&3));
        let union: BTreeSet<&String> = map.values().flatten().collect();
        assert_eq!(union.len(), 5);
    }

    #[test]
    fn wrong_table_kind_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let schema = canonical_schema();
        assert!(load_records(&TableSource::eicu(dir.path(), TableKind::Patient), &schema).is_err());
        assert!(load_diagnoses(&TableSource::eicu(dir.path(), TableKind::Lab)).is_err());
    }

    #[test]
    fn bad_column_map_target_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "lab.csv", "patientunitstayid,labresultoffset,labname,labresult\n");
        let mut src = TableSource::eicu(dir.path(), TableKind::Lab);
        src.column_map.insert("sodium".into(), "Sodium".into());
        assert!(matches!(load_records(&src, &canonical_schema()), Err(Error::Config(_))));
    }

    #[test]
    fn age_and_patient_id_rules() {
        assert_eq!(parse_age("> 89"), Some(90.0));
        assert_eq!(parse_age(" 45 "), Some(45.0));
        assert_eq!(parse_age(""), None);
        assert_eq!(parse_patient_id("12"), Some(12));
        assert_eq!(parse_patient_id("002-1"), parse_patient_id("002-1"));
        assert!(parse_patient_id("002-1").unwrap() >= 0);
        assert_eq!(parse_patient_id(" "), None);
    }
}
