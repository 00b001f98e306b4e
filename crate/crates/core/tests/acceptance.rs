//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Criterion 10 needs the credentialed eICU
//! database and is reported as skipped.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use icubench::cohort::{build_decomp_instances, build_los_instances, select_base_cohort};
use icubench::eval::{aggregate_folds, auprc, auroc, operating_point, r2, t_test, TestKind};
use icubench::experiment::{execute, run_prepared, ExperimentConfig, ExperimentTask, Prepared, REPORT_JSON};
use icubench::ingest::load_dataset;
use icubench::neural::{bce, grad_check, Encoding, Model, ModelKind, ModelSpec, SeqInput, VariableSet};
use icubench::preprocess::{bin_hourly, build_grid, build_vocabs, Aggregator, BinPolicy, UNOBSERVED_CAT};
use icubench::schema::{canonical_schema, Schema, VariableKind, NUM_CATEGORICAL, NUM_NUMERICAL, NUM_VARIABLES, UNKNOWN};
use icubench::synth::SynthConfig;
use icubench::types::{DischargeStatus, HourlyGrid, Label, StayMeta, StayRecordRaw, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

const GC_VOCAB: [usize; NUM_CATEGORICAL] = [40, 60, 20, 30, 10, 25, 20];

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut min_checked = usize::MAX;
    let mut runs = 0;
    for kind in [ModelKind::Linear, ModelKind::Ann, ModelKind::BiLstm] {
        for task in [Task::Mortality, Task::Los, Task::Phenotyping, Task::Decompensation] {
            for encoding in [Encoding::Ohe, Encoding::Embedding] {
                let mut spec = ModelSpec::new(kind, task, encoding, VariableSet::All, GC_VOCAB);
                spec.hidden = 6;
                spec.ann_hidden = 8;
                let model = Model::new(spec, [0; 32], rng.gen()).map_err(|e| e.to_string())?;
                let seqs: Vec<(Vec<f64>, Vec<u32>)> = (0..3)
                    .map(|_| {
                        let num = (0..6 * NUM_NUMERICAL).map(|_| rng.gen_range(-1.5..1.5)).collect();
                        let cat = (0..6 * NUM_CATEGORICAL).map(|i| rng.gen_range(0..GC_VOCAB[i % NUM_CATEGORICAL]) as u32).collect();
                        (num, cat)
                    })
                    .collect();
                let targets: Vec<Vec<f64>> = (0..3)
                    .map(|_| match task {
                        Task::Phenotyping => (0..25).map(|_| f64::from(u8::from(rng.gen_bool(0.3)))).collect(),
                        Task::Los => vec![rng.gen_range(0.2..4.0)],
                        _ => vec![f64::from(u8::from(rng.gen_bool(0.5)))],
                    })
                    .collect();
                let batch: Vec<SeqInput<'_>> = seqs.iter().map(|(n, c)| SeqInput::new(n, c).unwrap()).collect();
                let tr: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
                let rep = grad_check(&model, &batch, &tr, 1e-5, 200, rng.gen()).map_err(|e| e.to_string())?;
                let sampled = rep.n_checked + rep.kinks.len();
                ensure(sampled >= 200, || format!("{kind:?}/{task}/{encoding:?}: only {sampled} coordinates"))?;
                ensure(rep.max_rel_error < 1e-4, || {
                    format!("{kind:?}/{task}/{encoding:?}: relative error {:.3e} at {:?}", rep.max_rel_error, rep.worst)
                })?;
                worst = worst.max(rep.max_rel_error);
                min_checked = min_checked.min(rep.n_checked);
                runs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{runs} model/head/encoding checks, >= {min_checked} coordinates each, max rel error {worst:.2e}, {secs:.1} s"))
}

// ---------------------------------------------------------------- 2

fn brute_auroc(s: &[f64], y: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

/// Σ over distinct thresholds, high to low, of precision × recall increment.
fn brute_auprc(s: &[f64], y: &[bool]) -> f64 {
    let mut th: Vec<f64> = s.to_vec();
    th.sort_by(|a, b| b.total_cmp(a));
    th.dedup();
    let p = y.iter().filter(|&&v| v).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in th {
        let tp = s.iter().zip(y).filter(|(&v, &l)| v >= t && l).count() as f64;
        let k = s.iter().filter(|&&v| v >= t).count() as f64;
        let recall = tp / p;
        ap += (recall - prev_recall) * (tp / k);
        prev_recall = recall;
    }
    ap
}

/// Largest score cutoff with 10·TP ≥ 9·P, by sweeping every distinct score.
fn sweep_operating_point(s: &[f64], y: &[bool]) -> (f64, f64, f64, f64, Option<f64>) {
    let p = y.iter().filter(|&&v| v).count();
    let n = y.len() - p;
    let mut th: Vec<f64> = s.to_vec();
    th.sort_by(|a, b| b.total_cmp(a));
    th.dedup();
    for t in th {
        let tp = s.iter().zip(y).filter(|(&v, &l)| v >= t && l).count();
        if 10 * tp >= 9 * p {
            let fp = s.iter().zip(y).filter(|(&v, &l)| v >= t && !l).count();
            let tn = n - fp;
            let fneg = p - tp;
            let npv = (tn + fneg > 0).then(|| tn as f64 / (tn + fneg) as f64);
            return (t, tp as f64 / p as f64, tn as f64 / n as f64, tp as f64 / (tp + fp) as f64, npv);
        }
    }
    unreachable!("the lowest threshold admits every positive")
}

fn random_instance(rng: &mut ChaCha8Rng, need_negative: bool) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.gen_range(2..=200);
        let levels = rng.gen_range(2..=50);
        let prev = rng.gen_range(0.05..0.95);
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..levels)) / 7.0).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(prev)).collect();
        let pos = y.iter().any(|&v| v);
        let neg = y.iter().any(|&v| !v);
        if pos && (neg || !need_negative) {
            return (s, y);
        }
    }
}

fn criterion_metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for k in 0..500 {
        let (s, y) = random_instance(&mut rng, true);
        let a = auroc(&s, &y).map_err(|e| e.to_string())?;
        let b = brute_auroc(&s, &y);
        ensure((a - b).abs() <= 1e-12, || format!("AUROC instance {k}: {a} vs {b}"))?;
    }
    for k in 0..200 {
        let (s, y) = random_instance(&mut rng, true);
        let op = operating_point(&s, &y, 0.9).map_err(|e| e.to_string())?;
        let (t, sens, spec, ppv, npv) = sweep_operating_point(&s, &y);
        let npv_ok = match (op.npv, npv) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        ensure(
            op.threshold == t
                && (op.sensitivity - sens).abs() <= 1e-12
                && (op.specificity - spec).abs() <= 1e-12
                && (op.ppv - ppv).abs() <= 1e-12
                && npv_ok,
            || format!("operating point instance {k}: {op:?} vs sweep ({t}, {sens}, {spec}, {ppv}, {npv:?})"),
        )?;
    }
    for k in 0..100 {
        let (s, y) = random_instance(&mut rng, false);
        let a = auprc(&s, &y).map_err(|e| e.to_string())?;
        let b = brute_auprc(&s, &y);
        ensure((a - b).abs() <= 1e-12, || format!("AUPRC instance {k}: {a} vs {b}"))?;
    }
    Ok("500 AUROC, 200 operating-point and 100 AUPRC instances agree with brute force".into())
}

// ---------------------------------------------------------------- 3

fn criterion_closed_forms() -> Outcome {
    let a = auroc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).map_err(|e| e.to_string())?;
    ensure(a == 0.75, || format!("AUROC example = {a}"))?;
    let l = bce(0.5, 1.0);
    ensure((l - std::f64::consts::LN_2).abs() <= 1e-12, || format!("BCE(0.5, 1) = {l}"))?;
    let agg = aggregate_folds(&[1.0, 2.0, 3.0, 4.0, 5.0]).map_err(|e| e.to_string())?;
    ensure(agg.mean == 3.0 && (agg.ci95 - 1.963).abs() <= 1e-3, || format!("aggregate = {agg:?}"))?;
    let y = [1.0, 2.0, 3.0, 4.0, 5.0];
    let r = r2(&[3.0; 5], &y).map_err(|e| e.to_string())?;
    ensure(r == 0.0, || format!("R² of the mean predictor = {r}"))?;
    Ok(format!("AUROC 0.75, BCE ln 2, CI half-width {:.4}, R² 0", agg.ci95))
}

// ---------------------------------------------------------------- 4

fn criterion_ohe_embedding() -> Outcome {
    let data = common::synth_dir(&common::synth_cfg(300, 404, 1.5));
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut base = common::small_experiment(data.path(), out.path());
    base.folds = 3;
    let prepared = Prepared::load(&base).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for model in [ModelKind::Linear, ModelKind::Ann, ModelKind::BiLstm] {
        let mut ohe = base.clone();
        ohe.model = model;
        ohe.encoding = Encoding::Ohe;
        let mut emb = ohe.clone();
        emb.encoding = Encoding::Embedding;
        emb.hyper.identity_embeddings = true;
        let a = run_prepared(&ohe, &prepared).map_err(|e| e.to_string())?;
        let b = run_prepared(&emb, &prepared).map_err(|e| e.to_string())?;
        for (fa, fb) in a.predictions.iter().zip(&b.predictions) {
            ensure(fa.stay_ids == fb.stay_ids, || "fold membership differs".into())?;
            for (pa, pb) in fa.predictions.iter().zip(&fb.predictions) {
                let same = pa.iter().zip(pb).all(|(x, y)| x.to_bits() == y.to_bits());
                ensure(same, || format!("{model:?}: {pa:?} vs {pb:?}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} test predictions bitwise identical across lr/ann/bilstm"))
}

// ---------------------------------------------------------------- 5

/// Per-bin reference: collect the bin's entries in offset order, keep the
/// last parseable value, or the mean of parseable values when the final
/// entry does not parse.
fn reference_bin(records: &[StayRecordRaw], n_hours: usize, schema: &Schema, agg: Aggregator) -> (Vec<f64>, Vec<bool>, Vec<u32>) {
    let mut numeric = vec![f64::NAN; n_hours * NUM_NUMERICAL];
    let mut mask = vec![false; n_hours * NUM_NUMERICAL];
    let mut cats = vec![UNOBSERVED_CAT; n_hours * NUM_CATEGORICAL];
    for h in 0..n_hours {
        for v in 0..NUM_VARIABLES {
            let lo = h as i64 * 60;
            let mut entries: Vec<(i64, usize, &str)> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.variable == v && r.offset_minutes >= lo && r.offset_minutes < lo + 60)
                .map(|(i, r)| (r.offset_minutes, i, r.value.as_str()))
                .collect();
            entries.sort();
            if v < NUM_NUMERICAL {
                let parsed: Vec<Option<f64>> = entries
                    .iter()
                    .map(|e| e.2.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect();
                let good: Vec<f64> = parsed.iter().flatten().copied().collect();
                if good.is_empty() {
                    continue;
                }
                let k = h * NUM_NUMERICAL + v;
                mask[k] = true;
                let last_ok = parsed.last().is_some_and(Option::is_some);
                numeric[k] = match agg {
                    Aggregator::LastValid => *good.last().unwrap(),
                    Aggregator::MeanFallback if last_ok => *good.last().unwrap(),
                    Aggregator::MeanFallback => good.iter().sum::<f64>() / good.len() as f64,
                };
            } else if let Some(e) = entries.iter().rev().find(|e| !e.2.trim().is_empty()) {
                cats[h * NUM_CATEGORICAL + v - NUM_NUMERICAL] = schema.variables[v].vocab_index(e.2.trim());
            }
        }
    }
    (numeric, mask, cats)
}

fn criterion_preprocessing() -> Outcome {
    let cfg = SynthConfig {
        readmission_rate: 0.0,
        ..common::synth_cfg(1000, 505, 1.0)
    }
    .with_uniform_missingness(0.3);
    let data = common::synth_dir(&cfg);
    let schema = canonical_schema();
    let ds = load_dataset(data.path(), &schema).map_err(|e| e.to_string())?;
    ensure(ds.metas.len() == 1000, || format!("{} stays generated", ds.metas.len()))?;
    let empty = Vec::new();
    let vocab = build_vocabs(&schema, ds.metas.iter().map(|m| (m, ds.records.get(&m.stay_id).unwrap_or(&empty).as_slice())));
    let sizes = vocab.schema.vocab_sizes().map_err(|e| e.to_string())?;
    let policy = BinPolicy::default();
    let mut cells = 0usize;
    for m in &ds.metas {
        let g = build_grid(m, ds.records.get(&m.stay_id).unwrap_or(&empty), &vocab.schema, &policy);
        let missing_num = g.numeric.iter().filter(|x| !x.is_finite()).count();
        let bad_cat = g.categorical.iter().enumerate().filter(|(k, &c)| c as usize >= sizes[k % NUM_CATEGORICAL]).count();
        ensure(missing_num == 0 && bad_cat == 0 && g.is_complete(&sizes), || {
            format!("stay {}: {missing_num} missing numeric, {bad_cat} invalid categorical cells", m.stay_id)
        })?;
        cells += g.numeric.len() + g.categorical.len();
    }

    let mut schema = canonical_schema();
    for v in schema.variables.iter_mut().filter(|v| v.kind == VariableKind::Categorical) {
        v.vocab = Some(vec![UNKNOWN.into(), "a".into(), "b".into(), "c".into()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5050);
    let tokens = ["", " ", "err", "NaN", "inf", "a", "b", "c", "zz"];
    for k in 0..10_000 {
        let n_hours = rng.gen_range(1..=30);
        let n = rng.gen_range(0..80);
        let records: Vec<StayRecordRaw> = (0..n)
            .map(|_| {
                let variable = rng.gen_range(0..NUM_VARIABLES);
                let offset_minutes = rng.gen_range(-90..n_hours as i64 * 60 + 90);
                let value = if rng.gen_bool(0.7) {
                    format!("{:.2}", rng.gen_range(-50.0..200.0))
                } else {
                    tokens[rng.gen_range(0..tokens.len())].to_string()
                };
                StayRecordRaw {
                    stay_id: 1,
                    variable,
                    offset_minutes,
                    value,
                }
            })
            .collect();
        for agg in [Aggregator::MeanFallback, Aggregator::LastValid] {
            let policy = BinPolicy {
                aggregator: agg,
                ..BinPolicy::default()
            };
            let g: HourlyGrid = bin_hourly(1, n_hours, &records, &schema, &policy);
            let (num, mask, cats) = reference_bin(&records, n_hours, &schema, agg);
            let same_num = g.numeric.iter().zip(&num).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            ensure(same_num && g.observed_mask == mask && g.categorical == cats, || {
                format!("record set {k} ({agg:?}) differs from the reference")
            })?;
        }
    }
    Ok(format!("1000 stays at 30% missingness: 0 missing of {cells} cells; 10000 record sets match the reference binner"))
}

// ---------------------------------------------------------------- 6

fn meta(id: i64, minutes: i64, death: Option<i64>) -> StayMeta {
    StayMeta {
        stay_id: id,
        patient_id: id,
        age: 50.0,
        gender: String::new(),
        ethnicity: String::new(),
        admission_diagnosis: String::new(),
        height_cm: None,
        weight_kg: None,
        hospital_discharge_status: if death.is_some() { DischargeStatus::Expired } else { DischargeStatus::Alive },
        unit_discharge_offset_minutes: minutes,
        death_offset_minutes: death,
        icd9_codes: Default::default(),
    }
}

fn shape(id: i64, n_hours: usize) -> HourlyGrid {
    HourlyGrid {
        stay_id: id,
        n_hours,
        numeric: Vec::new(),
        categorical: Vec::new(),
        observed_mask: Vec::new(),
    }
}

fn criterion_schedule() -> Outcome {
    let m = meta(1, 30 * 60, None);
    let grids: BTreeMap<i64, HourlyGrid> = [(1, shape(1, 30))].into();
    let los = build_los_instances(&grids, std::slice::from_ref(&m));
    let ends: Vec<usize> = los.iter().map(|i| i.window.end).collect();
    ensure(ends == [12, 18, 24], || format!("30 h stay points {ends:?}"))?;
    let labels: Vec<f64> = los
        .iter()
        .map(|i| match i.label {
            Label::RemainingLosDays(d) => d,
            _ => f64::NAN,
        })
        .collect();
    let want = [0.75, 0.5, 0.25];
    ensure(labels.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), || format!("labels {labels:?}"))?;

    let data = common::synth_dir(&common::synth_cfg(400, 606, 1.0));
    let schema = canonical_schema();
    let ds = load_dataset(data.path(), &schema).map_err(|e| e.to_string())?;
    let cohort = select_base_cohort(&ds.metas, &ds.record_counts());
    let metas: Vec<StayMeta> = cohort.included.iter().map(|&s| ds.meta(s).unwrap().clone()).collect();
    let policy = BinPolicy::default();
    let grids: BTreeMap<i64, HourlyGrid> = metas
        .iter()
        .map(|m| (m.stay_id, shape(m.stay_id, policy.grid_hours(m.unit_discharge_offset_minutes))))
        .collect();
    let mut n = 0;
    for inst in build_los_instances(&grids, &metas).iter().chain(&build_decomp_instances(&grids, &metas)) {
        let end = inst.window.end;
        let ok = inst.window.len() == 12 && end >= 12 && (end - 12) % 6 == 0 && end < grids[&inst.stay_id].n_hours;
        ensure(ok, || format!("stay {} window {:?}", inst.stay_id, inst.window))?;
        n += 1;
    }
    Ok(format!("30 h stay gives points {{12,18,24}} with labels {{0.75,0.5,0.25}}; {n} synthetic instances obey the law"))
}

// ---------------------------------------------------------------- 7

fn mean_auroc(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<f64, String> {
    let out = run_prepared(cfg, prepared).map_err(|e| e.to_string())?;
    out.report
        .aggregate
        .get("auroc")
        .copied()
        .flatten()
        .map(|a| a.mean)
        .ok_or_else(|| "AUROC undefined".to_string())
}

fn criterion_learnability() -> Outcome {
    let start = Instant::now();
    let run = |signal: f64, model: ModelKind| -> Result<f64, String> {
        let data = common::synth_dir(&common::synth_cfg(2000, 7, signal));
        let mut cfg = ExperimentConfig {
            task: ExperimentTask::Mortality24,
            model,
            encoding: Encoding::Embedding,
            seed: 3,
            data_dir: data.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        cfg.hyper.batch_size = 32;
        let prepared = Prepared::load(&cfg).map_err(|e| e.to_string())?;
        mean_auroc(&cfg, &prepared)
    };
    let bilstm = run(1.5, ModelKind::BiLstm)?;
    let lr = run(1.5, ModelKind::Linear)?;
    let null = run(0.0, ModelKind::BiLstm)?;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("BiLSTM AUROC {bilstm:.4}, logistic {lr:.4}, signal 0 BiLSTM {null:.4}, {secs:.0} s");
    ensure(bilstm >= 0.85, || format!("{detail}: BiLSTM below 0.85"))?;
    ensure(bilstm > lr, || format!("{detail}: BiLSTM does not beat the logistic baseline"))?;
    ensure((0.45..=0.55).contains(&null), || format!("{detail}: signal-0 AUROC outside [0.45, 0.55]"))?;
    ensure(secs < 600.0, || format!("{detail}: over 10 minutes"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 8

fn criterion_leak_and_determinism() -> Outcome {
    let data = common::synth_dir(&common::synth_cfg(400, 808, 1.0));
    let mut runs = Vec::new();
    for (task, model, zscore) in [
        (ExperimentTask::Decompensation, ModelKind::BiLstm, true),
        (ExperimentTask::Mortality48, ModelKind::Ann, false),
    ] {
        let mut texts = Vec::new();
        for _ in 0..2 {
            let out = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = common::small_experiment(data.path(), out.path());
            cfg.task = task;
            cfg.model = model;
            cfg.hyper.zscore = zscore;
            let outcome = execute(&cfg).map_err(|e| e.to_string())?;
            let report = &outcome.report;
            ensure(report.all_checks_passed(), || format!("{task}: runtime checks not all passed"))?;

            let ds = load_dataset(data.path(), &canonical_schema()).map_err(|e| e.to_string())?;
            let patient_of: BTreeMap<i64, i64> = ds.metas.iter().map(|m| (m.stay_id, m.patient_id)).collect();
            let test_sets: Vec<BTreeSet<i64>> = outcome
                .predictions
                .iter()
                .map(|f| f.stay_ids.iter().map(|s| patient_of[s]).collect())
                .collect();
            let total: usize = test_sets.iter().map(BTreeSet::len).sum();
            let union: BTreeSet<i64> = test_sets.iter().flatten().copied().collect();
            ensure(total == union.len() && union.len() == report.cohort.task_patients, || {
                format!("{task}: test folds overlap or miss patients")
            })?;
            for f in &report.folds {
                ensure(f.train_patients + f.test_patients == report.cohort.task_patients, || {
                    format!("{task}: fold {} train side is not the complement of its test side", f.fold)
                })?;
            }
            texts.push(std::fs::read(out.path().join(REPORT_JSON)).map_err(|e| e.to_string())?);
        }
        ensure(texts[0] == texts[1], || format!("{task}: report.json differs between identical runs"))?;
        runs.push(format!("{task}/{:?}", model));
    }
    Ok(format!("runtime checks pass and report.json is byte-identical on rerun ({})", runs.join(", ")))
}

// ---------------------------------------------------------------- 9

fn welch_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mv = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64)
    };
    let ((ma, va), (mb, vb)) = (mv(a), mv(b));
    (ma - mb) / (va / a.len() as f64 + vb / b.len() as f64).sqrt()
}

/// Exact two-sided permutation p over all 252 relabellings of 5 + 5 values,
/// with the studentized mean difference as statistic.
fn permutation_p(a: &[f64], b: &[f64]) -> f64 {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let observed = welch_statistic(a, b).abs();
    let (mut hits, mut total) = (0, 0);
    for mask in 0u32..1 << 10 {
        if mask.count_ones() != 5 {
            continue;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (i, &v) in all.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    x.push(v)
                } else {
                    y.push(v)
                }
            }
            (x, y)
        };
        total += 1;
        if welch_statistic(&x, &y).abs() >= observed * (1.0 - 1e-12) {
            hits += 1;
        }
    }
    f64::from(hits) / f64::from(total)
}

fn criterion_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let mut agree = 0;
    for _ in 0..100 {
        let delta: f64 = rng.gen_range(0.0..3.0);
        let a: Vec<f64> = (0..5).map(|_| rng.sample(normal)).collect();
        let b: Vec<f64> = (0..5).map(|_| rng.sample(normal) + delta).collect();
        let t = t_test(&a, &b, TestKind::Welch).map_err(|e| e.to_string())?;
        let r = t_test(&b, &a, TestKind::Welch).map_err(|e| e.to_string())?;
        ensure(t.t == -r.t && t.p == r.p, || format!("antisymmetry: {t:?} vs {r:?}"))?;
        if (t.p < 0.05) == (permutation_p(&a, &b) < 0.05) {
            agree += 1;
        }
    }
    ensure(agree >= 95, || format!("{agree}/100 decisions agree with the permutation oracle"))?;
    Ok(format!("{agree}/100 decisions agree with the permutation oracle; t(a,b) = -t(b,a) exactly"))
}

// ---------------------------------------------------------------- driver

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient correctness", criterion_gradients),
        ("metric oracle equivalence", criterion_metric_oracles),
        ("closed-form checks", criterion_closed_forms),
        ("OHE/embedding equivalence", criterion_ohe_embedding),
        ("preprocessing completeness", criterion_preprocessing),
        ("schedule law", criterion_schedule),
        ("learnability", criterion_learnability),
        ("leak-freedom and determinism", criterion_leak_and_determinism),
        ("statistics", criterion_statistics),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if only.is_none_or(|o| o == 10) {
        println!("criterion 10 SKIP  real-data cohort counts: needs the credentialed eICU database");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
