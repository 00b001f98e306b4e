//! Patient-level cross-validation: one fold = vocabularies, grids,
//! normalization and oversampling derived from its training side only.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cohort::{self, CohortReport};
use crate::error::{Error, Result};
use crate::eval::{aggregate_folds, compute_metrics, metric_names, Aggregate};
use crate::experiment::report::{CohortCounts, EvalReport, FoldChecks, FoldResult};
use crate::experiment::ExperimentConfig;
use crate::ingest::{load_dataset, Dataset};
use crate::neural::{train, Model, ModelSpec, SeqInput, Target};
use crate::phenotype::PhenotypeCatalog;
use crate::preprocess::{build_grid, build_vocabs, oversample, BinPolicy, Provenance, ZScore};
use crate::schema::{canonical_schema, Schema};
use crate::types::{HourlyGrid, Label, PatientId, StayId, StayMeta, StayRecordRaw, Task, TaskInstance};

/// Patient → fold index. Every stay of a patient lands in that patient's fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: BTreeMap<PatientId, usize>,
}

impl FoldAssignment {
    pub fn patients_in(&self, fold: usize) -> BTreeSet<PatientId> {
        self.fold_of.iter().filter(|(_, &f)| f == fold).map(|(&p, _)| p).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in self.fold_of.values() {
            s[f] += 1;
        }
        s
    }
}

/// Shuffles the distinct patient ids with `seed` and deals them round-robin,
/// so fold sizes differ by at most one.
pub fn make_folds(patients: &[PatientId], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut ids: Vec<PatientId> = patients.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if ids.len() < k {
        return Err(Error::Data(format!("{} patients cannot fill {k} folds", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(FoldAssignment {
        k,
        fold_of: ids.into_iter().enumerate().map(|(i, p)| (p, i % k)).collect(),
    })
}

/// Independent seed per (fold, purpose), stable across runs.
fn derive_seed(seed: u64, fold: usize, purpose: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(purpose << 32 | fold as u64);
    r.next_u64()
}

const SEED_SPLIT: u64 = 0;
const SEED_INIT: u64 = 1;
const SEED_TRAIN: u64 = 2;
const SEED_OVERSAMPLE: u64 = 3;

/// Data loaded once per run and shared by every fold.
pub struct Prepared {
    pub schema: Schema,
    pub dataset: Dataset,
    pub cohort: CohortReport,
    pub catalog: Option<PhenotypeCatalog>,
}

impl Prepared {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let schema = match &cfg.schema {
            Some(p) => Schema::load(p)?,
            None => canonical_schema(),
        };
        let dataset = load_dataset(&cfg.data_dir, &schema)?;
        let cohort = cohort::select_base_cohort(&dataset.metas, &dataset.record_counts());
        let catalog = match cfg.task.task() {
            Task::Phenotyping => Some(PhenotypeCatalog::load(&cfg.phenotype_map_path())?),
            _ => None,
        };
        Ok(Self {
            schema,
            dataset,
            cohort,
            catalog,
        })
    }

    pub fn included_metas(&self) -> Vec<StayMeta> {
        self.cohort
            .included
            .iter()
            .filter_map(|&s| self.dataset.meta(s).cloned())
            .collect()
    }

    fn records(&self, stay: StayId) -> &[StayRecordRaw] {
        self.dataset.records.get(&stay).map_or(&[], Vec::as_slice)
    }

    /// Instances of the configured task over the base cohort. Windows depend
    /// only on stay lengths, so they are fixed before any fold is built.
    pub fn instances(&self, cfg: &ExperimentConfig) -> Result<Vec<TaskInstance>> {
        let policy = cfg.bin_policy();
        let metas = self.included_metas();
        let shapes: BTreeMap<StayId, HourlyGrid> = metas
            .iter()
            .map(|m| {
                let g = HourlyGrid {
                    stay_id: m.stay_id,
                    n_hours: policy.grid_hours(m.unit_discharge_offset_minutes),
                    numeric: Vec::new(),
                    categorical: Vec::new(),
                    observed_mask: Vec::new(),
                };
                (m.stay_id, g)
            })
            .collect();
        Ok(match cfg.task.task() {
            Task::Mortality => {
                let h = cfg.task.horizon().expect("mortality has a horizon");
                cohort::build_mortality_instances(&shapes, &metas, h)
            }
            Task::Los => cohort::build_los_instances(&shapes, &metas),
            Task::Decompensation => cohort::build_decomp_instances(&shapes, &metas),
            Task::Phenotyping => {
                let cat = self.catalog.as_ref().ok_or_else(|| Error::Config("phenotyping needs a phenotype map".into()))?;
                cohort::build_phenotype_instances(&shapes, &metas, cat)
            }
        })
    }
}

pub fn target_of(label: &Label) -> Target {
    match *label {
        Label::Binary(b) => vec![f64::from(u8::from(b))],
        Label::RemainingLosDays(d) => vec![d],
        Label::Phenotypes(m) => m.to_targets().to_vec(),
    }
}

/// Test-side outputs of one fold, in test-instance order.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPredictions {
    pub fold: usize,
    pub stay_ids: Vec<StayId>,
    pub predictions: Vec<Vec<f64>>,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub predictions: Vec<FoldPredictions>,
    pub wall_clock_secs: f64,
    pub fold_secs: Vec<f64>,
}

struct FoldContext<'a> {
    cfg: &'a ExperimentConfig,
    prepared: &'a Prepared,
    instances: &'a [TaskInstance],
    patient_of: &'a BTreeMap<StayId, PatientId>,
    folds: &'a FoldAssignment,
    policy: BinPolicy,
}

fn invariant(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Invariant(what()))
    }
}

fn run_fold(ctx: &FoldContext<'_>, fold: usize) -> Result<(FoldResult, FoldPredictions, f64)> {
    let start = Instant::now();
    let cfg = ctx.cfg;
    let test_patients = ctx.folds.patients_in(fold);
    let (test_inst, train_inst): (Vec<&TaskInstance>, Vec<&TaskInstance>) =
        ctx.instances.iter().partition(|i| test_patients.contains(&ctx.patient_of[&i.stay_id]));
    let stays = |v: &[&TaskInstance]| v.iter().map(|i| i.stay_id).collect::<BTreeSet<StayId>>();
    let (train_stays, test_stays) = (stays(&train_inst), stays(&test_inst));
    let patients = |s: &BTreeSet<StayId>| s.iter().map(|id| ctx.patient_of[id]).collect::<BTreeSet<PatientId>>();
    let (train_pat, test_pat) = (patients(&train_stays), patients(&test_stays));
    if train_inst.is_empty() || test_inst.is_empty() {
        return Err(Error::Data(format!("fold {fold} has an empty train or test side")));
    }

    let patient_disjoint = train_pat.is_disjoint(&test_pat);
    invariant(patient_disjoint, || format!("fold {fold}: train and test share patients"))?;

    let train_tag = Provenance::of_stays(train_stays.iter().copied());
    let metas: BTreeMap<StayId, &StayMeta> = train_stays
        .iter()
        .chain(&test_stays)
        .map(|&s| (s, ctx.prepared.dataset.meta(s).expect("cohort stay has metadata")))
        .collect();
    let vocab = build_vocabs(
        &ctx.prepared.schema,
        train_stays.iter().map(|s| (metas[s], ctx.prepared.records(*s))),
    );
    let vocab_train_only = vocab.provenance == train_tag;
    invariant(vocab_train_only, || format!("fold {fold}: vocabulary not derived from the training stays"))?;

    let mut grids: BTreeMap<StayId, HourlyGrid> = metas
        .iter()
        .map(|(&s, m)| (s, build_grid(m, ctx.prepared.records(s), &vocab.schema, &ctx.policy)))
        .collect();
    let normalization_train_only = if cfg.hyper.zscore {
        let z = ZScore::fit(train_stays.iter().map(|s| &grids[s]));
        let ok = z.provenance == train_tag;
        invariant(ok, || format!("fold {fold}: normalization statistics not derived from the training stays"))?;
        for g in grids.values_mut() {
            for row in g.numeric.chunks_exact_mut(crate::schema::NUM_NUMERICAL) {
                z.apply(row);
            }
        }
        Some(ok)
    } else {
        None
    };

    let mut train_set: Vec<TaskInstance> = train_inst.iter().map(|&i| i.clone()).collect();
    let mut duplicates = 0;
    let mut warnings = Vec::new();
    if cfg.task.task().is_binary() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, fold, SEED_OVERSAMPLE));
        let o = oversample(train_set, &mut rng);
        duplicates = o.n_duplicates;
        warnings.extend(o.warning.map(|w| format!("fold {fold}: {w}")));
        train_set = o.instances;
    }
    let oversampling_train_only = train_set.iter().all(|i| train_stays.contains(&i.stay_id));
    invariant(oversampling_train_only, || format!("fold {fold}: oversampled instance outside the training side"))?;

    let vocab_sizes = vocab.schema.vocab_sizes()?;
    let mut spec = ModelSpec::new(cfg.model, cfg.task.task(), cfg.encoding, cfg.variables, vocab_sizes);
    spec.hidden = cfg.hyper.hidden;
    spec.ann_hidden = cfg.hyper.ann_hidden;
    if cfg.hyper.identity_embeddings {
        spec = spec.with_identity_embeddings();
    }
    let mut model = Model::new(spec, vocab.schema.hash(), derive_seed(cfg.seed, fold, SEED_INIT))?;
    let inputs: Vec<SeqInput<'_>> = train_set.iter().map(|i| SeqInput::window(&grids[&i.stay_id], &i.window)).collect();
    let targets: Vec<Target> = train_set.iter().map(|i| target_of(&i.label)).collect();
    let log = train(&mut model, &inputs, &targets, &cfg.train_config(derive_seed(cfg.seed, fold, SEED_TRAIN)))?;

    let test_inputs: Vec<SeqInput<'_>> = test_inst.iter().map(|i| SeqInput::window(&grids[&i.stay_id], &i.window)).collect();
    let test_targets: Vec<Target> = test_inst.iter().map(|i| target_of(&i.label)).collect();
    let predictions = model.predict(&test_inputs, cfg.hyper.max_batch_tokens);
    let (metrics, error) = match compute_metrics(cfg.task.task(), &predictions, &test_targets) {
        Ok(m) => (Some(m), None),
        Err(Error::UndefinedMetric(e)) => {
            warnings.push(format!("fold {fold}: {e}; excluded from aggregation"));
            (None, Some(e))
        }
        Err(e) => return Err(e),
    };
    let positive_fraction = cfg
        .task
        .task()
        .is_binary()
        .then(|| test_targets.iter().filter(|t| t[0] == 1.0).count() as f64 / test_targets.len() as f64);

    let result = FoldResult {
        fold,
        train_patients: train_pat.len(),
        test_patients: test_pat.len(),
        train_stays: train_stays.len(),
        test_stays: test_stays.len(),
        train_instances: train_set.len(),
        oversampled_duplicates: duplicates,
        test_instances: test_inst.len(),
        test_positive_fraction: positive_fraction,
        final_train_loss: log.epoch_losses.last().copied().unwrap_or(f64::NAN),
        metrics,
        error,
        warnings,
        checks: FoldChecks {
            patient_disjoint,
            vocab_train_only,
            oversampling_train_only,
            normalization_train_only,
        },
    };
    let preds = FoldPredictions {
        fold,
        stay_ids: test_inst.iter().map(|i| i.stay_id).collect(),
        predictions,
        targets: test_targets,
    };
    Ok((result, preds, start.elapsed().as_secs_f64()))
}

/// Runs every fold on already-loaded data.
pub fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let instances = prepared.instances(cfg)?;
    if instances.is_empty() {
        return Err(Error::Data(format!("no {} instances in the cohort", cfg.task)));
    }
    let patient_of: BTreeMap<StayId, PatientId> = prepared.dataset.metas.iter().map(|m| (m.stay_id, m.patient_id)).collect();
    let task_patients: Vec<PatientId> = instances.iter().map(|i| patient_of[&i.stay_id]).collect();
    let folds = make_folds(&task_patients, cfg.folds, derive_seed(cfg.seed, 0, SEED_SPLIT))?;
    let ctx = FoldContext {
        cfg,
        prepared,
        instances: &instances,
        patient_of: &patient_of,
        folds: &folds,
        policy: cfg.bin_policy(),
    };
    let runs: Vec<Result<_>> = (0..cfg.folds).into_par_iter().map(|f| run_fold(&ctx, f)).collect();
    let mut results = Vec::with_capacity(cfg.folds);
    let mut predictions = Vec::with_capacity(cfg.folds);
    let mut fold_secs = Vec::with_capacity(cfg.folds);
    for r in runs {
        let (res, pred, secs) = r?;
        results.push(res);
        predictions.push(pred);
        fold_secs.push(secs);
    }

    let names = metric_names(cfg.task.task());
    let mut warnings: Vec<String> = results.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
    let mut aggregate: BTreeMap<String, Option<Aggregate>> = BTreeMap::new();
    for name in &names {
        let values: Vec<f64> = results.iter().filter_map(|r| r.metrics.as_ref()?.get(name)).collect();
        let agg = aggregate_folds(&values).ok();
        if agg.is_none() {
            warnings.push(format!("{name}: defined on {} folds, no interval", values.len()));
        }
        aggregate.insert(name.clone(), agg);
    }
    let stays: BTreeSet<StayId> = instances.iter().map(|i| i.stay_id).collect();
    let report = EvalReport {
        task: cfg.task.to_string(),
        seed: cfg.seed,
        config: cfg.echo(),
        cohort: CohortCounts {
            base_stays: prepared.cohort.included.len(),
            task_stays: stays.len(),
            task_patients: folds.fold_of.len(),
            instances: instances.len(),
        },
        metric_names: names,
        folds: results,
        aggregate,
        warnings,
    };
    Ok(RunOutcome {
        report,
        predictions,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        fold_secs,
    })
}

/// Loads the data directory and runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let prepared = Prepared::load(cfg)?;
    run_prepared(cfg, &prepared)
}
