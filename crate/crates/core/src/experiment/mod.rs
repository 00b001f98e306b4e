//! Config-driven orchestration: ingestion, cohort, per-fold preprocessing,
//! training and evaluation, with reports and audits written to a run
//! directory.

mod compare;
mod config;
mod report;
mod run;
mod summary;

use std::fmt::Write as _;
use std::path::Path;

pub use compare::{compare, Comparison, ComparisonRow};
pub use config::{
    encoding_name, model_name, parse_encoding, parse_model, parse_variables, variables_name, ExperimentConfig, ExperimentTask, Hyperparameters,
};
pub use report::{
    write_report, CohortCounts, EvalReport, FoldChecks, FoldResult, RunLock, COHORT_AUDIT, INGESTION_AUDIT, REPORT_JSON, REPORT_TXT,
};
pub use run::{make_folds, run_experiment, run_prepared, target_of, FoldAssignment, FoldPredictions, Prepared, RunOutcome};
pub use summary::{median_iqr, summarize_cohort, CohortSummary, SummaryRow};

use crate::error::Result;

/// Ingestion and cohort audit texts for loaded data: rows read and skipped,
/// exclusions by rule, instances per task, and the demographics table.
pub fn audit_texts(cfg: &ExperimentConfig, prepared: &Prepared) -> (String, String) {
    let ingestion = prepared.dataset.report.to_text();
    let mut cohort = prepared.cohort.to_text();
    cohort.push_str("\ninstances per task\n");
    for task in ExperimentTask::ALL {
        let mut c = cfg.clone();
        c.task = task;
        let line = match (&prepared.catalog, task) {
            (None, ExperimentTask::Phenotyping) => "not counted (no phenotype map loaded)".to_string(),
            _ => match prepared.instances(&c) {
                Ok(inst) => {
                    let stays: std::collections::BTreeSet<_> = inst.iter().map(|i| i.stay_id).collect();
                    format!("{} instances from {} stays", inst.len(), stays.len())
                }
                Err(e) => format!("error: {e}"),
            },
        };
        let _ = writeln!(cohort, "  {:<15} {line}", task.name());
    }
    cohort.push('\n');
    cohort.push_str(&summarize_cohort(&prepared.included_metas()).to_text());
    (ingestion, cohort)
}

/// Writes the two audit files into `dir`.
pub fn write_audits(dir: &Path, cfg: &ExperimentConfig, prepared: &Prepared) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let (ingestion, cohort) = audit_texts(cfg, prepared);
    report::write_file(dir, INGESTION_AUDIT, &ingestion)?;
    report::write_file(dir, COHORT_AUDIT, &cohort)?;
    Ok(())
}

/// Full run into `cfg.out_dir`: takes the directory lock, loads the data,
/// writes the audits, runs every fold and writes both reports.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let _lock = RunLock::acquire(&cfg.out_dir)?;
    let prepared = Prepared::load(cfg)?;
    write_audits(&cfg.out_dir, cfg, &prepared)?;
    let outcome = run_prepared(cfg, &prepared)?;
    write_report(&cfg.out_dir, &outcome)?;
    Ok(outcome)
}
