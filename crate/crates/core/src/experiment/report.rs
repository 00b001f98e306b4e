//! Report types, their JSON and text renderings, and run-directory output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Aggregate, MetricSet};
use crate::experiment::RunOutcome;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const INGESTION_AUDIT: &str = "ingestion_audit.txt";
pub const COHORT_AUDIT: &str = "cohort_audit.txt";
const LOCK_FILE: &str = ".lock";

/// Outcomes of the runtime leak checks for one fold. A run stops with an
/// error before any of these could be false; they are recorded so a report
/// shows the checks ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldChecks {
    pub patient_disjoint: bool,
    pub vocab_train_only: bool,
    pub oversampling_train_only: bool,
    /// Unset when normalization is off.
    pub normalization_train_only: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_patients: usize,
    pub test_patients: usize,
    pub train_stays: usize,
    pub test_stays: usize,
    /// After oversampling.
    pub train_instances: usize,
    pub oversampled_duplicates: usize,
    pub test_instances: usize,
    pub test_positive_fraction: Option<f64>,
    pub final_train_loss: f64,
    /// Unset when a metric was undefined on this fold's test side.
    pub metrics: Option<MetricSet>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub checks: FoldChecks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortCounts {
    pub base_stays: usize,
    pub task_stays: usize,
    pub task_patients: usize,
    pub instances: usize,
}

/// Everything in a run that is a function of config and data. Timing lives
/// only in the text report so reruns produce identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub cohort: CohortCounts,
    pub metric_names: Vec<String>,
    pub folds: Vec<FoldResult>,
    /// One entry per metric name; unset when fewer than two folds defined it.
    pub aggregate: BTreeMap<String, Option<Aggregate>>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Per-fold values of one metric, `None` where undefined.
    pub fn fold_values(&self, metric: &str) -> Vec<Option<f64>> {
        self.folds
            .iter()
            .map(|f| f.metrics.as_ref().and_then(|m| m.get(metric)))
            .collect()
    }

    pub fn all_checks_passed(&self) -> bool {
        self.folds.iter().all(|f| {
            let c = f.checks;
            c.patient_disjoint && c.vocab_train_only && c.oversampling_train_only && c.normalization_train_only != Some(false)
        })
    }

    pub fn to_text(&self, timing: Option<(f64, &[f64])>) -> String {
        let mut out = String::new();
        let cfg = |k: &str| self.config.get(k).map_or("", String::as_str);
        let _ = writeln!(
            out,
            "task {}  model {}  encoding {}  variables {}  folds {}  seed {}",
            self.task,
            cfg("model"),
            cfg("encoding"),
            cfg("variables"),
            self.folds.len(),
            self.seed
        );
        let c = self.cohort;
        let _ = writeln!(
            out,
            "cohort: {} base stays, {} task stays, {} patients, {} instances\n",
            c.base_stays, c.task_stays, c.task_patients, c.instances
        );
        let width = self.metric_names.iter().map(String::len).max().unwrap_or(6).max(6);
        let _ = write!(out, "{:<width$}  {:>24}", "metric", "mean [95% CI]");
        for f in &self.folds {
            let _ = write!(out, "  {:>8}", format!("fold {}", f.fold));
        }
        out.push('\n');
        for name in &self.metric_names {
            let agg = match self.aggregate.get(name).copied().flatten() {
                Some(a) => format!("{:.4} [{:.4}, {:.4}]", a.mean, a.mean - a.ci95, a.mean + a.ci95),
                None => "—".into(),
            };
            let _ = write!(out, "{name:<width$}  {agg:>24}");
            for v in self.fold_values(name) {
                let _ = write!(out, "  {:>8}", v.map_or("—".into(), |v| format!("{v:.4}")));
            }
            out.push('\n');
        }
        out.push_str("\nfolds\n");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "  fold {}: train {} patients / {} instances ({} oversampled), test {} patients / {} instances, final loss {:.5}{}",
                f.fold,
                f.train_patients,
                f.train_instances,
                f.oversampled_duplicates,
                f.test_patients,
                f.test_instances,
                f.final_train_loss,
                f.error.as_ref().map(|e| format!(", undefined: {e}")).unwrap_or_default()
            );
        }
        let _ = writeln!(
            out,
            "leak checks: {}",
            if self.all_checks_passed() { "patient-disjoint folds, train-only vocabularies, oversampling and normalization" } else { "FAILED" }
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        if let Some((total, folds)) = timing {
            let per: Vec<String> = folds.iter().map(|s| format!("{s:.1}")).collect();
            let _ = writeln!(out, "wall clock: {total:.1} s (per fold: {})", per.join(", "));
        }
        out
    }
}

/// Exclusive ownership of a run directory for the lifetime of the value.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        let mut f: File = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Config(format!("{} is in use by another run (remove {} if stale)", dir.display(), path.display()))
            } else {
                Error::io(&path, e)
            }
        })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(Self { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub(crate) fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(dir, REPORT_JSON, &outcome.report.to_json()?)?;
    write_file(
        dir,
        REPORT_TXT,
        &outcome.report.to_text(Some((outcome.wall_clock_secs, &outcome.fold_secs))),
    )?;
    Ok(())
}
