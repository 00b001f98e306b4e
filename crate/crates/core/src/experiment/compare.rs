//! Per-metric significance between two runs on the same folds.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{t_test, Significance, TTest, TestKind};
use crate::experiment::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    /// Unset when either side has fewer than two defined folds.
    pub test: Option<TTest>,
}

impl ComparisonRow {
    pub fn flag(&self) -> Significance {
        self.test.map_or(Significance::None, |t| t.flag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub task: String,
    pub kind: TestKind,
    pub rows: Vec<ComparisonRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Two-tailed t-test of every metric across fold values. Both reports must
/// come from the same task and the same fold definition (fold count, seed and
/// per-fold test patient counts).
pub fn compare(a: &EvalReport, b: &EvalReport, kind: TestKind) -> Result<Comparison> {
    if a.task != b.task {
        return Err(Error::Input(format!("cannot compare a {} report with a {} report", a.task, b.task)));
    }
    if a.folds.len() != b.folds.len() {
        return Err(Error::Input(format!("fold counts differ: {} vs {}", a.folds.len(), b.folds.len())));
    }
    let same_split = a.seed == b.seed
        && a.config.get("data_dir") == b.config.get("data_dir")
        && a.folds.iter().zip(&b.folds).all(|(x, y)| x.test_patients == y.test_patients);
    if !same_split {
        return Err(Error::Input("reports were evaluated on different folds".into()));
    }
    let mut rows = Vec::new();
    for metric in &a.metric_names {
        let (va, vb) = (a.fold_values(metric), b.fold_values(metric));
        let (xa, xb): (Vec<f64>, Vec<f64>) = match kind {
            TestKind::Welch => (va.iter().flatten().copied().collect(), vb.iter().flatten().copied().collect()),
            TestKind::Paired => va.iter().zip(&vb).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip(),
        };
        let test = if xa.len() >= 2 && xb.len() >= 2 { Some(t_test(&xa, &xb, kind)?) } else { None };
        rows.push(ComparisonRow {
            metric: metric.clone(),
            mean_a: mean(&xa),
            mean_b: mean(&xb),
            test,
        });
    }
    Ok(Comparison {
        task: a.task.clone(),
        kind,
        rows,
    })
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.metric.len()).max().unwrap_or(6).max(6);
        let mut out = format!("task {}  test {:?}  († p < 0.05, ‡ p < 0.1)\n", self.task, self.kind);
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>8}  {:>8}  flag", "metric", "mean a", "mean b", "t", "p");
        let f = |v: Option<f64>| v.map_or("—".to_string(), |v| format!("{v:.4}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9}  {:>9}  {:>8}  {:>8}  {}",
                r.metric,
                f(r.mean_a),
                f(r.mean_b),
                r.test.map_or("—".into(), |t| format!("{:.3}", t.t)),
                r.test.map_or("—".into(), |t| format!("{:.4}", t.p)),
                r.flag().mark()
            );
        }
        out
    }
}
