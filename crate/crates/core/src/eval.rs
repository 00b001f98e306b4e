//! Metrics, fold aggregation and significance tests.
//!
//! Classification metrics follow the positive-when-`score >= threshold`
//! convention. Confidence intervals are Student-t over fold values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::phenotype::{PhenotypeType, CATEGORIES, NUM_PHENOTYPES};
use crate::types::Task;

pub const TARGET_SENSITIVITY: f64 = 0.90;

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let p = labels.iter().filter(|&&y| y).count();
    (p, labels.len() - p)
}

fn check_pair(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            what: "scores and labels",
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney statistic, from mid-ranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_pair(scores, labels)?;
    let (p, n) = class_counts(labels);
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric("AUROC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Ranks are 1-based; a tie group spanning [i, j) gets (i + j + 1) / 2.
    // Summed as doubled ranks to stay in integers.
    let mut rank2_pos: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let pos_in_group = idx[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        rank2_pos += pos_in_group * (i as u128 + j as u128 + 1);
        i = j;
    }
    let (p, n) = (p as u128, n as u128);
    // 2U = Σ 2·rank − P(P+1)
    let u2 = rank2_pos - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// Step-wise average precision: Σ over distinct thresholds of
/// precision × recall increment.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_pair(scores, labels)?;
    let (p, _) = class_counts(labels);
    if p == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one positive".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let mut dtp = 0;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] {
                dtp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        tp += dtp;
        if dtp > 0 {
            ap += (tp as f64 / (tp + fp) as f64) * (dtp as f64 / p as f64);
        }
        i = j;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub ppv: f64,
    /// Absent when nothing is classified negative.
    pub npv: Option<f64>,
}

/// The largest threshold whose sensitivity reaches `target`, with the
/// confusion-matrix metrics at that threshold.
pub fn operating_point(scores: &[f64], labels: &[bool], target: f64) -> Result<OperatingPoint> {
    check_pair(scores, labels)?;
    let (p, n) = class_counts(labels);
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric("operating point needs both classes".into()));
    }
    let need = ((target * p as f64) - 1e-9).ceil().clamp(1.0, p as f64) as usize;
    let mut pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y).map(|(&s, _)| s).collect();
    pos.sort_by(|a, b| b.total_cmp(a));
    let threshold = pos[need - 1];
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(OperatingPoint {
        threshold,
        sensitivity: tp as f64 / p as f64,
        specificity: tn as f64 / n as f64,
        ppv: tp as f64 / (tp + fp) as f64,
        npv: (tn + fn_ > 0).then(|| tn as f64 / (tn + fn_) as f64),
    })
}

/// `1 − SS_res / SS_tot`, with SS_tot about the target mean.
pub fn r2(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_regression(preds, targets)?;
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("R² needs non-constant targets".into()));
    }
    let ss_res: f64 = preds.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_regression(preds, targets)?;
    Ok(preds.iter().zip(targets).map(|(p, y)| (p - y).abs()).sum::<f64>() / targets.len() as f64)
}

fn check_regression(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::Shape {
            what: "regression inputs",
            expected: targets.len().max(1),
            got: preds.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionMetrics {
    /// Absent when the targets have zero variance.
    pub r2: Option<f64>,
    pub mae: f64,
}

pub fn regression_metrics(preds: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    let mae = mae(preds, targets)?;
    let r2 = match r2(preds, targets) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RegressionMetrics { r2, mae })
}

/// Named metric values of one fold. Every run of a given task type emits the
/// same key set; undefined values serialize as `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricSet(pub BTreeMap<String, Option<f64>>);

impl MetricSet {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied().flatten()
    }
}

/// Metric names reported for a task, in report order.
pub fn metric_names(task: Task) -> Vec<String> {
    match task {
        Task::Mortality | Task::Decompensation => ["auroc", "auprc", "specificity", "sensitivity", "ppv", "npv"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Task::Los => vec!["r2".into(), "mae".into()],
        Task::Phenotyping => ["auroc_macro", "auroc_macro_acute", "auroc_macro_chronic", "auroc_macro_mixed"]
            .iter()
            .map(|s| s.to_string())
            .chain(CATEGORIES.iter().map(|c| format!("auroc:{}", c.0)))
            .collect(),
    }
}

/// All metrics of a task from per-instance outputs (1 or 25 values) and
/// targets of the same shape.
pub fn compute_metrics(task: Task, preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<MetricSet> {
    if preds.len() != targets.len() {
        return Err(Error::Shape {
            what: "predictions",
            expected: targets.len(),
            got: preds.len(),
        });
    }
    let mut m = BTreeMap::new();
    match task {
        Task::Mortality | Task::Decompensation => {
            let s: Vec<f64> = preds.iter().map(|p| p[0]).collect();
            let y: Vec<bool> = targets.iter().map(|t| t[0] == 1.0).collect();
            let op = operating_point(&s, &y, TARGET_SENSITIVITY)?;
            m.insert("auroc".into(), Some(auroc(&s, &y)?));
            m.insert("auprc".into(), Some(auprc(&s, &y)?));
            m.insert("specificity".into(), Some(op.specificity));
            m.insert("sensitivity".into(), Some(TARGET_SENSITIVITY));
            m.insert("ppv".into(), Some(op.ppv));
            m.insert("npv".into(), op.npv);
        }
        Task::Los => {
            let s: Vec<f64> = preds.iter().map(|p| p[0]).collect();
            let y: Vec<f64> = targets.iter().map(|t| t[0]).collect();
            let r = regression_metrics(&s, &y)?;
            m.insert("r2".into(), r.r2);
            m.insert("mae".into(), Some(r.mae));
        }
        Task::Phenotyping => {
            let mut per = [None; NUM_PHENOTYPES];
            for (n, slot) in per.iter_mut().enumerate() {
                let s: Vec<f64> = preds.iter().map(|p| p[n]).collect();
                let y: Vec<bool> = targets.iter().map(|t| t[n] == 1.0).collect();
                *slot = match auroc(&s, &y) {
                    Ok(v) => Some(v),
                    Err(Error::UndefinedMetric(_)) => None,
                    Err(e) => return Err(e),
                };
                m.insert(format!("auroc:{}", CATEGORIES[n].0), *slot);
            }
            let macro_of = |keep: &dyn Fn(PhenotypeType) -> bool| {
                let v: Vec<f64> = (0..NUM_PHENOTYPES).filter(|&n| keep(CATEGORIES[n].1)).filter_map(|n| per[n]).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let all = macro_of(&|_| true);
            if all.is_none() {
                return Err(Error::UndefinedMetric("no phenotype has both classes".into()));
            }
            m.insert("auroc_macro".into(), all);
            m.insert("auroc_macro_acute".into(), macro_of(&|t| t == PhenotypeType::Acute));
            m.insert("auroc_macro_chronic".into(), macro_of(&|t| t == PhenotypeType::Chronic));
            m.insert("auroc_macro_mixed".into(), macro_of(&|t| t == PhenotypeType::Mixed));
        }
    }
    Ok(MetricSet(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Half-width of the 95% Student-t interval.
    pub ci95: f64,
    pub n: usize,
}

/// Mean ± t_{k−1, 0.975} · s / √k over `k ≥ 2` fold values.
pub fn aggregate_folds(values: &[f64]) -> Result<Aggregate> {
    let k = values.len();
    if k < 2 {
        return Err(Error::UndefinedMetric(format!("confidence interval needs at least 2 folds, got {k}")));
    }
    let kf = k as f64;
    let mean = values.iter().sum::<f64>() / kf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (kf - 1.0);
    let t = StudentsT::new(0.0, 1.0, kf - 1.0).expect("k >= 2").inverse_cdf(0.975);
    Ok(Aggregate {
        mean,
        ci95: t * var.sqrt() / kf.sqrt(),
        n: k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[default]
    Welch,
    /// Paired on fold index.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Significance {
    /// p < 0.05, marked †.
    P05,
    /// 0.05 ≤ p < 0.1, marked ‡.
    P10,
    None,
}

impl Significance {
    pub fn of(p: f64) -> Self {
        if p < 0.05 {
            Significance::P05
        } else if p < 0.1 {
            Significance::P10
        } else {
            Significance::None
        }
    }

    pub fn mark(self) -> &'static str {
        match self {
            Significance::P05 => "†",
            Significance::P10 => "‡",
            Significance::None => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub flag: Significance,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}

/// Two-tailed p of Student t with `df` degrees of freedom.
fn two_tailed(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn degenerate(diff: f64, df: f64) -> TTest {
    if diff == 0.0 {
        TTest { t: 0.0, df, p: 1.0, flag: Significance::None }
    } else {
        let t = diff.signum() * f64::INFINITY;
        TTest { t, df, p: 0.0, flag: Significance::P05 }
    }
}

/// Two-tailed t-test of `a` against `b`.
pub fn t_test(a: &[f64], b: &[f64], kind: TestKind) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Input("t-test needs at least 2 values per sample".into()));
    }
    let out = match kind {
        TestKind::Welch => {
            let (ma, va) = mean_var(a);
            let (mb, vb) = mean_var(b);
            let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
            let se2 = sa + sb;
            if se2 == 0.0 {
                return Ok(degenerate(ma - mb, (a.len() + b.len() - 2) as f64));
            }
            let t = (ma - mb) / se2.sqrt();
            let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
            let p = two_tailed(t, df);
            TTest { t, df, p, flag: Significance::of(p) }
        }
        TestKind::Paired => {
            if a.len() != b.len() {
                return Err(Error::Input("paired t-test needs equal sample sizes".into()));
            }
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let (md, vd) = mean_var(&d);
            let df = (d.len() - 1) as f64;
            if vd == 0.0 {
                return Ok(degenerate(md, df));
            }
            let t = md / (vd / d.len() as f64).sqrt();
            let p = two_tailed(t, df);
            TTest { t, df, p, flag: Significance::of(p) }
        }
    };
    Ok(out)
}
