//! Task heads and losses.
//!
//! Mortality and decompensation: σ(W·h + b). LoS: ReLU(W·h + b).
//! Phenotyping: σ(W_n·h + b_n) for each of the 25 categories.
//! Training works on logits: BCE is `softplus(z) − y·z`, whose gradient
//! `σ(z) − y` never saturates; the public [`loss`] takes probabilities.

use crate::error::{Error, Result};
use crate::neural::lstm::sigmoid;
use crate::types::Task;

/// Probabilities are clamped to `[EPS, 1 − EPS]` before taking logs.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskHead {
    pub task: Task,
    /// `[K × R]`, row-major.
    pub w: Vec<f64>,
    /// `[K]`.
    pub b: Vec<f64>,
}

impl TaskHead {
    pub fn zeros(task: Task, input: usize) -> Self {
        let k = if task == Task::Phenotyping { crate::phenotype::NUM_PHENOTYPES } else { 1 };
        Self {
            task,
            w: vec![0.0; k * input],
            b: vec![0.0; k],
        }
    }
}

#[inline]
pub(crate) fn activate(task: Task, z: f64) -> f64 {
    match task {
        Task::Los => z.max(0.0),
        _ => sigmoid(z),
    }
}

pub fn head_forward(h: &[f64], head: &TaskHead) -> Result<Vec<f64>> {
    let k = head.b.len();
    if k == 0 || head.w.len() != k * h.len() {
        return Err(Error::Shape {
            what: "head weights",
            expected: k * h.len(),
            got: head.w.len(),
        });
    }
    Ok((0..k)
        .map(|n| {
            let z = head.w[n * h.len()..(n + 1) * h.len()].iter().zip(h).map(|(w, x)| w * x).sum::<f64>() + head.b[n];
            activate(head.task, z)
        })
        .collect())
}

/// Binary cross-entropy of a probability against a 0/1 label.
pub fn bce(pred: f64, label: f64) -> f64 {
    let p = pred.clamp(EPS, 1.0 - EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Mean loss over all outputs and its gradient with respect to each
/// prediction. BCE for classification tasks, squared error for LoS.
pub fn loss(preds: &[f64], labels: &[f64], task: Task) -> Result<(f64, Vec<f64>)> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(Error::Shape {
            what: "loss inputs",
            expected: preds.len(),
            got: labels.len(),
        });
    }
    let n = preds.len() as f64;
    if task == Task::Los {
        let l = preds.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n;
        let g = preds.iter().zip(labels).map(|(p, y)| 2.0 * (p - y) / n).collect();
        return Ok((l, g));
    }
    if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Input(format!("classification label {y} is not 0 or 1")));
    }
    let l = preds.iter().zip(labels).map(|(&p, &y)| bce(p, y)).sum::<f64>() / n;
    let g = preds
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            (p - y) / (p * (1.0 - p)) / n
        })
        .collect();
    Ok((l, g))
}

/// Logit-space loss summed over `z` (scaled by `scale`), writing `dL/dz`.
pub(crate) fn logit_loss(task: Task, z: &[f64], y: &[f64], scale: f64, dz: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..z.len() {
        if task == Task::Los {
            let p = z[i].max(0.0);
            let r = p - y[i];
            total += r * r;
            dz[i] = if z[i] > 0.0 { 2.0 * r * scale } else { 0.0 };
        } else {
            // softplus(z) − y·z, stable for both signs.
            let zi = z[i];
            let sp = zi.max(0.0) + (-zi.abs()).exp().ln_1p();
            total += sp - y[i] * zi;
            dz[i] = (sigmoid(zi) - y[i]) * scale;
        }
    }
    total * scale
}
