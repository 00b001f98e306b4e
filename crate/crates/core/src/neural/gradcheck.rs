//! Central finite differences against the analytic gradient.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::neural::{Family, Model, SeqInput};

/// Gradients smaller than this are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub n_checked: usize,
    pub families: BTreeSet<Family>,
    /// Coordinates whose ±ε perturbation crossed a ReLU kink; excluded.
    pub kinks: Vec<usize>,
    /// `(index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, f64, f64)>,
}

/// Samples at least `n_coords` trainable coordinates, spread over every
/// parameter family, and returns the largest
/// `|analytic − numeric| / max(|analytic|, |numeric|, REL_FLOOR)`.
pub fn grad_check(model: &Model, batch: &[SeqInput<'_>], targets: &[&[f64]], eps: f64, n_coords: usize, seed: u64) -> Result<GradCheckReport> {
    let mut analytic = vec![0.0; model.n_params()];
    model.loss_and_grad(batch, targets, &mut analytic)?;

    let frozen: Vec<std::ops::Range<usize>> = model.frozen_ranges();
    let mut by_family: BTreeMap<Family, Vec<usize>> = BTreeMap::new();
    for i in 0..model.n_params() {
        if frozen.iter().any(|r| r.contains(&i)) {
            continue;
        }
        by_family.entry(model.family_of(i)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = n_coords.div_ceil(by_family.len().max(1));
    let mut chosen = BTreeSet::new();
    for idx in by_family.values_mut() {
        idx.shuffle(&mut rng);
        chosen.extend(idx.iter().take(per));
    }
    let mut rest: Vec<usize> = by_family.values().flatten().copied().filter(|i| !chosen.contains(i)).collect();
    rest.shuffle(&mut rng);
    let missing = n_coords.saturating_sub(chosen.len());
    chosen.extend(rest.into_iter().take(missing));

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        n_checked: 0,
        families: BTreeSet::new(),
        kinks: Vec::new(),
        worst: None,
    };
    for &i in &chosen {
        let theta = model.params()[i];
        probe.params_mut()[i] = theta + eps;
        let (fp, _, lp) = probe.loss_inner(batch, targets)?;
        let sp = fp.relu_signature(&probe);
        probe.params_mut()[i] = theta - eps;
        let (fm, _, lm) = probe.loss_inner(batch, targets)?;
        let sm = fm.relu_signature(&probe);
        probe.params_mut()[i] = theta;
        if sp != sm {
            report.kinks.push(i);
            continue;
        }
        let numeric = (lp - lm) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        report.n_checked += 1;
        report.families.insert(model.family_of(i));
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            if err >= report.max_rel_error {
                report.worst = Some((i, a, numeric));
            }
        }
    }
    Ok(report)
}
