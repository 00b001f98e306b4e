//! Raw records → imputed hourly grids, vocabularies, class balancing.

mod binning;
pub mod cache;
mod oversample;
mod vocab;

pub use binning::{
    bin_hourly, build_grid, impute, static_records, Aggregator, BinPolicy, ImputeMode,
    UNOBSERVED_CAT,
};
pub use oversample::{oversample, Oversampled};
pub use vocab::{build_vocabs, Provenance, Vocabulary};

use crate::schema::NUM_NUMERICAL;
use crate::types::HourlyGrid;

/// Per-channel mean and standard deviation of the numerical block. Off in the
/// canonical configuration, where values are fed in native units.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: [f64; NUM_NUMERICAL],
    pub std: [f64; NUM_NUMERICAL],
    pub provenance: Provenance,
}

impl ZScore {
    /// Statistics over every hour of the given (training) grids.
    pub fn fit<'a, I>(grids: I) -> Self
    where
        I: IntoIterator<Item = &'a HourlyGrid>,
    {
        let mut n = 0usize;
        let mut sum = [0.0; NUM_NUMERICAL];
        let mut sq = [0.0; NUM_NUMERICAL];
        let mut ids = Vec::new();
        for g in grids {
            ids.push(g.stay_id);
            for row in g.numeric.chunks_exact(NUM_NUMERICAL) {
                n += 1;
                for v in 0..NUM_NUMERICAL {
                    sum[v] += row[v];
                    sq[v] += row[v] * row[v];
                }
            }
        }
        let n = n.max(1) as f64;
        let mean: [f64; NUM_NUMERICAL] = std::array::from_fn(|v| sum[v] / n);
        let std = std::array::from_fn(|v| {
            let var = (sq[v] / n - mean[v] * mean[v]).max(0.0);
            if var > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        });
        Self {
            mean,
            std,
            provenance: Provenance::of_stays(ids),
        }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for (v, x) in row.iter_mut().enumerate() {
            *x = (*x - self.mean[v]) / self.std[v];
        }
    }
}
