//! Categorical vocabularies and train-side provenance tags.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use crate::schema::{Schema, NUM_CATEGORICAL, NUM_NUMERICAL, UNKNOWN};
use crate::types::{StayId, StayMeta, StayRecordRaw};

/// Fingerprint of the set of stays an artifact was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance([u8; 32]);

impl Provenance {
    pub fn of_stays<I: IntoIterator<Item = StayId>>(stays: I) -> Self {
        let set: BTreeSet<StayId> = stays.into_iter().collect();
        let mut h = Sha256::new();
        for s in set {
            h.update(s.to_le_bytes());
        }
        Provenance(h.finalize().into())
    }
}

/// A schema whose vocabularies were built from a known set of stays.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub schema: Schema,
    pub provenance: Provenance,
}

/// Builds each categorical vocabulary as `unknown` followed by the sorted
/// distinct values seen in `stays`. Call with training stays only; anything
/// unseen maps to index 0 later.
pub fn build_vocabs<'a, I>(base: &Schema, stays: I) -> Vocabulary
where
    I: IntoIterator<Item = (&'a StayMeta, &'a [StayRecordRaw])>,
{
    let mut seen: [BTreeSet<String>; NUM_CATEGORICAL] = Default::default();
    let mut ids = Vec::new();
    let idx = |name: &str| base.index_of(name).expect("canonical variable") - NUM_NUMERICAL;
    let (i_admit, i_eth, i_gender) = (idx("Admission diagnosis"), idx("Ethnicity"), idx("Gender"));
    for (meta, records) in stays {
        ids.push(meta.stay_id);
        for (slot, value) in [
            (i_admit, &meta.admission_diagnosis),
            (i_eth, &meta.ethnicity),
            (i_gender, &meta.gender),
        ] {
            let v = value.trim();
            if !v.is_empty() {
                seen[slot].insert(v.to_string());
            }
        }
        for rec in records {
            if rec.variable >= NUM_NUMERICAL {
                let v = rec.value.trim();
                if !v.is_empty() {
                    seen[rec.variable - NUM_NUMERICAL].insert(v.to_string());
                }
            }
        }
    }
    let mut schema = base.clone();
    for (spec, values) in schema.variables[NUM_NUMERICAL..].iter_mut().zip(seen) {
        let mut vocab = vec![UNKNOWN.to_string()];
        vocab.extend(values.into_iter().filter(|v| v != UNKNOWN));
        spec.vocab = Some(vocab);
    }
    Vocabulary {
        schema,
        provenance: Provenance::of_stays(ids),
    }
}
