use rand::Rng;

use crate::types::TaskInstance;

#[derive(Debug, Clone)]
pub struct Oversampled {
    /// Originals in input order, followed by the drawn duplicates.
    pub instances: Vec<TaskInstance>,
    pub n_duplicates: usize,
    /// Set when the input held a single class and was returned unchanged.
    pub warning: Option<String>,
}

/// Random duplication with replacement of the minority class until both
/// classes have the same count. Non-binary instances are rejected by panic;
/// callers only pass mortality and decompensation instances.
pub fn oversample<R: Rng + ?Sized>(instances: Vec<TaskInstance>, rng: &mut R) -> Oversampled {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..instances.len()).partition(|&i| {
        instances[i]
            .binary_label()
            .expect("oversampling applies to binary-labelled instances only")
    });
    if pos.is_empty() || neg.is_empty() {
        return Oversampled {
            instances,
            n_duplicates: 0,
            warning: Some("single-class input; oversampling skipped".into()),
        };
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        let d = neg.len() - pos.len();
        (pos, d)
    } else {
        let d = pos.len() - neg.len();
        (neg, d)
    };
    let mut out = instances;
    out.reserve(deficit);
    for _ in 0..deficit {
        let pick = minority[rng.gen_range(0..minority.len())];
        let dup = out[pick].clone();
        out.push(dup);
    }
    Oversampled {
        instances: out,
        n_duplicates: deficit,
        warning: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Label, Task};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inst(id: i64, y: bool) -> TaskInstance {
        TaskInstance {
            stay_id: id,
            window: 0..24,
            label: Label::Binary(y),
            task: Task::Mortality,
        }
    }

    fn counts(v: &[TaskInstance]) -> (usize, usize) {
        let p = v.iter().filter(|i| i.binary_label().unwrap()).count();
        (v.len() - p, p)
    }

    #[test]
    fn three_to_one() {
        let input = vec![inst(1, false), inst(2, false), inst(3, false), inst(4, true)];
        let out = oversample(input.clone(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(counts(&out.instances), (3, 3));
        assert_eq!(out.n_duplicates, 2);
        assert_eq!(&out.instances[..4], input.as_slice());
    }

    #[test]
    fn balanced_and_single_class_unchanged() {
        let input = vec![inst(1, false), inst(2, true)];
        let out = oversample(input.clone(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out.instances, input);
        assert!(out.warning.is_none());

        let input = vec![inst(1, false), inst(2, false)];
        let out = oversample(input.clone(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out.instances, input);
        assert!(out.warning.is_some());
    }

    #[test]
    fn reproducible_duplicates() {
        let input: Vec<_> = (0..1100).map(|i| inst(i, i >= 1000)).collect();
        let a = oversample(input.clone(), &mut ChaCha8Rng::seed_from_u64(9));
        let b = oversample(input, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(counts(&a.instances), (1000, 1000));
        assert_eq!(a.instances, b.instances);
        assert!(a.instances[1100..].iter().all(|i| i.stay_id >= 1000));
    }
}
