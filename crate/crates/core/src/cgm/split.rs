use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training patients `TP` drawn from all patients `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientSplit {
    pub train_ids: BTreeSet<String>,
    pub all_ids: BTreeSet<String>,
    pub seed: u64,
    pub fraction: f64,
}

impl PatientSplit {
    pub fn is_train(&self, patient: &str) -> bool {
        self.train_ids.contains(patient)
    }
}

/// Number of training patients for `percent`% of `total`: round-half-up,
/// clamped to `[1, total − 1]`.
pub fn train_count(total: usize, percent: f64) -> usize {
    // (M·|P|)/100 keeps exact halves exact, e.g. 30·25/100 = 7.5.
    let raw = ((percent * total as f64) / 100.0 + 0.5).floor() as usize;
    let clamped = raw.clamp(1, total.saturating_sub(1).max(1));
    if clamped != raw {
        log::warn!(
            "{percent}% of {total} patients gives {raw} training patients; clamped to {clamped}"
        );
    }
    clamped
}

/// Uniformly draws `train_count` patients without replacement. Deterministic
/// given `seed` and independent of the order of `all_ids`.
pub fn split_patients<I, S>(all_ids: I, percent: f64, seed: u64) -> Result<PatientSplit>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let all_ids: BTreeSet<String> = all_ids.into_iter().map(Into::into).collect();
    if all_ids.len() < 2 {
        return Err(Error::param(
            "patients",
            format!("need at least 2 patients to split, got {}", all_ids.len()),
        ));
    }
    if !(percent > 0.0 && percent < 100.0) {
        return Err(Error::param(
            "train_percent",
            format!("must lie in (0, 100), got {percent}"),
        ));
    }
    let k = train_count(all_ids.len(), percent);
    let ordered: Vec<&String> = all_ids.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_ids = rand::seq::index::sample(&mut rng, ordered.len(), k)
        .into_iter()
        .map(|i| ordered[i].clone())
        .collect();
    Ok(PatientSplit {
        train_ids,
        all_ids,
        seed,
        fraction: percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:02}")).collect()
    }

    #[test]
    fn rounds_half_up() {
        assert_eq!(train_count(25, 30.0), 8);
        assert_eq!(train_count(25, 50.0), 13);
        assert_eq!(train_count(2, 50.0), 1);
        assert_eq!(train_count(10, 30.0), 3);
    }

    #[test]
    fn clamps_to_leave_both_sides_nonempty() {
        assert_eq!(train_count(10, 1.0), 1);
        assert_eq!(train_count(10, 99.0), 9);
    }

    #[test]
    fn desk_scale_split() {
        let split = split_patients(ids(25), 30.0, 7).unwrap();
        assert_eq!(split.train_ids.len(), 8);
        assert!(split.train_ids.is_subset(&split.all_ids));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = split_patients(ids(25), 30.0, 42).unwrap();
        let b = split_patients(ids(25).into_iter().rev(), 30.0, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert!(split_patients(ids(1), 50.0, 0).is_err());
        assert!(split_patients(ids(5), 0.0, 0).is_err());
        assert!(split_patients(ids(5), 100.0, 0).is_err());
    }

    #[test]
    fn selection_frequency_is_uniform() {
        let all = ids(10);
        let mut hits = vec![0usize; 10];
        let seeds = 10_000;
        for seed in 0..seeds {
            let split = split_patients(all.clone(), 30.0, seed).unwrap();
            for (i, id) in all.iter().enumerate() {
                if split.is_train(id) {
                    hits[i] += 1;
                }
            }
        }
        for h in hits {
            let freq = h as f64 / seeds as f64;
            assert!((freq - 0.30).abs() <= 0.02, "{freq}");
        }
    }
}
