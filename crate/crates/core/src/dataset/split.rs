use super::{Dataset, DatasetError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    Fraction { train_fraction: f64 },
    Indices { train: Vec<usize>, test: Vec<usize> },
}

/// Train/test row indices, each side in ascending order.
pub fn split_indices(n: usize, spec: &SplitSpec, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let (mut train, mut test) = match spec {
        SplitSpec::Fraction { train_fraction } => {
            let f = *train_fraction;
            if !(f > 0.0 && f < 1.0) {
                return Err(DatasetError::InvalidSplit(format!(
                    "train_fraction must lie in (0, 1), got {f}"
                )));
            }
            let n_train = (f * n as f64).round() as usize;
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let test = idx.split_off(n_train.min(n));
            (idx, test)
        }
        SplitSpec::Indices { train, test } => {
            let mut seen = HashSet::new();
            for &i in train.iter().chain(test) {
                if i >= n {
                    return Err(DatasetError::InvalidSplit(format!(
                        "index {i} out of bounds for {n} rows"
                    )));
                }
                if !seen.insert(i) {
                    return Err(DatasetError::InvalidSplit(format!(
                        "index {i} appears more than once"
                    )));
                }
            }
            (train.clone(), test.clone())
        }
    };
    if train.is_empty() || test.is_empty() {
        return Err(DatasetError::InvalidSplit(format!(
            "empty side: {} train rows, {} test rows",
            train.len(),
            test.len()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(data: &Dataset, spec: &SplitSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.len(), spec, seed)?;
    Ok((data.subset(&train)?, data.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fraction_split_sizes_and_determinism() {
        let spec = SplitSpec::Fraction {
            train_fraction: 0.8,
        };
        let (tr, te) = split_indices(10, &spec, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert_eq!(split_indices(10, &spec, 1).unwrap(), (tr, te));
    }

    #[test]
    fn degenerate_fractions_rejected() {
        for f in [0.0, 1.0, 1.5, -0.1] {
            let spec = SplitSpec::Fraction { train_fraction: f };
            assert!(split_indices(10, &spec, 1).is_err());
        }
        // rounds to an empty test side
        let spec = SplitSpec::Fraction {
            train_fraction: 0.99,
        };
        assert!(split_indices(10, &spec, 1).is_err());
    }

    #[test]
    fn explicit_indices() {
        let spec = SplitSpec::Indices {
            train: vec![3, 0, 1],
            test: vec![2],
        };
        assert_eq!(
            split_indices(5, &spec, 0).unwrap(),
            (vec![0, 1, 3], vec![2])
        );
        let overlap = SplitSpec::Indices {
            train: vec![0, 1],
            test: vec![1],
        };
        assert!(split_indices(5, &overlap, 0).is_err());
        let oob = SplitSpec::Indices {
            train: vec![0],
            test: vec![9],
        };
        assert!(split_indices(5, &oob, 0).is_err());
        let empty = SplitSpec::Indices {
            train: vec![0],
            test: vec![],
        };
        assert!(split_indices(5, &empty, 0).is_err());
    }

    #[test]
    fn spec_json_forms() {
        let f: SplitSpec = serde_json::from_str(r#"{"train_fraction":0.75}"#).unwrap();
        assert_eq!(
            f,
            SplitSpec::Fraction {
                train_fraction: 0.75
            }
        );
        let i: SplitSpec = serde_json::from_str(r#"{"train":[0],"test":[1]}"#).unwrap();
        assert!(matches!(i, SplitSpec::Indices { .. }));
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_exhaustive(n in 2usize..300, f in 0.05f64..0.95, seed in any::<u64>()) {
            let spec = SplitSpec::Fraction { train_fraction: f };
            if let Ok((tr, te)) = split_indices(n, &spec, seed) {
                let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(split_indices(n, &spec, seed).unwrap(), (tr, te));
            }
        }
    }
}
