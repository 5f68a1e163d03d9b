use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Index sets into a labeled dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffled split with the given train and validation fractions;
/// the remainder is the test set. Every part is sorted.
pub fn stratified_split(labels: &[usize], train: f64, val: f64, seed: u64) -> Result<Split> {
    if !(train > 0.0 && val >= 0.0 && train + val < 1.0) {
        return Err(Error::Invalid(format!(
            "split fractions train={train}, val={val} leave no test set"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::Dataset(format!(
            "classification needs at least two classes, found {}",
            by_class.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for mut members in by_class.into_values() {
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((train * n as f64).round() as usize).clamp(1, n);
        let n_val = ((val * n as f64).round() as usize).min(n - n_train);
        split.train.extend(&members[..n_train]);
        split.val.extend(&members[n_train..n_train + n_val]);
        split.test.extend(&members[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighty_ten_ten_is_stratified() {
        let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let s = stratified_split(&labels, 0.8, 0.1, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (160, 20, 20));
        for part in [&s.train, &s.val, &s.test] {
            let ones = part.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(ones * 2, part.len());
        }
        let mut all: Vec<usize> = [s.train, s.val, s.test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(stratified_split(&[1, 1, 1], 0.8, 0.1, 0), Err(Error::Dataset(_))));
    }

    #[test]
    fn deterministic() {
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        assert_eq!(
            stratified_split(&labels, 0.8, 0.1, 9).unwrap(),
            stratified_split(&labels, 0.8, 0.1, 9).unwrap()
        );
    }
}
