use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{object_classes, PairSet, VerbObjectPair};
use crate::error::{read_text, write_file, Error, Result};
use crate::rng::{stream, streams};

/// Class-disjoint train/test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub seed: u64,
    pub holdout_fraction: f64,
    pub train_classes: BTreeSet<String>,
    pub test_classes: BTreeSet<String>,
    pub train_pairs: Vec<VerbObjectPair>,
    pub test_pairs: Vec<VerbObjectPair>,
}

impl SplitManifest {
    /// Every pair of both splits.
    pub fn pair_set(&self) -> PairSet {
        self.train_pairs.iter().chain(&self.test_pairs).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.train_classes.intersection(&self.test_classes).next() {
            return Err(Error::data(format!("class {c:?} is in both splits")));
        }
        for (pairs, classes, name) in [
            (&self.train_pairs, &self.train_classes, "train"),
            (&self.test_pairs, &self.test_classes, "test"),
        ] {
            if let Some(p) = pairs.iter().find(|p| !classes.contains(&p.object_class)) {
                return Err(Error::data(format!(
                    "{name} pair ({}, {}) has a class outside the {name} split",
                    p.verb, p.object_class
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: SplitManifest = serde_json::from_str(&read_text(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }
}

/// Number of held-out classes: `holdout_fraction * n_classes` rounded to nearest, at least one.
pub fn holdout_count(n_classes: usize, holdout_fraction: f64) -> usize {
    ((holdout_fraction * n_classes as f64).round() as usize).max(1)
}

/// Shuffles the object classes with `seed` and holds out a fraction of them for testing.
pub fn split_by_object(pairs: &[VerbObjectPair], holdout_fraction: f64, seed: u64) -> Result<SplitManifest> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::config(format!("holdout fraction {holdout_fraction} not in (0, 1)")));
    }
    let mut classes: Vec<String> = object_classes(pairs).into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::data(format!("need at least 2 object classes, found {}", classes.len())));
    }
    classes.shuffle(&mut stream(seed, streams::SPLIT));
    let n_test = holdout_count(classes.len(), holdout_fraction);
    if n_test >= classes.len() {
        return Err(Error::data(format!(
            "holdout fraction {holdout_fraction} leaves no training classes out of {}",
            classes.len()
        )));
    }
    let test_classes: BTreeSet<String> = classes[..n_test].iter().cloned().collect();
    let train_classes: BTreeSet<String> = classes[n_test..].iter().cloned().collect();
    let (test_pairs, train_pairs): (Vec<_>, Vec<_>) =
        pairs.iter().cloned().partition(|p| test_classes.contains(&p.object_class));
    Ok(SplitManifest {
        seed,
        holdout_fraction,
        train_classes,
        test_classes,
        train_pairs,
        test_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs_over(n_classes: usize) -> Vec<VerbObjectPair> {
        (0..n_classes)
            .flat_map(|c| {
                (0..=(c % 3)).map(move |v| VerbObjectPair::new(format!("verb{v}"), format!("class{c:03}")).unwrap())
            })
            .collect()
    }

    #[test]
    fn holdout_counts() {
        assert_eq!(holdout_count(216, 0.2), 43);
        assert_eq!(holdout_count(5, 0.2), 1);
        assert_eq!(holdout_count(40, 0.2), 8);
        assert_eq!(holdout_count(3, 0.1), 1);
    }

    #[test]
    fn full_scale_split() {
        let m = split_by_object(&pairs_over(216), 0.2, 1).unwrap();
        assert_eq!(m.test_classes.len(), 43);
        assert_eq!(m.train_classes.len(), 173);
        m.validate().unwrap();
    }

    #[test]
    fn five_classes() {
        let m = split_by_object(&pairs_over(5), 0.2, 9).unwrap();
        assert_eq!((m.train_classes.len(), m.test_classes.len()), (4, 1));
    }

    #[test]
    fn deterministic() {
        let p = pairs_over(30);
        assert_eq!(split_by_object(&p, 0.2, 4).unwrap(), split_by_object(&p, 0.2, 4).unwrap());
        assert_ne!(
            split_by_object(&p, 0.2, 4).unwrap().test_classes,
            split_by_object(&p, 0.2, 5).unwrap().test_classes
        );
    }

    #[test]
    fn degenerate_inputs() {
        assert!(split_by_object(&pairs_over(1), 0.2, 0).is_err());
        assert!(split_by_object(&pairs_over(10), 0.0, 0).is_err());
        assert!(split_by_object(&pairs_over(10), 1.0, 0).is_err());
        assert!(split_by_object(&pairs_over(2), 0.9, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = split_by_object(&pairs_over(12), 0.25, 3).unwrap();
        let back: SplitManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(m, back);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        for key in ["seed", "holdout_fraction", "train_classes", "test_classes", "train_pairs", "test_pairs"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
