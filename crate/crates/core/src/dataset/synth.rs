//! Synthetic stand-in for image features, with known ground-truth affordances.

use std::collections::BTreeSet;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureRecord, FeatureStore, VerbObjectPair};
use crate::error::{Error, Result};
use crate::rng::{stream, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_verbs: usize,
    pub n_classes: usize,
    pub instances_per_class: usize,
    pub dim: usize,
    pub cluster_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

pub fn verb_name(i: usize) -> String {
    format!("verb{i:02}")
}

pub fn class_name(i: usize) -> String {
    format!("object{i:02}")
}

/// Generates a feature store whose class centroids are built from per-verb
/// concept directions, plus the verb/class pairs that generated it.
///
/// Every class gets verb `class % n_verbs` plus up to two more at random, so
/// every verb is used at least once.
pub fn synth_features(spec: &SynthSpec) -> Result<(FeatureStore, Vec<VerbObjectPair>)> {
    if spec.n_verbs < 2 || spec.n_classes < spec.n_verbs {
        return Err(Error::config("synthetic data needs n_classes >= n_verbs >= 2"));
    }
    if spec.dim < 8 {
        return Err(Error::config("synthetic data needs dim >= 8"));
    }
    if spec.instances_per_class == 0 || spec.cluster_separation <= 0.0 || spec.noise_sigma < 0.0 {
        return Err(Error::config(
            "synthetic data needs instances_per_class >= 1, separation > 0, sigma >= 0",
        ));
    }
    let mut rng = stream(spec.seed, streams::SYNTH);
    let directions: Vec<Vec<f64>> = (0..spec.n_verbs)
        .map(|_| {
            let v: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
            normalized(&v)
        })
        .collect();

    let mut store = FeatureStore::new(spec.dim);
    let mut pairs = Vec::new();
    for c in 0..spec.n_classes {
        let k = rng.random_range(1..=3usize).min(spec.n_verbs);
        let mut verbs = BTreeSet::from([c % spec.n_verbs]);
        while verbs.len() < k {
            verbs.insert(rng.random_range(0..spec.n_verbs));
        }
        let mut sum = vec![0.0f64; spec.dim];
        for &v in &verbs {
            for (s, d) in sum.iter_mut().zip(&directions[v]) {
                *s += d;
            }
            pairs.push(VerbObjectPair::new(verb_name(v), class_name(c))?);
        }
        let centroid: Vec<f64> = normalized(&sum).iter().map(|x| x * spec.cluster_separation).collect();
        for instance in 0..spec.instances_per_class {
            let vector = centroid
                .iter()
                .map(|&m| {
                    let n: f64 = rng.sample(StandardNormal);
                    (m + spec.noise_sigma * n) as f32
                })
                .collect();
            store.push(FeatureRecord {
                object_class: class_name(c),
                instance_id: instance as u32,
                vector,
            })?;
        }
    }
    pairs.sort();
    Ok((store, pairs))
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PairSet;

    fn spec(sigma: f64) -> SynthSpec {
        SynthSpec {
            n_verbs: 6,
            n_classes: 16,
            instances_per_class: 5,
            dim: 64,
            cluster_separation: 8.0,
            noise_sigma: sigma,
            seed: 21,
        }
    }

    fn cos(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn zero_noise_gives_identical_instances() {
        let (store, _) = synth_features(&spec(0.0)).unwrap();
        for class in store.classes() {
            let inst: Vec<_> = store.instances(class).collect();
            assert!(inst.windows(2).all(|w| w[0].vector == w[1].vector));
        }
    }

    #[test]
    fn deterministic_bytes() {
        let (a, pa) = synth_features(&spec(1.0)).unwrap();
        let (b, pb) = synth_features(&spec(1.0)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(pa, pb);
    }

    #[test]
    fn every_class_has_one_to_three_verbs_and_every_verb_is_used() {
        let s = spec(1.0);
        let (_, pairs) = synth_features(&s).unwrap();
        for c in 0..s.n_classes {
            let n = pairs.iter().filter(|p| p.object_class == class_name(c)).count();
            assert!((1..=3).contains(&n));
        }
        for v in 0..s.n_verbs {
            assert!(pairs.iter().any(|p| p.verb == verb_name(v)));
        }
    }

    #[test]
    fn within_class_more_similar_than_unrelated_classes() {
        let (store, pairs) = synth_features(&spec(1.0)).unwrap();
        let set: PairSet = pairs.iter().collect();
        let verbs_of = |c: &str| -> BTreeSet<String> {
            pairs.iter().filter(|p| p.object_class == c).map(|p| p.verb.clone()).collect()
        };
        let (mut within, mut nw, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        let recs = store.records();
        for (i, a) in recs.iter().enumerate() {
            for b in &recs[i + 1..] {
                if a.object_class == b.object_class {
                    within += cos(&a.vector, &b.vector);
                    nw += 1;
                } else if verbs_of(&a.object_class).is_disjoint(&verbs_of(&b.object_class)) {
                    cross += cos(&a.vector, &b.vector);
                    nc += 1;
                }
            }
        }
        assert!(nw > 0 && nc > 0);
        assert!(within / nw as f64 > cross / nc as f64);
        assert!(!set.is_empty());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec(1.0);
        s.dim = 4;
        assert!(synth_features(&s).is_err());
        let mut s = spec(1.0);
        s.n_classes = 3;
        assert!(synth_features(&s).is_err());
    }
}
