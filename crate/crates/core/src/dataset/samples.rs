//! Balanced positive/negative command-feature samples and their file format.
//!
//! Samples file (little-endian): magic `VGSMPL01`, `u64` JSON-header length,
//! JSON header `{dim, count, vocabulary}`, then per sample: `i8` label,
//! `u16`-prefixed verb, `u16`-prefixed object class, `u32` instance id,
//! `u16` token count, `u32` token ids, `dim` `f32` feature values.

use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::ByteReader;
use super::{
    build_vocab, templates_for, tokenize, CommandMode, CommandTemplate, FeatureRecord, FeatureStore, PairSet,
    SplitManifest, TokenizedCommand, UnkPolicy, Vocabulary,
};
use crate::error::{read_file, write_file, Error, Result};
use crate::rng::{stream, streams, Rng};

pub const SAMPLES_MAGIC: &[u8; 8] = b"VGSMPL01";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub verb: String,
    pub object_class: String,
    pub instance_id: u32,
    pub command: TokenizedCommand,
    pub feature: Vec<f32>,
    /// +1 when the verb pairs with the feature's class, -1 otherwise.
    pub label: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub vocab: Vocabulary,
    pub dim: usize,
    pub samples: Vec<TrainingSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSetSpec {
    /// Number of positive samples; the same number of negatives is added.
    pub target_size: usize,
    pub mode: CommandMode,
    pub unk_policy: UnkPolicy,
    pub seed: u64,
}

/// Draws one instance uniformly among classes that do not pair with `verb`.
pub fn negative_sample<'s>(
    verb: &str,
    pair_set: &PairSet,
    store: &'s FeatureStore,
    rng: &mut Rng,
) -> Result<&'s FeatureRecord> {
    let candidates: Vec<&FeatureRecord> = store
        .records()
        .iter()
        .filter(|r| !pair_set.contains(verb, &r.object_class))
        .collect();
    candidates
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::data(format!("verb {verb:?} pairs with every class in the store")))
}

/// Builds `target_size` positives spread evenly over the training pairs and
/// as many negatives, then shuffles them together.
///
/// Only instances of training classes are drawn. The vocabulary covers every
/// template expansion of every training pair.
pub fn generate_training_set(
    manifest: &SplitManifest,
    templates: &[CommandTemplate],
    store: &FeatureStore,
    spec: &TrainingSetSpec,
) -> Result<TrainingSet> {
    let pairs = &manifest.train_pairs;
    if pairs.is_empty() {
        return Err(Error::data("manifest has no training pairs"));
    }
    if spec.target_size < pairs.len() {
        return Err(Error::config(format!(
            "target size {} is smaller than the {} training pairs",
            spec.target_size,
            pairs.len()
        )));
    }
    if spec.mode == CommandMode::VerbUnknownNoun {
        return Err(Error::config("training commands cannot use the unknown-noun mode"));
    }
    let templates = templates_for(templates, spec.mode)?;
    let train_store = store.restrict(&manifest.train_classes);
    for p in pairs {
        if !train_store.has_class(&p.object_class) {
            return Err(Error::data(format!("no features for training class {:?}", p.object_class)));
        }
    }
    if train_store.n_classes() < 2 {
        return Err(Error::data("feature store needs at least 2 training classes"));
    }
    let pair_set = manifest.pair_set();

    let expansions: Vec<Vec<String>> = pairs
        .iter()
        .flat_map(|p| templates.iter().map(move |t| t.render(&p.verb, &p.object_class)))
        .map(|c| tokenize(&c))
        .collect::<Result<_>>()?;
    let vocab = build_vocab(&expansions, spec.unk_policy);

    let mut rng = stream(spec.seed, streams::TRAIN_SET);
    let base = spec.target_size / pairs.len();
    let extra = spec.target_size % pairs.len();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let mut counts = vec![base; pairs.len()];
    for &i in &order[..extra] {
        counts[i] += 1;
    }

    let mut samples = Vec::with_capacity(2 * spec.target_size);
    for (pair, &count) in pairs.iter().zip(&counts) {
        let instances: Vec<&FeatureRecord> = train_store.instances(&pair.object_class).collect();
        for _ in 0..count {
            let template = templates.choose(&mut rng).expect("non-empty");
            let command = TokenizedCommand::new(&template.render(&pair.verb, &pair.object_class), &vocab)?;
            let pos = instances.choose(&mut rng).expect("non-empty");
            let neg = negative_sample(&pair.verb, &pair_set, &train_store, &mut rng)?;
            for (rec, label) in [(*pos, 1), (neg, -1)] {
                samples.push(TrainingSample {
                    verb: pair.verb.clone(),
                    object_class: rec.object_class.clone(),
                    instance_id: rec.instance_id,
                    command: command.clone(),
                    feature: rec.vector.clone(),
                    label,
                });
            }
        }
    }
    samples.shuffle(&mut rng);
    Ok(TrainingSet {
        vocab,
        dim: store.dim(),
        samples,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesHeader {
    dim: usize,
    count: usize,
    vocabulary: Vocabulary,
}

impl TrainingSet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&SamplesHeader {
            dim: self.dim,
            count: self.samples.len(),
            vocabulary: self.vocab.clone(),
        })
        .expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(SAMPLES_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for s in &self.samples {
            out.push(s.label as u8);
            for text in [&s.verb, &s.object_class] {
                out.extend_from_slice(&(text.len() as u16).to_le_bytes());
                out.extend_from_slice(text.as_bytes());
            }
            out.extend_from_slice(&s.instance_id.to_le_bytes());
            out.extend_from_slice(&(s.command.token_ids.len() as u16).to_le_bytes());
            for &id in &s.command.token_ids {
                out.extend_from_slice(&(id as u32).to_le_bytes());
            }
            for x in &s.feature {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "samples file");
        if r.take(8)? != SAMPLES_MAGIC {
            return Err(Error::BadMagic {
                what: "samples file",
                expected: "VGSMPL01",
            });
        }
        let header_len = r.u64()? as usize;
        let header: SamplesHeader = serde_json::from_slice(r.take(header_len)?)?;
        let vocab = header.vocabulary;
        let mut samples = Vec::with_capacity(header.count);
        let string = |r: &mut ByteReader| -> Result<String> {
            let n = r.u16()? as usize;
            String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::data("invalid UTF-8 in samples file"))
        };
        for _ in 0..header.count {
            let label = r.take(1)?[0] as i8;
            if label != 1 && label != -1 {
                return Err(Error::data(format!("invalid label {label}")));
            }
            let verb = string(&mut r)?;
            let object_class = string(&mut r)?;
            let instance_id = r.u32()?;
            let n_tokens = r.u16()? as usize;
            let mut token_ids = Vec::with_capacity(n_tokens);
            let mut tokens = Vec::with_capacity(n_tokens);
            for _ in 0..n_tokens {
                let id = r.u32()? as usize;
                let tok = vocab
                    .token(id)
                    .ok_or_else(|| Error::data(format!("token id {id} outside vocabulary")))?;
                tokens.push(tok.to_string());
                token_ids.push(id);
            }
            let feature = r.f32s(header.dim)?;
            samples.push(TrainingSample {
                verb,
                object_class,
                instance_id,
                command: TokenizedCommand { tokens, token_ids },
                feature,
                label,
            });
        }
        r.finish()?;
        Ok(TrainingSet {
            vocab,
            dim: header.dim,
            samples,
        })
    }

    /// SHA-256 of the serialized set, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{default_templates, split_by_object, synth_features, SynthSpec, VerbObjectPair};

    fn rec(class: &str, id: u32) -> FeatureRecord {
        FeatureRecord {
            object_class: class.into(),
            instance_id: id,
            vector: vec![1.0, id as f32 + 1.0],
        }
    }

    fn fixture() -> (SplitManifest, FeatureStore) {
        let spec = SynthSpec {
            n_verbs: 5,
            n_classes: 20,
            instances_per_class: 4,
            dim: 16,
            cluster_separation: 8.0,
            noise_sigma: 1.0,
            seed: 2,
        };
        let (store, pairs) = synth_features(&spec).unwrap();
        (split_by_object(&pairs, 0.2, 2).unwrap(), store)
    }

    fn spec(target: usize, seed: u64) -> TrainingSetSpec {
        TrainingSetSpec {
            target_size: target,
            mode: CommandMode::VerbOnly,
            unk_policy: UnkPolicy::default(),
            seed,
        }
    }

    #[test]
    fn only_valid_class_is_drawn() {
        let store = FeatureStore::from_records(2, vec![rec("cleaver", 0), rec("banana", 0)]).unwrap();
        let set: PairSet = [VerbObjectPair::new("cut", "cleaver").unwrap()].iter().collect();
        let mut rng = stream(0, 0);
        for _ in 0..20 {
            assert_eq!(negative_sample("cut", &set, &store, &mut rng).unwrap().object_class, "banana");
        }
    }

    #[test]
    fn verb_paired_with_everything_fails() {
        let store = FeatureStore::from_records(2, vec![rec("cleaver", 0), rec("banana", 0)]).unwrap();
        let pairs = [VerbObjectPair::new("cut", "cleaver").unwrap(), VerbObjectPair::new("cut", "banana").unwrap()];
        let set: PairSet = pairs.iter().collect();
        assert!(negative_sample("cut", &set, &store, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn negative_sampling_is_uniform_over_instances() {
        let store = FeatureStore::from_records(
            2,
            vec![rec("cleaver", 0), rec("banana", 0), rec("banana", 1), rec("pear", 0), rec("pear", 1)],
        )
        .unwrap();
        let set: PairSet = [VerbObjectPair::new("cut", "cleaver").unwrap()].iter().collect();
        let mut rng = stream(5, 0);
        let n = 10_000;
        let bananas = (0..n)
            .filter(|_| negative_sample("cut", &set, &store, &mut rng).unwrap().object_class == "banana")
            .count();
        let freq = bananas as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.03, "{freq}");
    }

    #[test]
    fn balanced_and_evenly_spread() {
        let (m, store) = fixture();
        let n = m.train_pairs.len();
        let target = 3 * n + 2;
        let ts = generate_training_set(&m, &default_templates(), &store, &spec(target, 1)).unwrap();
        let pos: Vec<_> = ts.samples.iter().filter(|s| s.label == 1).collect();
        assert_eq!(pos.len(), target);
        assert_eq!(ts.samples.len(), 2 * target);
        for p in &m.train_pairs {
            let c = pos.iter().filter(|s| s.verb == p.verb && s.object_class == p.object_class).count();
            assert!(c == 3 || c == 4, "{c}");
        }
    }

    #[test]
    fn labels_sound_and_train_classes_only() {
        let (m, store) = fixture();
        let set = m.pair_set();
        let ts = generate_training_set(&m, &default_templates(), &store, &spec(m.train_pairs.len() * 2, 4)).unwrap();
        for s in &ts.samples {
            assert_eq!(set.contains(&s.verb, &s.object_class), s.label == 1);
            assert!(m.train_classes.contains(&s.object_class));
            assert_eq!(s.command.tokens.last().unwrap(), &s.verb);
        }
    }

    #[test]
    fn deterministic_and_file_round_trip() {
        let (m, store) = fixture();
        let a = generate_training_set(&m, &default_templates(), &store, &spec(m.train_pairs.len(), 9)).unwrap();
        let b = generate_training_set(&m, &default_templates(), &store, &spec(m.train_pairs.len(), 9)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(TrainingSet::from_bytes(&a.to_bytes()).unwrap(), a);
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn precondition_errors() {
        let (m, store) = fixture();
        assert!(generate_training_set(&m, &default_templates(), &store, &spec(1, 0)).is_err());
        let mut missing = m.clone();
        missing.train_classes.insert("nothing".into());
        missing.train_pairs.push(VerbObjectPair::new("verb00", "nothing").unwrap());
        let err = generate_training_set(&missing, &default_templates(), &store, &spec(100, 0)).unwrap_err();
        assert!(err.to_string().contains("nothing"));
        let mut unk = spec(100, 0);
        unk.mode = CommandMode::VerbUnknownNoun;
        assert!(generate_training_set(&m, &default_templates(), &store, &unk).is_err());
    }

    #[test]
    fn noun_mode_vocabulary_includes_class_names() {
        let (m, store) = fixture();
        let mut s = spec(m.train_pairs.len(), 0);
        s.mode = CommandMode::VerbNoun;
        let ts = generate_training_set(&m, &default_templates(), &store, &s).unwrap();
        for c in &m.train_classes {
            assert!(ts.vocab.contains(c));
        }
        for c in &m.test_classes {
            assert!(!ts.vocab.contains(c));
        }
    }
}
