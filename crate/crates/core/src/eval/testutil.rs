use crate::dataset::{
    generate_training_set, split_by_object, synth_features, CommandMode, CommandTemplate, FeatureStore, PairSet,
    SplitManifest, SynthSpec, TrainingSetSpec, UnkPolicy, VerbObjectPair,
};
use crate::trainer::{train, ModelCheckpoint, ModelDims, TrainConfig};

use super::TaskSource;

pub const DIM: usize = 16;

pub struct Fixture {
    pub store: FeatureStore,
    pub pairs: Vec<VerbObjectPair>,
    pub manifest: SplitManifest,
    pub pair_set: PairSet,
    pub test_store: FeatureStore,
}

impl Fixture {
    pub fn new(seed: u64) -> Self {
        let (store, pairs) = synth_features(&SynthSpec {
            n_verbs: 8,
            n_classes: 30,
            instances_per_class: 3,
            dim: DIM,
            cluster_separation: 6.0,
            noise_sigma: 0.5,
            seed,
        })
        .unwrap();
        let manifest = split_by_object(&pairs, 0.4, seed).unwrap();
        let pair_set = manifest.pair_set();
        let test_store = store.restrict(&manifest.test_classes);
        Fixture {
            store,
            pairs,
            manifest,
            pair_set,
            test_store,
        }
    }

    pub fn source<'a>(&'a self, templates: &'a [CommandTemplate], nonces: &'a [String]) -> TaskSource<'a> {
        TaskSource {
            test_pairs: &self.manifest.test_pairs,
            pair_set: &self.pair_set,
            store: &self.test_store,
            templates,
            nonces,
        }
    }

    pub fn checkpoint(&self) -> ModelCheckpoint {
        let data = generate_training_set(
            &self.manifest,
            &crate::dataset::default_templates(),
            &self.store,
            &TrainingSetSpec {
                target_size: 60,
                mode: CommandMode::VerbOnly,
                unk_policy: UnkPolicy::default(),
                seed: 0,
            },
        )
        .unwrap();
        let config = TrainConfig {
            epochs: 2,
            lr: 1e-2,
            dims: ModelDims {
                word_dim: 6,
                hidden: 8,
                out: DIM,
            },
            ..TrainConfig::default()
        };
        train(&config, &data).unwrap()
    }
}
