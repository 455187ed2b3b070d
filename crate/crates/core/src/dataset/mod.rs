//! Training and evaluation data: pairs, splits, templates, vocabulary,
//! feature stores and sample generation.

mod features;
mod pairs;
mod samples;
mod split;
mod synth;
mod templates;
mod vocab;

pub(crate) use features::ByteReader;
pub use features::{FeatureRecord, FeatureStore, FEAT_MAGIC};
pub use pairs::{load_pairs, object_classes, pairs_to_tsv, parse_pairs, PairSet, VerbObjectPair};
pub use samples::{
    generate_training_set, negative_sample, TrainingSample, TrainingSet, TrainingSetSpec, SAMPLES_MAGIC,
};
pub use split::{holdout_count, split_by_object, SplitManifest};
pub use synth::{class_name, synth_features, verb_name, SynthSpec};
pub use templates::{
    default_nonces, default_templates, expand_templates, parse_templates, split_templates, templates_for,
    CommandMode, CommandTemplate, DEFAULT_NONCES, DEFAULT_TEMPLATES,
};
pub use vocab::{
    build_vocab, tokenize, TokenizedCommand, UnkPolicy, Vocabulary, HASH_BUCKETS, PAD_ID, PAD_TOKEN, UNK_ID,
    UNK_TOKEN,
};
