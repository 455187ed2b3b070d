//! JSON run configuration shared by every pipeline stage.
//!
//! Unknown keys are rejected and every field has a default, so `{}` is a
//! valid configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    default_nonces, default_templates, parse_templates, split_templates, CommandMode, CommandTemplate, UnkPolicy,
};
use crate::error::{read_text, Error, Result};
use crate::eval::EvalConfig;
use crate::miner::{parse_whitelist, DEFAULT_OBJECT_WHITELIST, DEFAULT_VERB_WHITELIST, OBJECT_RELATIONS};
use crate::model::CellKind;
use crate::trainer::{ModelDims, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub miner: MinerConfig,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinerConfig {
    /// Dependency relations linking a verb to its object.
    pub relations: Vec<String>,
    /// Verb whitelist file; the shipped list when absent.
    pub verb_whitelist: Option<PathBuf>,
    /// Keep every verb, ignoring `verb_whitelist`.
    pub all_verbs: bool,
    /// Object whitelist file; the shipped list when absent.
    pub object_whitelist: Option<PathBuf>,
    pub min_frequency: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            relations: OBJECT_RELATIONS.iter().map(|r| r.to_string()).collect(),
            verb_whitelist: None,
            all_verbs: false,
            object_whitelist: None,
            min_frequency: 1,
        }
    }
}

impl MinerConfig {
    pub fn verb_whitelist(&self) -> Result<Option<BTreeSet<String>>> {
        if self.all_verbs {
            return Ok(None);
        }
        Ok(Some(match &self.verb_whitelist {
            Some(path) => parse_whitelist(&read_text(path)?),
            None => parse_whitelist(DEFAULT_VERB_WHITELIST),
        }))
    }

    pub fn object_whitelist(&self) -> Result<BTreeSet<String>> {
        Ok(match &self.object_whitelist {
            Some(path) => parse_whitelist(&read_text(path)?),
            None => parse_whitelist(DEFAULT_OBJECT_WHITELIST),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Template file; the shipped templates when absent.
    pub templates_path: Option<PathBuf>,
    /// Nonce word file for the unknown-noun mode; the shipped list when absent.
    pub nonces_path: Option<PathBuf>,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub mode: CommandMode,
    /// Positive samples to generate.
    pub target_size: usize,
    /// Train and evaluate on disjoint halves of the templates.
    pub disjoint_templates: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            templates_path: None,
            nonces_path: None,
            holdout_fraction: 0.2,
            seed: 0,
            mode: CommandMode::VerbOnly,
            target_size: 3745,
            disjoint_templates: false,
        }
    }
}

impl DatasetConfig {
    fn all_templates(&self) -> Result<Vec<CommandTemplate>> {
        match &self.templates_path {
            Some(path) => parse_templates(&read_text(path)?),
            None => Ok(default_templates()),
        }
    }

    pub fn train_templates(&self) -> Result<Vec<CommandTemplate>> {
        let all = self.all_templates()?;
        Ok(if self.disjoint_templates { split_templates(&all).0 } else { all })
    }

    pub fn eval_templates(&self) -> Result<Vec<CommandTemplate>> {
        let all = self.all_templates()?;
        Ok(if self.disjoint_templates { split_templates(&all).1 } else { all })
    }

    pub fn nonces(&self) -> Result<Vec<String>> {
        match &self.nonces_path {
            Some(path) => Ok(parse_whitelist(&read_text(path)?).into_iter().collect()),
            None => Ok(default_nonces()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dims: ModelDims,
    pub cell: CellKind,
    pub margin: f64,
    pub unk_policy: UnkPolicy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ModelConfig {
            dims: t.dims,
            cell: t.cell,
            margin: t.margin,
            unk_policy: t.unk_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub early_stop_patience: Option<usize>,
    pub validation_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_epsilon: t.adam_epsilon,
            batch_size: t.batch_size,
            seed: t.seed,
            early_stop_patience: t.early_stop_patience,
            validation_fraction: t.validation_fraction,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the compact JSON form.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dataset.holdout_fraction > 0.0 && self.dataset.holdout_fraction < 1.0) {
            return Err(Error::config("dataset.holdout_fraction must be in (0, 1)"));
        }
        if self.dataset.mode == CommandMode::VerbUnknownNoun {
            return Err(Error::config("dataset.mode cannot be verb+unknown-noun"));
        }
        if self.dataset.target_size == 0 {
            return Err(Error::config("dataset.target_size must be >= 1"));
        }
        self.train_config().validate()?;
        self.eval.validate()
    }

    /// Replaces every stage seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dataset.seed = seed;
        self.train.seed = seed;
        self.eval.seed = seed;
        self
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            lr: self.train.lr,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            adam_epsilon: self.train.adam_epsilon,
            margin: self.model.margin,
            batch_size: self.train.batch_size,
            seed: self.train.seed,
            dims: self.model.dims,
            cell: self.model.cell,
            unk_policy: self.model.unk_policy,
            early_stop_patience: self.train.early_stop_patience,
            validation_fraction: self.train.validation_fraction,
        }
    }
}
