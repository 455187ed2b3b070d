//! Five-way retrieval evaluation: task generation, ranking, top-k scoring,
//! repeated runs with standard errors, random baselines and size sweeps.

mod baseline;
mod rank;
mod sweep;
mod tasks;
#[cfg(test)]
mod testutil;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use baseline::{permutations, random_baseline, random_baseline_exact, HUMAN_TOP1};
pub use rank::{rank_by_similarity, rank_candidates, topk_accuracy};
pub use sweep::{data_size_sweep, SweepInputs, SweepReport, SweepRow};
pub use tasks::{CandidateRef, RetrievalTask, TaskSource, N_CANDIDATES};

use crate::dataset::{CommandMode, FeatureStore, PairSet, SplitManifest, VerbObjectPair};
use crate::error::{Error, Result};
use crate::rng::{stream, streams};
use crate::trainer::ModelCheckpoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_tasks: usize,
    pub runs: usize,
    pub seed: u64,
    pub mode: CommandMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_tasks: 200,
            runs: 5,
            seed: 0,
            mode: CommandMode::VerbOnly,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.n_tasks == 0 {
            return Err(Error::config("evaluation needs at least one run and one task"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub top1: f64,
    pub top2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerbScore {
    pub top1: f64,
    pub top2: f64,
    pub n: usize,
}

/// Accuracies are percentages; standard errors are over run means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub n_tasks: usize,
    pub runs: usize,
    pub top1_mean: f64,
    pub top1_se: f64,
    pub top2_mean: f64,
    pub top2_se: f64,
    pub per_run: Vec<RunScore>,
    /// Pooled over every run.
    pub per_verb: BTreeMap<String, VerbScore>,
    /// Exact random-ranker accuracies on the evaluated tasks.
    pub random_top1: f64,
    pub random_top2: f64,
    pub checkpoint_fingerprint: String,
    pub config_fingerprint: String,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Tasks of run `run` under `config`; fixed by `(config.seed, run)`.
pub fn run_tasks(source: &TaskSource<'_>, config: &EvalConfig, run: usize) -> Result<Vec<RetrievalTask>> {
    let mut rng = stream(config.seed, streams::RUN_BASE + run as u64);
    tasks::generate_tasks(source, config.n_tasks, config.mode, &mut rng)
}

/// Tasks drawn from a standalone seed.
pub fn generate_tasks(source: &TaskSource<'_>, n_tasks: usize, mode: CommandMode, seed: u64) -> Result<Vec<RetrievalTask>> {
    tasks::generate_tasks(source, n_tasks, mode, &mut stream(seed, streams::TASKS))
}

/// Mean and `std(n-1) / sqrt(n)`; zero error for a single value.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Candidate pool and pair annotations for the held-out side of a split.
pub fn test_source<'a>(
    manifest: &'a SplitManifest,
    pair_set: &'a PairSet,
    test_store: &'a FeatureStore,
    templates: &'a [crate::dataset::CommandTemplate],
    nonces: &'a [String],
) -> TaskSource<'a> {
    TaskSource {
        test_pairs: &manifest.test_pairs,
        pair_set,
        store: test_store,
        templates,
        nonces,
    }
}

/// Runs `config.runs` evaluations, each on freshly sampled tasks.
pub fn run_eval(ckpt: &ModelCheckpoint, source: &TaskSource<'_>, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    if source.store.dim() != ckpt.params.dims.out {
        return Err(Error::DimMismatch {
            expected: ckpt.params.dims.out,
            found: source.store.dim(),
        });
    }
    let mut per_run = Vec::with_capacity(config.runs);
    let mut verb_hits: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    let mut all_tasks = Vec::with_capacity(config.runs * config.n_tasks);
    for run in 0..config.runs {
        let tasks = run_tasks(source, config, run)?;
        let rankings = tasks
            .iter()
            .map(|t| rank_candidates(ckpt, t, source.store))
            .collect::<Result<Vec<_>>>()?;
        for (r, t) in rankings.iter().zip(&tasks) {
            let e = verb_hits.entry(t.verb.clone()).or_default();
            e.0 += usize::from(rank::hit(r, t, 1));
            e.1 += usize::from(rank::hit(r, t, 2));
            e.2 += 1;
        }
        per_run.push(RunScore {
            top1: topk_accuracy(&rankings, &tasks, 1)?,
            top2: topk_accuracy(&rankings, &tasks, 2)?,
        });
        all_tasks.extend(tasks);
    }
    let (top1_mean, top1_se) = mean_and_se(&per_run.iter().map(|r| r.top1).collect::<Vec<_>>());
    let (top2_mean, top2_se) = mean_and_se(&per_run.iter().map(|r| r.top2).collect::<Vec<_>>());
    let (random_top1, random_top2) = random_baseline_exact(&all_tasks)?;
    let per_verb = verb_hits
        .into_iter()
        .map(|(verb, (h1, h2, n))| {
            let pct = |h: usize| 100.0 * h as f64 / n as f64;
            (verb, VerbScore { top1: pct(h1), top2: pct(h2), n })
        })
        .collect();
    let checkpoint_fingerprint = ckpt.fingerprint();
    let config_fingerprint = {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(config)?);
        h.update(checkpoint_fingerprint.as_bytes());
        hex::encode(h.finalize())
    };
    Ok(EvalReport {
        config: config.clone(),
        n_tasks: config.n_tasks,
        runs: config.runs,
        top1_mean,
        top1_se,
        top2_mean,
        top2_se,
        per_run,
        per_verb,
        random_top1,
        random_top2,
        checkpoint_fingerprint,
        config_fingerprint,
    })
}

/// Evaluates on features and pairs from another dataset without retraining.
///
/// Every verb must be known to the checkpoint vocabulary.
pub fn cross_dataset_eval(
    ckpt: &ModelCheckpoint,
    external_store: &FeatureStore,
    external_pairs: &[VerbObjectPair],
    templates: &[crate::dataset::CommandTemplate],
    nonces: &[String],
    config: &EvalConfig,
) -> Result<EvalReport> {
    if external_store.dim() != ckpt.params.dims.out {
        return Err(Error::DimMismatch {
            expected: ckpt.params.dims.out,
            found: external_store.dim(),
        });
    }
    let mut unknown: Vec<&str> = external_pairs
        .iter()
        .map(|p| p.verb.as_str())
        .filter(|v| !ckpt.vocab.contains(v))
        .collect();
    unknown.sort_unstable();
    unknown.dedup();
    if !unknown.is_empty() {
        return Err(Error::data(format!("verbs unknown to the checkpoint: {}", unknown.join(", "))));
    }
    let pair_set: PairSet = external_pairs.iter().collect();
    let source = TaskSource {
        test_pairs: external_pairs,
        pair_set: &pair_set,
        store: external_store,
        templates,
        nonces,
    };
    run_eval(ckpt, &source, config)
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::dataset::{default_nonces, default_templates};

    #[test]
    fn standard_error() {
        assert_eq!(mean_and_se(&[62.0]), (62.0, 0.0));
        assert_eq!(mean_and_se(&[50.0, 50.0, 50.0]), (50.0, 0.0));
        // values 1..=5: sample variance 2.5, se = sqrt(2.5 / 5)
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m, 3.0);
        assert!((se - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn report_invariants_and_determinism() {
        let fx = Fixture::new(1);
        let ckpt = fx.checkpoint();
        let (templates, nonces) = (default_templates(), default_nonces());
        let source = fx.source(&templates, &nonces);
        let config = EvalConfig {
            n_tasks: 30,
            runs: 3,
            ..EvalConfig::default()
        };
        let before = ckpt.fingerprint();
        let a = run_eval(&ckpt, &source, &config).unwrap();
        assert_eq!(ckpt.fingerprint(), before);
        assert_eq!(a.to_json(), run_eval(&ckpt, &source, &config).unwrap().to_json());
        assert!(a.top2_mean >= a.top1_mean && a.top1_se >= 0.0 && a.top2_mean <= 100.0);
        assert_eq!(a.per_run.len(), 3);
        assert_eq!(a.per_verb.values().map(|v| v.n).sum::<usize>(), 90);
        assert!((a.random_top1 - 20.0).abs() < 1e-9 && (a.random_top2 - 40.0).abs() < 1e-9);
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert!(json.get("top1_mean").is_some() && json.get("top1_se").is_some());

        let single = run_eval(&ckpt, &source, &EvalConfig { runs: 1, ..config.clone() }).unwrap();
        assert_eq!(single.top1_se, 0.0);
        assert!(run_eval(&ckpt, &source, &EvalConfig { runs: 0, ..config }).is_err());
    }

    #[test]
    fn runs_resample_tasks() {
        let fx = Fixture::new(2);
        let (templates, nonces) = (default_templates(), default_nonces());
        let source = fx.source(&templates, &nonces);
        let config = EvalConfig::default();
        assert_ne!(run_tasks(&source, &config, 0).unwrap(), run_tasks(&source, &config, 1).unwrap());
        assert_eq!(run_tasks(&source, &config, 1).unwrap(), run_tasks(&source, &config, 1).unwrap());
    }

    #[test]
    fn cross_dataset_checks() {
        let fx = Fixture::new(3);
        let ckpt = fx.checkpoint();
        let (templates, nonces) = (default_templates(), default_nonces());
        let config = EvalConfig {
            n_tasks: 10,
            runs: 2,
            ..EvalConfig::default()
        };
        let report = cross_dataset_eval(&ckpt, &fx.store, &fx.pairs, &templates, &nonces, &config).unwrap();
        assert_eq!(report.runs, 2);

        let narrow = FeatureStore::new(DIM + 1);
        assert!(matches!(
            cross_dataset_eval(&ckpt, &narrow, &fx.pairs, &templates, &nonces, &config),
            Err(Error::DimMismatch { .. })
        ));
        let mut pairs = fx.pairs.clone();
        pairs.push(VerbObjectPair::new("juggle", "object00").unwrap());
        let err = cross_dataset_eval(&ckpt, &fx.store, &pairs, &templates, &nonces, &config).unwrap_err();
        assert!(err.to_string().contains("juggle"), "{err}");
    }
}
