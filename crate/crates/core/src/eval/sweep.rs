use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{random_baseline_exact, run_eval, run_tasks, EvalConfig, TaskSource};
use crate::dataset::{generate_training_set, CommandTemplate, FeatureStore, SplitManifest, TrainingSetSpec};
use crate::error::{Error, Result};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, Copy)]
pub struct SweepInputs<'a> {
    pub manifest: &'a SplitManifest,
    pub store: &'a FeatureStore,
    pub templates: &'a [CommandTemplate],
    pub nonces: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub top1_mean: f64,
    pub top1_se: f64,
    pub top2_mean: f64,
    pub top2_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub random_top1: f64,
    pub random_top2: f64,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per data size plus a random-ranker row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,top1,top1_se,top2,top2_se\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "Data size {},{:.1},{:.2},{:.1},{:.2}",
                r.size, r.top1_mean, r.top1_se, r.top2_mean, r.top2_se
            );
        }
        let _ = writeln!(out, "Random,{:.1},,{:.1},", self.random_top1, self.random_top2);
        out
    }
}

/// Trains one model per positive-sample count in `sizes` and evaluates each
/// on the same task sets.
pub fn data_size_sweep(
    inputs: SweepInputs<'_>,
    sizes: &[usize],
    data_spec: &TrainingSetSpec,
    train_config: &TrainConfig,
    eval_config: &EvalConfig,
) -> Result<SweepReport> {
    if sizes.is_empty() {
        return Err(Error::config("no sweep sizes"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(format!("sweep sizes must be strictly ascending: {sizes:?}")));
    }
    let pair_set = inputs.manifest.pair_set();
    let test_store = inputs.store.restrict(&inputs.manifest.test_classes);
    let source = TaskSource {
        test_pairs: &inputs.manifest.test_pairs,
        pair_set: &pair_set,
        store: &test_store,
        templates: inputs.templates,
        nonces: inputs.nonces,
    };
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let spec = TrainingSetSpec {
            target_size: size,
            ..*data_spec
        };
        let data = generate_training_set(inputs.manifest, inputs.templates, inputs.store, &spec)?;
        let ckpt = train(train_config, &data)?;
        let report = run_eval(&ckpt, &source, eval_config)?;
        rows.push(SweepRow {
            size,
            top1_mean: report.top1_mean,
            top1_se: report.top1_se,
            top2_mean: report.top2_mean,
            top2_se: report.top2_se,
        });
    }
    let tasks = run_tasks(&source, eval_config, 0)?;
    let (random_top1, random_top2) = random_baseline_exact(&tasks)?;
    Ok(SweepReport {
        rows,
        random_top1,
        random_top2,
    })
}
