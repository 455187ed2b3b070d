use super::tasks::{RetrievalTask, N_CANDIDATES};
use crate::dataset::FeatureStore;
use crate::error::{Error, Result};
use crate::model::cosine_similarity;
use crate::trainer::ModelCheckpoint;

/// Indices of `features` by descending cosine similarity to `embedding`,
/// ties to the lower index, with the similarity of each ranked entry.
pub fn rank_by_similarity(embedding: &[f32], features: &[&[f32]]) -> Result<Vec<(usize, f64)>> {
    let query: Vec<f64> = embedding.iter().map(|&x| f64::from(x)).collect();
    let mut scored = features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let f: Vec<f64> = f.iter().map(|&x| f64::from(x)).collect();
            Ok((i, cosine_similarity(&query, &f)?))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored)
}

/// Candidate positions of `task`, best first.
pub fn rank_candidates(ckpt: &ModelCheckpoint, task: &RetrievalTask, store: &FeatureStore) -> Result<Vec<usize>> {
    let embedding = ckpt.embed_tokens(&task.command_tokens)?;
    let features = task
        .candidates
        .iter()
        .map(|c| {
            store
                .get(&c.object_class, c.instance_id)
                .map(|r| r.vector.as_slice())
                .ok_or_else(|| Error::data(format!("no feature for {}#{}", c.object_class, c.instance_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_similarity(&embedding, &features)?.into_iter().map(|(i, _)| i).collect())
}

/// Percentage of tasks with a gold candidate among the first `k` ranked.
pub fn topk_accuracy(rankings: &[Vec<usize>], tasks: &[RetrievalTask], k: usize) -> Result<f64> {
    if rankings.len() != tasks.len() {
        return Err(Error::data(format!("{} rankings for {} tasks", rankings.len(), tasks.len())));
    }
    if !(1..=N_CANDIDATES).contains(&k) {
        return Err(Error::config(format!("k must be in 1..={N_CANDIDATES}, got {k}")));
    }
    if tasks.is_empty() {
        return Err(Error::data("no tasks to score"));
    }
    let hits = rankings.iter().zip(tasks).filter(|(r, t)| hit(r, t, k)).count();
    Ok(100.0 * hits as f64 / tasks.len() as f64)
}

pub(crate) fn hit(ranking: &[usize], task: &RetrievalTask, k: usize) -> bool {
    ranking.iter().take(k).any(|i| task.gold_indices.contains(i))
}
