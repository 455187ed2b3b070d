use rand::seq::SliceRandom;

use super::rank::hit;
use super::tasks::{RetrievalTask, N_CANDIDATES};
use crate::error::{Error, Result};
use crate::rng::{stream, streams};

/// Reference human top-1 on the original retrieval benchmark; informational only.
pub const HUMAN_TOP1: f64 = 78.0;

/// Every ordering of `0..n`, in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                extend(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Exact expected (top-1, top-2) of a uniformly random ranker, averaged over
/// tasks by enumerating all 120 candidate orderings.
pub fn random_baseline_exact(tasks: &[RetrievalTask]) -> Result<(f64, f64)> {
    if tasks.is_empty() {
        return Err(Error::data("no tasks for the random baseline"));
    }
    let perms = permutations(N_CANDIDATES);
    let (mut top1, mut top2) = (0usize, 0usize);
    for task in tasks {
        for p in &perms {
            top1 += usize::from(hit(p, task, 1));
            top2 += usize::from(hit(p, task, 2));
        }
    }
    let total = (tasks.len() * perms.len()) as f64;
    Ok((100.0 * top1 as f64 / total, 100.0 * top2 as f64 / total))
}

/// Monte Carlo estimate of the same quantity; trial `t` scores a random
/// ordering of task `t mod len`.
pub fn random_baseline(tasks: &[RetrievalTask], trials: usize, seed: u64) -> Result<(f64, f64)> {
    if tasks.is_empty() || trials == 0 {
        return Err(Error::data("random baseline needs tasks and at least one trial"));
    }
    let mut rng = stream(seed, streams::BASELINE);
    let mut order: Vec<usize> = (0..N_CANDIDATES).collect();
    let (mut top1, mut top2) = (0usize, 0usize);
    for t in 0..trials {
        order.shuffle(&mut rng);
        let task = &tasks[t % tasks.len()];
        top1 += usize::from(hit(&order, task, 1));
        top2 += usize::from(hit(&order, task, 2));
    }
    Ok((100.0 * top1 as f64 / trials as f64, 100.0 * top2 as f64 / trials as f64))
}
