use rand::seq::{index, IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::dataset::{tokenize, templates_for, CommandMode, CommandTemplate, FeatureStore, PairSet, VerbObjectPair};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const N_CANDIDATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRef {
    pub object_class: String,
    pub instance_id: u32,
}

/// One five-way retrieval problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalTask {
    pub verb: String,
    pub command: String,
    pub command_tokens: Vec<String>,
    pub candidates: Vec<CandidateRef>,
    /// Positions whose class pairs with `verb`.
    pub gold_indices: Vec<usize>,
}

impl RetrievalTask {
    /// Checks the candidate count, class distinctness and that the gold set is
    /// exactly the candidates pairable with the verb.
    pub fn validate(&self, pair_set: &PairSet) -> Result<()> {
        if self.candidates.len() != N_CANDIDATES {
            return Err(Error::data(format!("task has {} candidates", self.candidates.len())));
        }
        let mut classes: Vec<&str> = self.candidates.iter().map(|c| c.object_class.as_str()).collect();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() != N_CANDIDATES {
            return Err(Error::data("task candidates repeat an object class"));
        }
        let gold: Vec<usize> = (0..N_CANDIDATES)
            .filter(|&i| pair_set.contains(&self.verb, &self.candidates[i].object_class))
            .collect();
        if gold.is_empty() || gold != self.gold_indices {
            return Err(Error::data(format!(
                "gold indices {:?} disagree with the pairs for {:?}",
                self.gold_indices, self.verb
            )));
        }
        Ok(())
    }
}

/// Sampled task inputs shared across runs.
#[derive(Debug, Clone, Copy)]
pub struct TaskSource<'a> {
    /// Pairs to draw (verb, gold class) from.
    pub test_pairs: &'a [VerbObjectPair],
    /// Every known pair; decides which classes may serve as distractors.
    pub pair_set: &'a PairSet,
    /// Candidate pool; usually restricted to the test classes.
    pub store: &'a FeatureStore,
    pub templates: &'a [CommandTemplate],
    /// Stand-in object words for the unknown-noun mode.
    pub nonces: &'a [String],
}

impl TaskSource<'_> {
    fn check(&self, mode: CommandMode) -> Result<()> {
        if self.test_pairs.is_empty() {
            return Err(Error::data("no test pairs to build tasks from"));
        }
        if self.store.n_classes() < N_CANDIDATES {
            return Err(Error::data(format!(
                "candidate store has {} classes, need at least {N_CANDIDATES}",
                self.store.n_classes()
            )));
        }
        if mode == CommandMode::VerbUnknownNoun && self.nonces.is_empty() {
            return Err(Error::config("unknown-noun mode needs at least one nonce word"));
        }
        templates_for(self.templates, mode)?;
        for p in self.test_pairs {
            if !self.store.has_class(&p.object_class) {
                return Err(Error::data(format!("no features for test class {:?}", p.object_class)));
            }
            let free = self.distractor_classes(&p.verb).len();
            if free < N_CANDIDATES - 1 {
                return Err(Error::data(format!(
                    "verb {:?} has only {free} non-pairable classes, need {}",
                    p.verb,
                    N_CANDIDATES - 1
                )));
            }
        }
        Ok(())
    }

    fn distractor_classes(&self, verb: &str) -> Vec<&str> {
        self.store.classes().filter(|c| !self.pair_set.contains(verb, c)).collect()
    }
}

/// `n_tasks` tasks drawn from `rng`.
pub fn generate_tasks(source: &TaskSource<'_>, n_tasks: usize, mode: CommandMode, rng: &mut Rng) -> Result<Vec<RetrievalTask>> {
    source.check(mode)?;
    let templates = templates_for(source.templates, mode)?;
    let mut tasks = Vec::with_capacity(n_tasks);
    for _ in 0..n_tasks {
        let pair = source.test_pairs.choose(rng).expect("checked non-empty");
        let instances: Vec<_> = source.store.instances(&pair.object_class).collect();
        let gold = instances.choose(rng).expect("class present");

        let pool = source.distractor_classes(&pair.verb);
        let mut candidates = vec![CandidateRef {
            object_class: gold.object_class.clone(),
            instance_id: gold.instance_id,
        }];
        for i in index::sample(rng, pool.len(), N_CANDIDATES - 1) {
            let rec = source.store.instances(pool[i]).collect::<Vec<_>>();
            let rec = rec.choose(rng).expect("class present");
            candidates.push(CandidateRef {
                object_class: rec.object_class.clone(),
                instance_id: rec.instance_id,
            });
        }
        candidates.shuffle(rng);

        let template = templates.choose(rng).expect("checked non-empty");
        let object = match mode {
            CommandMode::VerbUnknownNoun => source.nonces.choose(rng).expect("checked non-empty").as_str(),
            _ => pair.object_class.as_str(),
        };
        let command = template.render(&pair.verb, object);
        let gold_indices = (0..N_CANDIDATES)
            .filter(|&i| source.pair_set.contains(&pair.verb, &candidates[i].object_class))
            .collect();
        tasks.push(RetrievalTask {
            verb: pair.verb.clone(),
            command_tokens: tokenize(&command)?,
            command,
            candidates,
            gold_indices,
        });
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::Fixture;
    use super::*;
    use crate::dataset::{default_nonces, default_templates};
    use crate::rng::stream;

    #[test]
    fn tasks_are_sound_and_reproducible() {
        let fx = Fixture::new(1);
        let (templates, nonces) = (default_templates(), default_nonces());
        let source = fx.source(&templates, &nonces);
        let tasks = generate_tasks(&source, 100, CommandMode::VerbNoun, &mut stream(4, 0)).unwrap();
        for t in &tasks {
            t.validate(&fx.pair_set).unwrap();
            assert_eq!(t.gold_indices.len(), 1);
            for c in &t.candidates {
                assert!(fx.manifest.test_classes.contains(&c.object_class));
                assert!(fx.test_store.get(&c.object_class, c.instance_id).is_some());
            }
        }
        assert_eq!(tasks, generate_tasks(&source, 100, CommandMode::VerbNoun, &mut stream(4, 0)).unwrap());
        // the gold position is not fixed
        assert!(tasks.iter().any(|t| t.gold_indices != tasks[0].gold_indices));
    }

    #[test]
    fn unknown_noun_commands_use_nonces() {
        let fx = Fixture::new(2);
        let templates = default_templates();
        let nonces = vec!["dax".to_string()];
        let source = fx.source(&templates, &nonces);
        for t in generate_tasks(&source, 20, CommandMode::VerbUnknownNoun, &mut stream(0, 0)).unwrap() {
            assert!(t.command_tokens.contains(&"dax".to_string()), "{}", t.command);
            assert!(t.command_tokens.contains(&t.verb));
            assert!(t.candidates.iter().all(|c| !t.command_tokens.contains(&c.object_class)));
        }
        let none: Vec<String> = Vec::new();
        let source = fx.source(&templates, &none);
        assert!(generate_tasks(&source, 1, CommandMode::VerbUnknownNoun, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn insufficient_distractors_names_verb() {
        let fx = Fixture::new(3);
        let templates = default_templates();
        let mut pair_set: Vec<VerbObjectPair> = fx.manifest.test_pairs.clone();
        let verb = pair_set[0].verb.clone();
        for c in fx.test_store.classes() {
            pair_set.push(VerbObjectPair::new(verb.clone(), c).unwrap());
        }
        let pair_set: PairSet = pair_set.iter().collect();
        let source = TaskSource {
            pair_set: &pair_set,
            ..fx.source(&templates, &[])
        };
        let err = generate_tasks(&source, 5, CommandMode::VerbOnly, &mut stream(0, 0)).unwrap_err();
        assert!(err.to_string().contains(&format!("{verb:?}")), "{err}");
    }

    #[test]
    fn validate_rejects_broken_tasks() {
        let fx = Fixture::new(4);
        let (templates, nonces) = (default_templates(), default_nonces());
        let source = fx.source(&templates, &nonces);
        let task = generate_tasks(&source, 1, CommandMode::VerbOnly, &mut stream(0, 0)).unwrap().remove(0);
        let mut wrong_gold = task.clone();
        wrong_gold.gold_indices = vec![(task.gold_indices[0] + 1) % N_CANDIDATES];
        assert!(wrong_gold.validate(&fx.pair_set).is_err());
        let mut repeated = task.clone();
        repeated.candidates[1] = repeated.candidates[0].clone();
        assert!(repeated.validate(&fx.pair_set).is_err());
        let mut short = task;
        short.candidates.pop();
        assert!(short.validate(&fx.pair_set).is_err());
    }
}
