use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use verbground::config::RunConfig;
use verbground::dataset::{
    generate_training_set, load_pairs, pairs_to_tsv, split_by_object, synth_features, FeatureStore, SplitManifest,
    SynthSpec, TrainingSet, TrainingSetSpec,
};
use verbground::eval::{
    cross_dataset_eval, data_size_sweep, rank_by_similarity, run_eval, run_tasks, test_source, EvalConfig,
    SweepInputs, TaskSource,
};
use verbground::miner::{filter_pairs, mine_documents, pairs_to_tsv as mined_to_tsv};
use verbground::model::{grad_check, grad_check_subsample, random_case};
use verbground::trainer::{train_with_observer, ModelCheckpoint};
use verbground::Error;

use crate::{
    BuildArgs, Command, ConfigArg, EvalArgs, GradcheckArgs, MineArgs, RetrieveArgs, SplitArgs, SweepArgs, SynthArgs,
    TrainArgs, OUT_ROOT_ENV,
};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Mine(a) => mine(a),
        Command::Split(a) => split(a),
        Command::Build(a) => build(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn load_config(arg: &ConfigArg, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let config = match &arg.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(match seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn out_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if path.is_relative() => Path::new(&root).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<PathBuf, Failure> {
    let path = out_path(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
    }
    fs::write(&path, bytes).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn mine(a: MineArgs) -> Outcome {
    let mut config = load_config(&a.config, None)?;
    if a.all_verbs {
        config.miner.all_verbs = true;
    }
    let files = if a.conllu.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&a.conllu)
            .map_err(|e| io_failure(&a.conllu, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
            .collect();
        files.sort();
        files
    } else {
        vec![a.conllu.clone()]
    };
    if files.is_empty() {
        return Err(Error::Data(format!("no .conllu files in {}", a.conllu.display())).into());
    }
    let texts = files
        .iter()
        .map(|p| fs::read_to_string(p).map_err(|e| io_failure(p, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let mined = mine_documents(texts.iter().map(String::as_str), &config.miner.relations)?;
    let kept = filter_pairs(
        &mined,
        config.miner.verb_whitelist()?.as_ref(),
        &config.miner.object_whitelist()?,
        a.min_frequency.unwrap_or(config.miner.min_frequency),
    )?;
    let path = write_out(&a.out, mined_to_tsv(&kept).as_bytes())?;
    eprintln!("{} pairs from {} files -> {}", kept.len(), files.len(), path.display());
    Ok(())
}

fn split(a: SplitArgs) -> Outcome {
    let config = load_config(&a.config, a.seed)?;
    let pairs = load_pairs(&a.pairs)?;
    let fraction = a.holdout.unwrap_or(config.dataset.holdout_fraction);
    let manifest = split_by_object(&pairs, fraction, config.dataset.seed)?;
    let path = write_out(&a.out, manifest.to_json().as_bytes())?;
    eprintln!(
        "{} train / {} test classes -> {}",
        manifest.train_classes.len(),
        manifest.test_classes.len(),
        path.display()
    );
    Ok(())
}

fn build(a: BuildArgs) -> Outcome {
    let config = load_config(&a.config, a.seed)?;
    let manifest = SplitManifest::load(&a.manifest)?;
    let store = FeatureStore::load(&a.features)?;
    let spec = TrainingSetSpec {
        target_size: a.size.unwrap_or(config.dataset.target_size),
        mode: a.mode.unwrap_or(config.dataset.mode),
        unk_policy: config.model.unk_policy,
        seed: config.dataset.seed,
    };
    let data = generate_training_set(&manifest, &config.dataset.train_templates()?, &store, &spec)?;
    let path = write_out(&a.out, &data.to_bytes())?;
    eprintln!(
        "{} samples, vocabulary {} -> {}",
        data.samples.len(),
        data.vocab.len(),
        path.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let text = fs::read_to_string(&a.spec).map_err(|e| io_failure(&a.spec, e))?;
    let mut spec: SynthSpec = serde_json::from_str(&text).map_err(Error::from)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let (store, pairs) = synth_features(&spec)?;
    let feat = write_out(&a.out, &store.to_bytes())?;
    let pairs_path = a.pairs_out.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".pairs.tsv");
        PathBuf::from(p)
    });
    let pairs_path = write_out(&pairs_path, pairs_to_tsv(&pairs).as_bytes())?;
    eprintln!(
        "{} records -> {}, {} pairs -> {}",
        store.len(),
        feat.display(),
        pairs.len(),
        pairs_path.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Outcome {
    let mut config = load_config(&a.config, a.seed)?;
    if let Some(epochs) = a.epochs {
        config.train.epochs = epochs;
    }
    let data = TrainingSet::load(&a.samples)?;
    let mut log: Box<dyn std::io::Write> = match &a.log {
        Some(p) => {
            let p = out_path(p);
            Box::new(fs::File::create(&p).map_err(|e| io_failure(&p, e))?)
        }
        None => Box::new(std::io::stdout()),
    };
    let ckpt = train_with_observer(&config.train_config(), &data, &mut |entry, _| {
        let line = serde_json::to_string(entry).expect("log serializes");
        let _ = writeln!(log, "{line}");
    })?;
    let path = write_out(&a.out, &ckpt.to_bytes())?;
    eprintln!("{} epochs -> {}", ckpt.meta.epochs_run, path.display());
    Ok(())
}

fn eval_config(config: &RunConfig, a: &EvalArgs) -> EvalConfig {
    EvalConfig {
        n_tasks: a.n_tasks.unwrap_or(config.eval.n_tasks),
        runs: a.runs.unwrap_or(config.eval.runs),
        seed: config.eval.seed,
        mode: a.mode.unwrap_or(config.eval.mode),
    }
}

fn eval(a: EvalArgs) -> Outcome {
    let config = load_config(&a.config, a.seed)?;
    let ev = eval_config(&config, &a);
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let store = FeatureStore::load(&a.features)?;
    let templates = config.dataset.eval_templates()?;
    let nonces = config.dataset.nonces()?;

    let (report, tasks) = if let Some(pairs_path) = &a.external_pairs {
        let pairs = load_pairs(pairs_path)?;
        let report = cross_dataset_eval(&ckpt, &store, &pairs, &templates, &nonces, &ev)?;
        let pair_set = pairs.iter().collect();
        let source = TaskSource {
            test_pairs: &pairs,
            pair_set: &pair_set,
            store: &store,
            templates: &templates,
            nonces: &nonces,
        };
        let tasks = a.tasks_out.as_ref().map(|_| run_tasks(&source, &ev, 0)).transpose()?;
        (report, tasks)
    } else {
        let manifest = SplitManifest::load(a.manifest.as_deref().expect("clap requires one source"))?;
        let pair_set = manifest.pair_set();
        let test_store = store.restrict(&manifest.test_classes);
        let source = test_source(&manifest, &pair_set, &test_store, &templates, &nonces);
        let report = run_eval(&ckpt, &source, &ev)?;
        let tasks = a.tasks_out.as_ref().map(|_| run_tasks(&source, &ev, 0)).transpose()?;
        (report, tasks)
    };

    if let (Some(path), Some(tasks)) = (&a.tasks_out, tasks) {
        let mut lines = String::new();
        for t in &tasks {
            lines.push_str(&serde_json::to_string(t).map_err(Error::from)?);
            lines.push('\n');
        }
        write_out(path, lines.as_bytes())?;
    }
    match &a.out {
        Some(path) => {
            let path = write_out(path, report.to_json().as_bytes())?;
            eprintln!(
                "top-1 {:.1} ({:.2}), top-2 {:.1} ({:.2}) -> {}",
                report.top1_mean,
                report.top1_se,
                report.top2_mean,
                report.top2_se,
                path.display()
            );
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Outcome {
    let config = load_config(&a.config, a.seed)?;
    let manifest = SplitManifest::load(&a.manifest)?;
    let store = FeatureStore::load(&a.features)?;
    if config.dataset.disjoint_templates {
        return Err(Error::Config("sweep does not support disjoint_templates".into()).into());
    }
    let templates = config.dataset.train_templates()?;
    let nonces = config.dataset.nonces()?;
    let spec = TrainingSetSpec {
        target_size: 0,
        mode: config.dataset.mode,
        unk_policy: config.model.unk_policy,
        seed: config.dataset.seed,
    };
    let report = data_size_sweep(
        SweepInputs {
            manifest: &manifest,
            store: &store,
            templates: &templates,
            nonces: &nonces,
        },
        &a.sizes,
        &spec,
        &config.train_config(),
        &config.eval,
    )?;
    write_out(&a.out.join("sweep.json"), report.to_json().as_bytes())?;
    write_out(&a.out.join("sweep.csv"), report.to_csv().as_bytes())?;
    print!("{}", report.to_csv());
    Ok(())
}

fn retrieve(a: RetrieveArgs) -> Outcome {
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let store = FeatureStore::load(&a.features)?;
    if store.dim() != ckpt.params.dims.out {
        return Err(Error::DimMismatch {
            expected: ckpt.params.dims.out,
            found: store.dim(),
        }
        .into());
    }
    let records: Vec<_> = store
        .records()
        .iter()
        .filter(|r| a.classes.is_empty() || a.classes.contains(&r.object_class))
        .collect();
    if records.is_empty() {
        return Err(Error::Data("no candidate records".into()).into());
    }
    let embedding = ckpt.embed(&a.command)?;
    let features: Vec<&[f32]> = records.iter().map(|r| r.vector.as_slice()).collect();
    for (rank, (i, sim)) in rank_by_similarity(&embedding, &features)?.into_iter().take(a.k).enumerate() {
        println!("{}\t{}\t{}\t{sim:.3}", rank + 1, records[i].object_class, records[i].instance_id);
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Outcome {
    let (params, sample) = random_case(a.seed, a.cell);
    let err = match a.coords {
        Some(n) => grad_check_subsample(&params, &sample, a.epsilon, n, a.seed)?,
        None => grad_check(&params, &sample, a.epsilon)?,
    };
    println!("{err:.3e}");
    if err.is_finite() && err < a.tolerance {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: format!("max relative error {err:.3e} is not below {:.1e}", a.tolerance),
        })
    }
}
