use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use aptrigger::corpus::{
    extract_datasets, parse_corpus, read_samples, write_samples, write_stats, CorpusFormat, Sample,
};
use aptrigger::model::{
    build_model, load_embeddings_file, Checkpoint, EmbeddingTable, Model, Vocab,
};
use aptrigger::train::{
    compare_predictions, evaluate, labels, predictions, train, write_history, write_report,
    CompareReport, EvalReport, ReportIds,
};
use aptrigger::Rng;

use crate::config::RunConfig;
use crate::UsageError;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(UsageError(format!("{what} not found: {}", path.display())).into());
    }
    Ok(())
}

fn load_split(cfg: &RunConfig, dataset: &str, split: &str) -> Result<Vec<Sample>> {
    let path = cfg.split_path(dataset, split);
    require_file(&path, "dataset split")?;
    read_samples(&path).with_context(|| format!("reading {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    require_file(path, "checkpoint")?;
    let ckpt =
        Checkpoint::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    ckpt.model
        .validate()
        .with_context(|| format!("checkpoint {} is inconsistent", path.display()))?;
    Ok(ckpt)
}

pub fn extract(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let corpus_path = cfg
        .paths
        .corpus
        .as_ref()
        .ok_or_else(|| UsageError("no corpus path configured (paths.corpus)".into()))?;
    require_file(corpus_path, "corpus")?;
    let file = fs::File::open(corpus_path)
        .with_context(|| format!("opening {}", corpus_path.display()))?;
    let corpus = parse_corpus(BufReader::new(file), CorpusFormat::Conll3)
        .with_context(|| format!("parsing {}", corpus_path.display()))?;
    let extracted = extract_datasets(&corpus, &cfg.extraction)?;

    let stats_dir = cfg.stats_dir();
    create_dir(&stats_dir)?;
    let mut rows = Vec::with_capacity(extracted.datasets.len());
    for ds in &extracted.datasets {
        let dir = cfg.datasets_dir().join(&ds.name);
        create_dir(&dir)?;
        for (split, samples) in [
            ("train", &ds.split.train),
            ("dev", &ds.split.dev),
            ("test", &ds.split.test),
        ] {
            write_samples(&dir.join(format!("{split}.jsonl")), samples)?;
        }
        write_stats(
            &stats_dir.join(format!("{}.tsv", ds.name)),
            std::slice::from_ref(&ds.stats),
        )?;
        writeln!(
            out,
            "{}: {} positive, {} negative (train {}, dev {}, test {})",
            ds.name,
            ds.stats.positives,
            ds.stats.negatives,
            ds.stats.train.total(),
            ds.stats.dev.total(),
            ds.stats.test.total()
        )?;
        rows.push(ds.stats.clone());
    }
    write_stats(&stats_dir.join("summary.tsv"), &rows)?;
    Ok(())
}

pub fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.checkpoints_dir()
        .join(format!("{}-{}.json", cfg.dataset, cfg.model.variant.name()))
}

pub fn train_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let train_set = load_split(cfg, &cfg.dataset, "train")?;
    let dev_set = load_split(cfg, &cfg.dataset, "dev")?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(UsageError(format!(
            "dataset {} has an empty train or dev split",
            cfg.dataset
        ))
        .into());
    }
    if let Some(p) = &cfg.paths.embeddings {
        require_file(p, "embedding file")?;
    }

    let root = Rng::new(cfg.seed);
    let mut embed_rng = root.split("embeddings");
    let mut init_rng = root.split("init");
    let dim = cfg.model.word_dim;
    let embeddings = |vocab: &Vocab| -> aptrigger::Result<EmbeddingTable> {
        match &cfg.paths.embeddings {
            Some(p) => load_embeddings_file(p, vocab, dim, &mut embed_rng),
            None => Ok(EmbeddingTable::random(vocab, dim, &mut embed_rng)),
        }
    };
    let mut model = build_model(&cfg.model, &train_set, embeddings, &mut init_rng)
        .context("building the model")?;
    let outcome = train(model.classifier_mut(), &train_set, &dev_set, &cfg.train)?;

    create_dir(&cfg.checkpoints_dir())?;
    create_dir(&cfg.reports_dir())?;
    let ckpt_path = checkpoint_path(cfg);
    Checkpoint::new(&cfg.dataset, outcome.best_epoch, model).write(&ckpt_path)?;
    let history_path = cfg.reports_dir().join(format!(
        "{}-{}.history.jsonl",
        cfg.dataset,
        cfg.model.variant.name()
    ));
    write_history(&history_path, &outcome.history)?;
    writeln!(
        out,
        "best dev accuracy {:.4} at epoch {} ({} epochs run); checkpoint {}",
        outcome.best_dev_accuracy,
        outcome.best_epoch,
        outcome.history.len(),
        ckpt_path.display()
    )?;
    Ok(())
}

fn model_predictions(model: &Model, data: &[Sample]) -> Result<Vec<usize>> {
    Ok(predictions(model.classifier(), data)?)
}

pub fn eval_cmd(
    cfg: &RunConfig,
    checkpoint: &Path,
    split: &str,
    dataset: Option<&str>,
    out: &mut dyn Write,
) -> Result<EvalReport> {
    let ckpt = read_checkpoint(checkpoint)?;
    let dataset = dataset.unwrap_or(&ckpt.dataset);
    let data = load_split(cfg, dataset, split)?;
    if data.is_empty() {
        return Err(UsageError(format!("{dataset}/{split} is empty")).into());
    }
    let ids = ReportIds {
        model: ckpt.model.variant().name().into(),
        dataset: dataset.into(),
        split: split.into(),
        best_epoch: ckpt.best_epoch,
    };
    let report = evaluate(ckpt.model.classifier(), &data, &ids)?;
    create_dir(&cfg.reports_dir())?;
    let path = cfg
        .reports_dir()
        .join(format!("{}.{dataset}.{split}.eval.json", stem(checkpoint)));
    write_report(&path, &report)?;
    writeln!(
        out,
        "{} on {dataset}/{split}: accuracy {:.4} ({}/{}); report {}",
        report.model,
        report.accuracy,
        report.correct,
        report.samples,
        path.display()
    )?;
    Ok(report)
}

pub fn compare_cmd(
    cfg: &RunConfig,
    a: &Path,
    b: &Path,
    split: &str,
    out: &mut dyn Write,
) -> Result<CompareReport> {
    let ca = read_checkpoint(a)?;
    let cb = read_checkpoint(b)?;
    if ca.dataset != cb.dataset {
        return Err(UsageError(format!(
            "checkpoints were trained on different datasets ({} vs {})",
            ca.dataset, cb.dataset
        ))
        .into());
    }
    let data = load_split(cfg, &ca.dataset, split)?;
    let (name_a, name_b) = (stem(a), stem(b));
    let report = compare_predictions(
        (&name_a, &name_b),
        &ca.dataset,
        split,
        &model_predictions(&ca.model, &data)?,
        &model_predictions(&cb.model, &data)?,
        &labels(&data),
    )?;
    create_dir(&cfg.reports_dir())?;
    let path = cfg.reports_dir().join(format!(
        "{name_a}-vs-{name_b}.{}.{split}.compare.json",
        ca.dataset
    ));
    write_report(&path, &report)?;
    writeln!(
        out,
        "{name_a} vs {name_b}: b={} c={} chi2={:.4} p={:.4e} ({}); report {}",
        report.contingency.b,
        report.contingency.c,
        report.mcnemar.chi_squared,
        report.mcnemar.p_value,
        report.verdict,
        path.display()
    )?;
    Ok(report)
}
