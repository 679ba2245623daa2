use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use wvtext::corpus::{build_vocabulary, corpus_samples, read_sentences};
use wvtext::metrics::{evaluate, is_degenerate, read_records, BleuOptions, DEFAULT_SMOOTHING};
use wvtext::wvcnn::{
    accuracy, read_dataset, train_classifier as fit, write_accuracy_log, Architecture, Checkpoint,
    ClassifierTraining, CnnModel, LabeledSequence,
};
use wvtext::{build_huffman, train, EmbeddingTable, TrainingConfig};

use crate::config::{pick, require, RunConfig};
use crate::{
    CliError, EvalCaptionsArgs, EvalClassifierArgs, NearestArgs, TrainClassifierArgs,
    TrainEmbeddingsArgs,
};

type CmdResult = Result<(), CliError>;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

/// Rejects outputs that would overwrite an input or land in a missing
/// directory. Runs before any real work starts.
fn check_outputs(inputs: &[&Path], outputs: &[&Path]) -> CmdResult {
    let canon: Vec<PathBuf> = inputs.iter().filter_map(|p| p.canonicalize().ok()).collect();
    for out in outputs {
        if let Ok(c) = out.canonicalize() {
            if canon.contains(&c) {
                return Err(CliError::Usage(format!(
                    "{}: refusing to overwrite an input file",
                    out.display()
                )));
            }
        }
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => continue,
        };
        if !parent.is_dir() {
            return Err(CliError::Usage(format!(
                "{}: directory {} does not exist",
                out.display(),
                parent.display()
            )));
        }
    }
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CmdResult {
    let io = |e| CliError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    body(&mut out).map_err(io)?;
    out.flush().map_err(io)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub(crate) fn train_embeddings(a: TrainEmbeddingsArgs, f: &RunConfig) -> CmdResult {
    let corpus = require(a.corpus, f.corpus.clone(), "corpus")?;
    let out = require(a.out, f.out.clone(), "out")?;
    let loss_log = pick(a.loss_log, f.loss_log.clone(), with_suffix(&out, ".loss"));
    let vocab_out = a.vocab_out.or(f.vocab_out.clone());
    let codes_out = a.codes_out.or(f.codes_out.clone());
    let config = TrainingConfig {
        dim: pick(a.dim, f.dim, 100),
        half_window: pick(a.window, f.window, 5),
        kappa0: pick(a.lr, f.lr, 0.025),
        decay: pick(a.decay, f.decay, 0.85),
        batch: pick(a.batch, f.batch, 64),
        epochs: pick(a.epochs, f.epochs, 5),
        min_count: pick(a.min_count, f.min_count, 5),
        seed: pick(a.seed, f.seed, 1),
        deterministic: pick(a.deterministic, f.deterministic, false),
        threads: pick(a.threads, f.threads, 1),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut outputs = vec![out.as_path(), loss_log.as_path()];
    outputs.extend(vocab_out.as_deref());
    outputs.extend(codes_out.as_deref());
    let reader = open(&corpus)?;
    check_outputs(&[&corpus], &outputs)?;

    let sentences = read_sentences(reader).map_err(|e| CliError::at(&corpus, e))?;
    let vocab = build_vocabulary(&sentences, config.min_count).map_err(|e| CliError::at(&corpus, e))?;
    let tree = build_huffman(&vocab)?;
    let samples = corpus_samples(&sentences, &vocab, config.half_window);
    println!(
        "vocabulary {} words, {} training samples",
        vocab.len(),
        samples.len()
    );
    let outcome = train(&samples, &vocab, &tree, &config).map_err(|e| CliError::at(&corpus, e))?;
    for e in &outcome.losses {
        println!("epoch {} kappa {} loss {:.6}", e.epoch, e.kappa, e.mean_nll);
    }

    let table = EmbeddingTable::from_state(&vocab, &outcome.state)?;
    write_file(&out, |w| table.write(w))?;
    write_file(&loss_log, |w| outcome.write_loss_log(w))?;
    if let Some(path) = &vocab_out {
        write_file(path, |w| vocab.write_dump(w))?;
    }
    if let Some(path) = &codes_out {
        write_file(path, |w| tree.write_codes(&vocab, w))?;
    }
    Ok(())
}

fn load_dataset(path: &Path, reader: impl BufRead) -> Result<Vec<(usize, Vec<wvtext::Token>)>, CliError> {
    let rows = read_dataset(reader).map_err(|e| CliError::at(path, e))?;
    if rows.is_empty() {
        return Err(CliError::Domain(format!("{}: no labeled sentences", path.display())));
    }
    Ok(rows)
}

fn encode_all(
    rows: &[(usize, Vec<wvtext::Token>)],
    lookup: impl Fn(&str) -> Option<usize>,
    seq_len: usize,
    pad: usize,
    path: &Path,
) -> Result<Vec<LabeledSequence>, CliError> {
    let data: Vec<LabeledSequence> = rows
        .iter()
        .map(|(label, tokens)| LabeledSequence::encode(tokens, &lookup, seq_len, pad, *label))
        .collect();
    if data.iter().all(|s| s.ids.iter().all(|&id| id == pad)) {
        return Err(CliError::Domain(format!(
            "{}: no token of the dataset appears in the embedding vocabulary",
            path.display()
        )));
    }
    Ok(data)
}

pub(crate) fn train_classifier(a: TrainClassifierArgs, f: &RunConfig) -> CmdResult {
    let embeddings = require(a.embeddings, f.embeddings.clone(), "embeddings")?;
    let dataset = require(a.dataset, f.dataset.clone(), "dataset")?;
    let out = require(a.out, f.out.clone(), "out")?;
    let accuracy_log = pick(a.accuracy_log, f.accuracy_log.clone(), with_suffix(&out, ".acc"));
    let emb_reader = open(&embeddings)?;
    let data_reader = open(&dataset)?;
    check_outputs(&[&embeddings, &dataset], &[&out, &accuracy_log])?;

    let table = EmbeddingTable::read(emb_reader).map_err(|e| CliError::at(&embeddings, e))?;
    let rows = load_dataset(&dataset, data_reader)?;
    let max_label = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let arch = Architecture {
        seq_len: pick(a.seq_len, f.seq_len, 16),
        kernel: pick(a.kernel, f.kernel, 3),
        channels: pick(a.channels, f.channels, 16),
        dropout: pick(a.dropout, f.dropout, 0.5),
        pool: pick(a.pool, f.pool, 2),
        classes: pick(a.classes, f.classes, (max_label + 1).max(2)),
        freeze_embeddings: pick(a.freeze_embeddings, f.freeze_embeddings, false),
    };
    let opts = ClassifierTraining {
        epochs: pick(a.epochs, f.epochs, 10),
        batch: pick(a.batch, f.batch, 64),
        kappa0: pick(a.lr, f.lr, 0.1),
        decay: pick(a.decay, f.decay, 0.85),
        seed: pick(a.seed, f.seed, 1),
    };
    let mut model = CnnModel::wvcnn(table.len(), table.dim(), table.values().to_vec(), &arch, opts.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let data = encode_all(&rows, |w| table.id(w), arch.seq_len, model.pad_id(), &dataset)?;

    let log = fit(&data, &mut model, &opts).map_err(|e| CliError::at(&dataset, e))?;
    for e in &log {
        println!(
            "epoch {} kappa {} loss {:.6} accuracy {:.6}",
            e.epoch, e.kappa, e.mean_loss, e.accuracy
        );
    }
    let checkpoint = Checkpoint::new(table.words().to_vec(), model)?;
    write_file(&out, |w| checkpoint.write(w))?;
    write_file(&accuracy_log, |w| write_accuracy_log(&log, w))
}

pub(crate) fn eval_classifier(a: EvalClassifierArgs, f: &RunConfig) -> CmdResult {
    let path = require(a.checkpoint, f.checkpoint.clone(), "checkpoint")?;
    let dataset = require(a.dataset, f.dataset.clone(), "dataset")?;
    let ck_reader = open(&path)?;
    let data_reader = open(&dataset)?;

    let checkpoint = Checkpoint::read(ck_reader).map_err(|e| CliError::at(&path, e))?;
    let index: HashMap<&str, usize> = checkpoint
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let model = &checkpoint.model;
    let rows = load_dataset(&dataset, data_reader)?;
    let data = encode_all(
        &rows,
        |w| index.get(w).copied(),
        model.seq_len(),
        model.pad_id(),
        &dataset,
    )?;
    let acc = accuracy(model, &data).map_err(|e| CliError::at(&dataset, e))?;
    println!("accuracy {acc:.6}");
    Ok(())
}

pub(crate) fn eval_captions(a: EvalCaptionsArgs, f: &RunConfig) -> CmdResult {
    let captions = require(a.captions, f.captions.clone(), "captions")?;
    let report = require(a.report, f.report.clone(), "report")?;
    let smooth = pick(a.smooth_bleu, f.smooth_bleu, false);
    let reader = open(&captions)?;
    check_outputs(&[&captions], &[&report])?;

    let records = read_records(reader).map_err(|e| CliError::at(&captions, e))?;
    if is_degenerate(&records) {
        eprintln!("warning: CIDEr document frequencies are degenerate with fewer than two records");
    }
    let options = BleuOptions {
        smoothing: smooth.then_some(DEFAULT_SMOOTHING),
    };
    let scores = evaluate(&records, &options)?;
    write_file(&report, |w| scores.write_json(w))?;
    scores
        .write_json(std::io::stdout().lock())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub(crate) fn nearest(a: NearestArgs, f: &RunConfig) -> CmdResult {
    let path = require(a.embeddings, f.embeddings.clone(), "embeddings")?;
    let word = require(a.word, f.word.clone(), "word")?;
    let mut k = pick(a.k, f.k, 10);
    let table = EmbeddingTable::read(open(&path)?).map_err(|e| CliError::at(&path, e))?;

    let id = table
        .id(&word)
        .ok_or_else(|| CliError::Domain(format!("{word:?} is not in {}", path.display())))?;
    if table.len() < 2 {
        return Err(CliError::Domain(format!("{} holds a single word", path.display())));
    }
    if k > table.len() - 1 {
        eprintln!(
            "warning: k = {k} exceeds the {} other words; showing all of them",
            table.len() - 1
        );
        k = table.len() - 1;
    }
    let mut stdout = std::io::stdout().lock();
    for (other, cos) in table.nearest(id, k)? {
        writeln!(stdout, "{} {cos:.4}", table.words()[other])
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    }
    Ok(())
}
