use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use super::model::{CnnModel, Mode};
use crate::corpus::{tokenize, Token};
use crate::error::{Error, Result};
use crate::rng;

/// A fixed-length id sequence and its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub ids: Vec<usize>,
    pub label: usize,
}

impl LabeledSequence {
    /// Looks tokens up with `lookup` (unknown tokens are dropped), then
    /// truncates or right-pads with `pad_id` to `seq_len`.
    pub fn encode<S: AsRef<str>>(
        tokens: &[S],
        lookup: impl Fn(&str) -> Option<usize>,
        seq_len: usize,
        pad_id: usize,
        label: usize,
    ) -> Self {
        let mut ids: Vec<usize> = tokens
            .iter()
            .filter_map(|t| lookup(t.as_ref()))
            .take(seq_len)
            .collect();
        ids.resize(seq_len, pad_id);
        LabeledSequence { ids, label }
    }
}

/// Reads `<label>\t<sentence>` lines, skipping blank ones.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<(usize, Vec<Token>)>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected `<label>\\t<sentence>`"))?;
        let label = label
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad label {label:?}")))?;
        rows.push((label, tokenize(text)));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTraining {
    pub epochs: usize,
    pub batch: usize,
    pub kappa0: f64,
    pub decay: f64,
    /// Seeds the per-epoch shuffle. Dropout masks come from the model's seed.
    pub seed: u64,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        ClassifierTraining {
            epochs: 10,
            batch: 64,
            kappa0: 0.1,
            decay: 0.85,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochAccuracy {
    pub epoch: usize,
    pub kappa: f64,
    /// Mean training cross-entropy (dropout active).
    pub mean_loss: f64,
    /// Accuracy over the training set with dropout disabled.
    pub accuracy: f64,
}

/// One `<epoch> <kappa> <mean_loss> <accuracy>` line per epoch.
pub fn write_accuracy_log<W: Write>(log: &[EpochAccuracy], mut out: W) -> std::io::Result<()> {
    for e in log {
        writeln!(out, "{} {} {:.6} {:.6}", e.epoch, e.kappa, e.mean_loss, e.accuracy)?;
    }
    Ok(())
}

fn check_dataset(dataset: &[LabeledSequence], model: &CnnModel) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::NoSamples);
    }
    let classes = model.classes();
    let pad = model.pad_id();
    for s in dataset {
        if s.ids.len() != model.seq_len() {
            return Err(Error::Shape(format!(
                "sequence of length {} for a model expecting {}",
                s.ids.len(),
                model.seq_len()
            )));
        }
        if s.label >= classes {
            return Err(Error::LabelOutOfRange {
                label: s.label,
                classes,
            });
        }
        if let Some(&id) = s.ids.iter().find(|&&id| id > pad) {
            return Err(Error::WordOutOfRange { id, size: pad });
        }
    }
    Ok(())
}

/// Fraction of sequences classified correctly in inference mode.
pub fn accuracy(model: &CnnModel, dataset: &[LabeledSequence]) -> Result<f64> {
    check_dataset(dataset, model)?;
    let mut correct = 0;
    for s in dataset {
        if model.predict(&s.ids)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Mini-batch gradient descent on mean cross-entropy. The learning rate is
/// multiplied by `decay` after each epoch.
pub fn train_classifier(
    dataset: &[LabeledSequence],
    model: &mut CnnModel,
    opts: &ClassifierTraining,
) -> Result<Vec<EpochAccuracy>> {
    check_dataset(dataset, model)?;
    if opts.batch == 0 || opts.epochs == 0 {
        return Err(Error::Config("batch and epochs must be positive".into()));
    }
    let rates_ok = opts.kappa0 > 0.0 && opts.decay > 0.0 && opts.decay <= 1.0;
    if !rates_ok {
        return Err(Error::Config("need kappa0 > 0 and decay in (0, 1]".into()));
    }
    let frozen = model.embedding().frozen;
    let mut dropout = rng::seeded(model.seed, rng::STREAM_DROPOUT);
    let mut shuffle = rng::seeded(opts.seed, rng::STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut kappa = opts.kappa0;
    let mut log = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for batch in order.chunks(opts.batch) {
            let mut sum: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
            for &i in batch {
                let s = &dataset[i];
                let pass = model.forward(&s.ids, Mode::Train(&mut dropout))?;
                loss_sum += pass.loss(s.label)?;
                let grads = model.backward(&pass, s.label)?;
                for (acc, g) in sum.iter_mut().zip(&grads.params) {
                    acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
            let step = kappa / batch.len() as f64;
            for (k, (param, g)) in model.params_mut().into_iter().zip(&sum).enumerate() {
                if frozen && k == 0 {
                    continue;
                }
                param.iter_mut().zip(g).for_each(|(p, g)| *p -= step * g);
            }
        }
        if model.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Model(format!("non-finite parameters after epoch {epoch}")));
        }
        log.push(EpochAccuracy {
            epoch,
            kappa,
            mean_loss: loss_sum / dataset.len() as f64,
            accuracy: accuracy(model, dataset)?,
        });
        kappa *= opts.decay;
    }
    Ok(log)
}
