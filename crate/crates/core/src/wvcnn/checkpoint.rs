//! Plain-text model checkpoints.
//!
//! ```text
//! wvcnn-checkpoint 1
//! seq_len <L>
//! seed <seed>
//! vocab <V>
//! <word>            (V lines, id order)
//! layers <n>
//! embedding <V> <d> <frozen|trainable>
//! tensor <dims...>
//! <values>          (one line per row of the last dimension)
//! conv1d <kernel> <in> <out>
//! ...
//! ```
//!
//! Values use shortest round-trip formatting, so a read after a write
//! reproduces every parameter bit for bit.

use std::io::{BufRead, Write};

use super::layers::{Conv1d, Dense, Embedding};
use super::model::{CnnModel, Layer};
use crate::error::{Error, Result};

const MAGIC: &str = "wvcnn-checkpoint";
const VERSION: u32 = 1;

/// A trained model plus the word list its embedding rows correspond to.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub words: Vec<String>,
    pub model: CnnModel,
}

impl Checkpoint {
    pub fn new(words: Vec<String>, model: CnnModel) -> Result<Self> {
        if words.len() != model.embedding().vocab {
            return Err(Error::Shape(format!(
                "{} words for an embedding of {} rows",
                words.len(),
                model.embedding().vocab
            )));
        }
        Ok(Checkpoint { words, model })
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{MAGIC} {VERSION}")?;
        writeln!(out, "seq_len {}", self.model.seq_len())?;
        writeln!(out, "seed {}", self.model.seed)?;
        writeln!(out, "vocab {}", self.words.len())?;
        for w in &self.words {
            writeln!(out, "{w}")?;
        }
        writeln!(out, "layers {}", self.model.layers().len())?;
        for layer in self.model.layers() {
            match layer {
                Layer::Embedding(e) => {
                    let state = if e.frozen { "frozen" } else { "trainable" };
                    writeln!(out, "embedding {} {} {state}", e.vocab, e.dim)?;
                    write_tensor(&mut out, &[e.vocab, e.dim], &e.weights)?;
                }
                Layer::Conv1d(c) => {
                    writeln!(out, "conv1d {} {} {}", c.kernel, c.in_channels, c.out_channels)?;
                    write_tensor(&mut out, &[c.out_channels, c.kernel, c.in_channels], &c.weights)?;
                    write_tensor(&mut out, &[c.out_channels], &c.bias)?;
                }
                Layer::Dropout { rate } => writeln!(out, "dropout {rate}")?,
                Layer::MaxPool1d { width } => writeln!(out, "maxpool1d {width}")?,
                Layer::Flatten => writeln!(out, "flatten")?,
                Layer::Dense(d) => {
                    writeln!(out, "dense {} {}", d.inputs, d.outputs)?;
                    write_tensor(&mut out, &[d.outputs, d.inputs], &d.weights)?;
                    write_tensor(&mut out, &[d.outputs], &d.bias)?;
                }
                Layer::SoftmaxOutput { classes } => writeln!(out, "softmax {classes}")?,
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let mut p = Parser { lines, at: 0 };

        let head = p.fields()?;
        if head.first().map(String::as_str) != Some(MAGIC) || head.get(1).map(String::as_str) != Some("1") {
            return Err(p.err("not a version 1 wvcnn checkpoint"));
        }
        let seq_len = p.keyed("seq_len")?;
        let seed = p.keyed("seed")?;
        let vocab: usize = p.keyed("vocab")?;
        let mut words = Vec::with_capacity(vocab);
        for _ in 0..vocab {
            let f = p.fields()?;
            if f.len() != 1 {
                return Err(p.err("vocabulary lines hold exactly one word"));
            }
            words.push(f.into_iter().next().unwrap());
        }
        let count: usize = p.keyed("layers")?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let f = p.fields()?;
            let kind = f.first().cloned().unwrap_or_default();
            let line = p.at;
            let arg = |i: usize| -> Result<usize> {
                f.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(line, format!("{kind}: bad argument {i}")))
            };
            let layer = match kind.as_str() {
                "embedding" => {
                    let (v, d) = (arg(1)?, arg(2)?);
                    let frozen = match f.get(3).map(String::as_str) {
                        Some("frozen") => true,
                        Some("trainable") => false,
                        _ => return Err(p.err("embedding must be frozen or trainable")),
                    };
                    Layer::Embedding(Embedding {
                        vocab: v,
                        dim: d,
                        frozen,
                        weights: p.tensor(&[v, d])?,
                    })
                }
                "conv1d" => {
                    let (k, ci, co) = (arg(1)?, arg(2)?, arg(3)?);
                    Layer::Conv1d(Conv1d {
                        kernel: k,
                        in_channels: ci,
                        out_channels: co,
                        weights: p.tensor(&[co, k, ci])?,
                        bias: p.tensor(&[co])?,
                    })
                }
                "dropout" => Layer::Dropout {
                    rate: f
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::parse(line, "dropout needs a rate"))?,
                },
                "maxpool1d" => Layer::MaxPool1d { width: arg(1)? },
                "flatten" => Layer::Flatten,
                "dense" => {
                    let (i, o) = (arg(1)?, arg(2)?);
                    Layer::Dense(Dense {
                        inputs: i,
                        outputs: o,
                        weights: p.tensor(&[o, i])?,
                        bias: p.tensor(&[o])?,
                    })
                }
                "softmax" => Layer::SoftmaxOutput { classes: arg(1)? },
                other => return Err(p.err(format!("unknown layer {other:?}"))),
            };
            layers.push(layer);
        }
        Checkpoint::new(words, CnnModel::new(layers, seq_len, seed)?)
    }
}

fn write_tensor<W: Write>(out: &mut W, shape: &[usize], values: &[f64]) -> std::io::Result<()> {
    write!(out, "tensor")?;
    for d in shape {
        write!(out, " {d}")?;
    }
    writeln!(out)?;
    let row = *shape.last().unwrap();
    for chunk in values.chunks(row) {
        let line: Vec<String> = chunk.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

struct Parser {
    lines: Vec<String>,
    at: usize,
}

impl Parser {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::parse(self.at.max(1), reason)
    }

    fn fields(&mut self) -> Result<Vec<String>> {
        while self.at < self.lines.len() {
            self.at += 1;
            let line = &self.lines[self.at - 1];
            if !line.trim().is_empty() {
                return Ok(line.split_whitespace().map(str::to_owned).collect());
            }
        }
        Err(self.err("unexpected end of checkpoint"))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let f = self.fields()?;
        match (f.first(), f.get(1), f.len()) {
            (Some(k), Some(v), 2) if k == key => v.parse().map_err(|_| self.err(format!("bad {key} value"))),
            _ => Err(self.err(format!("expected `{key} <value>`"))),
        }
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Vec<f64>> {
        let head = self.fields()?;
        let dims: Option<Vec<usize>> = head.iter().skip(1).map(|s| s.parse().ok()).collect();
        if head.first().map(String::as_str) != Some("tensor") || dims.as_deref() != Some(shape) {
            return Err(self.err(format!("expected `tensor` header with shape {shape:?}")));
        }
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        while values.len() < total {
            for f in self.fields()? {
                values.push(f.parse().map_err(|_| self.err(format!("bad value {f:?}")))?);
            }
        }
        if values.len() != total {
            return Err(self.err("tensor row overruns its shape"));
        }
        Ok(values)
    }
}
