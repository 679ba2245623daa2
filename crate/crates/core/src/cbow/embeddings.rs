use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{nearest_rows, TrainerState};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Word vectors paired with their surface forms, in vocabulary id order.
///
/// Text format: a `<V> <d>` header followed by one `<surface> <d values>`
/// line per word. Values are written in shortest round-trip form, so reading
/// a written table reproduces every value exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(words: Vec<String>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != words.len() * dim {
            return Err(Error::Shape(format!(
                "{} words of dim {dim} need {} values, got {}",
                words.len(),
                words.len() * dim,
                values.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Shape(format!("duplicate word {w:?}")));
            }
        }
        Ok(EmbeddingTable {
            words,
            index,
            dim,
            values,
        })
    }

    pub fn from_state(vocab: &Vocabulary, state: &TrainerState) -> Result<Self> {
        if vocab.len() != state.vocab_size() {
            return Err(Error::Shape("vocabulary and trainer state disagree on V".into()));
        }
        let words = vocab.entries().iter().map(|e| e.surface.clone()).collect();
        Self::new(words, state.dim(), state.w().to_vec())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }

    pub fn nearest(&self, id: usize, k: usize) -> Result<Vec<(usize, f64)>> {
        nearest_rows(&self.values, self.dim, id, k)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, w) in self.words.iter().enumerate() {
            write!(out, "{w}")?;
            for v in self.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let header = header?;
        let mut fields = header.split_whitespace();
        let mut header_field = |name: &str| -> Result<usize> {
            fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(1, format!("header needs `<V> <d>`, bad {name}")))
        };
        let v = header_field("V")?;
        let dim = header_field("d")?;

        let mut words = Vec::with_capacity(v);
        let mut values = Vec::with_capacity(v * dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default().to_owned();
            let before = values.len();
            for f in fields {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(i + 1, format!("bad value {f:?}")))?;
                values.push(x);
            }
            if values.len() - before != dim {
                return Err(Error::parse(
                    i + 1,
                    format!("expected {dim} values for {word:?}, got {}", values.len() - before),
                ));
            }
            words.push(word);
        }
        if words.len() != v {
            return Err(Error::parse(1, format!("header says {v} words, file has {}", words.len())));
        }
        Self::new(words, dim, values)
    }
}
