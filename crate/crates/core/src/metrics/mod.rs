//! Caption evaluation: corpus BLEU-1/3/4 and CIDEr-D over candidate captions
//! scored against one or more references per image.

mod bleu;
mod cider;

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::corpus::{tokenize, Token};
use crate::error::{Error, Result};

pub use bleu::{bleu, bleu_stats, BleuOptions, BleuStats, DEFAULT_SMOOTHING};
pub use cider::{cider, cider_per_image, is_degenerate, CIDER_MAX_N, CIDER_SIGMA};

/// One image: its id, the reference captions and the candidate caption, all
/// tokenized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub image_id: String,
    pub references: Vec<Vec<Token>>,
    pub candidate: Vec<Token>,
}

impl CaptionRecord {
    pub fn new(image_id: impl Into<String>, references: Vec<Vec<Token>>, candidate: Vec<Token>) -> Result<Self> {
        let image_id = image_id.into();
        if references.is_empty() {
            return Err(Error::BadRecord {
                id: image_id,
                reason: "no references".into(),
            });
        }
        Ok(CaptionRecord {
            image_id,
            references,
            candidate,
        })
    }

    /// Tokenizes raw reference and candidate strings.
    pub fn from_text<S: AsRef<str>>(image_id: impl Into<String>, references: &[S], candidate: &str) -> Result<Self> {
        Self::new(
            image_id,
            references.iter().map(|r| tokenize(r.as_ref())).collect(),
            tokenize(candidate),
        )
    }
}

/// Multiset of the contiguous `n`-grams of `tokens`.
pub fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut counts = HashMap::new();
    if n == 0 {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub bleu1: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub cider: f64,
    pub record_count: usize,
}

impl MetricReport {
    /// Writes the report as a JSON object with six-decimal values.
    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{{")?;
        writeln!(out, "  \"bleu1\": {:.6},", self.bleu1)?;
        writeln!(out, "  \"bleu3\": {:.6},", self.bleu3)?;
        writeln!(out, "  \"bleu4\": {:.6},", self.bleu4)?;
        writeln!(out, "  \"cider\": {:.6},", self.cider)?;
        writeln!(out, "  \"records\": {}", self.record_count)?;
        writeln!(out, "}}")
    }
}

pub fn evaluate(records: &[CaptionRecord], options: &BleuOptions) -> Result<MetricReport> {
    Ok(MetricReport {
        bleu1: bleu(records, 1, options)?,
        bleu3: bleu(records, 3, options)?,
        bleu4: bleu(records, 4, options)?,
        cider: cider(records)?,
        record_count: records.len(),
    })
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    refs: Option<Vec<String>>,
    candidate: Option<String>,
}

/// Reads a JSON array of `{"id", "refs", "candidate"}` objects.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<CaptionRecord>> {
    let raw: Vec<RawRecord> =
        serde_json::from_reader(reader).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    if raw.is_empty() {
        return Err(Error::NoRecords);
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r.id.ok_or_else(|| Error::BadRecord {
                id: format!("#{i}"),
                reason: "missing id".into(),
            })?;
            let bad = |reason: &str| Error::BadRecord {
                id: id.clone(),
                reason: reason.into(),
            };
            let refs = r.refs.ok_or_else(|| bad("missing refs"))?;
            if refs.is_empty() {
                return Err(bad("empty refs"));
            }
            let candidate = r.candidate.ok_or_else(|| bad("missing candidate"))?;
            CaptionRecord::from_text(id.clone(), &refs, &candidate)
        })
        .collect()
}
