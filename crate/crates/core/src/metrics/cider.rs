//! CIDEr-D: per order `n = 1..=4`, candidate and reference n-gram vectors
//! are weighted by tf-idf, where the document frequency of an n-gram is the
//! number of images whose references contain it. The candidate vector is
//! clipped element-wise at the reference vector before the cosine, and a
//! Gaussian penalty on the length difference (σ = 6) is applied. Per-image
//! scores average over orders and references and are scaled by 10.

use std::collections::{HashMap, HashSet};

use super::CaptionRecord;
use crate::corpus::Token;
use crate::error::{Error, Result};

pub const CIDER_MAX_N: usize = 4;
pub const CIDER_SIGMA: f64 = 6.0;
const SCALE: f64 = 10.0;

type Counts<'a> = HashMap<&'a [Token], usize>;

fn counts_up_to(tokens: &[Token], max_n: usize) -> Counts<'_> {
    let mut counts = HashMap::new();
    for n in 1..=max_n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

struct Weighted<'a> {
    /// tf-idf weight per n-gram
    vec: HashMap<&'a [Token], f64>,
    /// Euclidean norm per order
    norm: [f64; CIDER_MAX_N],
    len: usize,
}

fn weigh<'a>(counts: &Counts<'a>, len: usize, df: &HashMap<&[Token], usize>, log_images: f64) -> Weighted<'a> {
    let mut vec = HashMap::with_capacity(counts.len());
    let mut norm = [0.0; CIDER_MAX_N];
    for (&gram, &tf) in counts {
        let doc_freq = df.get(gram).copied().unwrap_or(0).max(1) as f64;
        let w = tf as f64 * (log_images - doc_freq.ln());
        norm[gram.len() - 1] += w * w;
        vec.insert(gram, w);
    }
    for n in &mut norm {
        *n = n.sqrt();
    }
    Weighted { vec, norm, len }
}

fn similarity(cand: &Weighted, reference: &Weighted) -> [f64; CIDER_MAX_N] {
    let mut val = [0.0; CIDER_MAX_N];
    for (gram, &wc) in &cand.vec {
        let wr = reference.vec.get(gram).copied().unwrap_or(0.0);
        val[gram.len() - 1] += wc.min(wr) * wr;
    }
    let delta = cand.len as f64 - reference.len as f64;
    let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
    for ((v, &nc), &nr) in val.iter_mut().zip(&cand.norm).zip(&reference.norm) {
        if nc != 0.0 && nr != 0.0 {
            *v /= nc * nr;
        }
        *v *= penalty;
    }
    val
}

/// Per-image CIDEr-D scores, in record order. Document frequencies come from
/// the references of `records` themselves.
pub fn cider_per_image(records: &[CaptionRecord]) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let ref_counts: Vec<Vec<Counts>> = records
        .iter()
        .map(|r| r.references.iter().map(|t| counts_up_to(t, CIDER_MAX_N)).collect())
        .collect();

    let mut df: HashMap<&[Token], usize> = HashMap::new();
    for refs in &ref_counts {
        let grams: HashSet<&[Token]> = refs.iter().flat_map(|c| c.keys().copied()).collect();
        for g in grams {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let log_images = (records.len() as f64).ln();

    Ok(records
        .iter()
        .zip(&ref_counts)
        .map(|(record, refs)| {
            let cand = weigh(
                &counts_up_to(&record.candidate, CIDER_MAX_N),
                record.candidate.len(),
                &df,
                log_images,
            );
            let mut total = [0.0; CIDER_MAX_N];
            for (counts, tokens) in refs.iter().zip(&record.references) {
                let reference = weigh(counts, tokens.len(), &df, log_images);
                for (t, v) in total.iter_mut().zip(similarity(&cand, &reference)) {
                    *t += v;
                }
            }
            let mean_over_n = total.iter().sum::<f64>() / CIDER_MAX_N as f64;
            mean_over_n / refs.len() as f64 * SCALE
        })
        .collect())
}

/// Mean of the per-image CIDEr-D scores.
pub fn cider(records: &[CaptionRecord]) -> Result<f64> {
    let scores = cider_per_image(records)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// True when idf is zero for every reference n-gram (a single-image set), so
/// every score collapses to 0.
pub fn is_degenerate(records: &[CaptionRecord]) -> bool {
    records.len() < 2
}
