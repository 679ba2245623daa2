use std::collections::HashMap;

use super::{ngram_counts, CaptionRecord};
use crate::corpus::Token;
use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BleuOptions {
    /// When set, an order with zero matches contributes `epsilon / total`
    /// instead of zeroing the score.
    pub smoothing: Option<f64>,
}

/// Counts pooled over the whole record set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    /// Clipped matches for orders `1..=n_max`.
    pub matches: Vec<usize>,
    /// Candidate n-gram totals for orders `1..=n_max`.
    pub totals: Vec<usize>,
    pub candidate_len: usize,
    /// Sum over records of the reference length closest to the candidate's.
    pub reference_len: usize,
}

impl BleuStats {
    pub fn precision(&self, n: usize) -> f64 {
        let total = self.totals[n - 1];
        if total == 0 {
            0.0
        } else {
            self.matches[n - 1] as f64 / total as f64
        }
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len, self.reference_len);
        if c == 0 {
            0.0
        } else if c < r {
            (1.0 - r as f64 / c as f64).exp()
        } else {
            1.0
        }
    }

    pub fn score(&self, options: &BleuOptions) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let n_max = self.matches.len();
        let mut log_sum = 0.0;
        for (&m, &t) in self.matches.iter().zip(&self.totals) {
            let p = match (m, options.smoothing) {
                (0, None) => return 0.0,
                (0, Some(eps)) => eps / t.max(1) as f64,
                _ => m as f64 / t as f64,
            };
            log_sum += p.ln();
        }
        self.brevity_penalty() * (log_sum / n_max as f64).exp()
    }
}

/// Closest reference length to `c`; ties go to the shorter reference.
fn closest_ref_len(refs: &[Vec<Token>], c: usize) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

pub fn bleu_stats(records: &[CaptionRecord], n_max: usize) -> Result<BleuStats> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    if n_max == 0 {
        return Err(Error::Config("BLEU order must be at least 1".into()));
    }
    let mut stats = BleuStats {
        matches: vec![0; n_max],
        totals: vec![0; n_max],
        candidate_len: 0,
        reference_len: 0,
    };
    for record in records {
        let c = record.candidate.len();
        stats.candidate_len += c;
        stats.reference_len += closest_ref_len(&record.references, c);
        for n in 1..=n_max {
            let mut max_ref: HashMap<&[Token], usize> = HashMap::new();
            for r in &record.references {
                for (gram, count) in ngram_counts(r, n) {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(count);
                }
            }
            for (gram, count) in ngram_counts(&record.candidate, n) {
                stats.matches[n - 1] += count.min(max_ref.get(gram).copied().unwrap_or(0));
                stats.totals[n - 1] += count;
            }
        }
    }
    Ok(stats)
}

/// Corpus-level cumulative BLEU-`n_max`: brevity penalty times the geometric
/// mean of the pooled clipped precisions of orders `1..=n_max`.
pub fn bleu(records: &[CaptionRecord], n_max: usize, options: &BleuOptions) -> Result<f64> {
    Ok(bleu_stats(records, n_max)?.score(options))
}
