//! Text ingestion: tokenization, vocabulary construction and CBOW context
//! windows.
//!
//! A corpus is UTF-8 text with one sentence per line. Context windows never
//! cross a line boundary.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};

/// A normalized word: lowercase, no punctuation, no whitespace, non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Accepts `surface` only if it is already in normalized form.
    pub fn new(surface: impl Into<String>) -> Option<Self> {
        let surface = surface.into();
        let normalized = normalize(&surface);
        (!surface.is_empty() && !surface.contains(char::is_whitespace) && normalized == surface)
            .then_some(Token(surface))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

fn normalize(text: &str) -> String {
    text.to_lowercase().chars().filter(|&c| !is_punctuation(c)).collect()
}

/// Lowercases, strips Unicode punctuation (general category `P*`) and splits
/// on whitespace runs.
pub fn tokenize(raw_text: &str) -> Vec<Token> {
    normalize(raw_text)
        .split_whitespace()
        .map(|w| Token(w.to_owned()))
        .collect()
}

/// Tokenizes each line of `reader` as one sentence. Lines that tokenize to
/// nothing are kept as empty sentences so line numbers stay aligned.
pub fn read_sentences<R: BufRead>(reader: R) -> Result<Vec<Vec<Token>>> {
    reader
        .lines()
        .map(|line| Ok(tokenize(&line?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub surface: String,
    pub frequency: usize,
}

/// Word list with dense ids `0..len()`.
///
/// Entries are ordered by descending frequency; equal frequencies keep the
/// order in which words first appeared in the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
    min_count: usize,
    total_tokens: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Number of raw tokens seen while counting, including filtered ones.
    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn id(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(|e| e.surface.as_str())
    }

    pub fn frequency(&self, id: usize) -> Option<usize> {
        self.entries.get(id).map(|e| e.frequency)
    }

    pub fn frequencies(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.frequency)
    }

    /// Maps a sentence to ids, dropping out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<usize> {
        sentence.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }

    /// Diagnostic dump, one `<surface> <id> <frequency>` line per word.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (id, e) in self.entries.iter().enumerate() {
            writeln!(out, "{} {} {}", e.surface, id, e.frequency)?;
        }
        Ok(())
    }
}

/// Counts tokens and keeps those occurring at least `min_count` times.
pub fn build_vocabulary<S: AsRef<str>>(sentences: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    // (count, first occurrence)
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut total_tokens = 0;
    for token in sentences.iter().flatten() {
        let order = counts.len();
        counts.entry(token.as_ref()).or_insert((0, order)).0 += 1;
        total_tokens += 1;
    }

    let mut kept: Vec<(&str, usize, usize)> = counts
        .into_iter()
        .filter(|&(_, (count, _))| count >= min_count)
        .map(|(w, (count, first))| (w, count, first))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let entries: Vec<VocabEntry> = kept
        .into_iter()
        .map(|(w, frequency, _)| VocabEntry {
            surface: w.to_owned(),
            frequency,
        })
        .collect();
    let index = entries
        .iter()
        .enumerate()
        .map(|(id, e)| (e.surface.clone(), id))
        .collect();
    Ok(Vocabulary {
        entries,
        index,
        min_count,
        total_tokens,
    })
}

/// A center word and the ids of its in-window neighbors (`Context(w)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSample {
    pub center_id: usize,
    pub context_ids: Vec<usize>,
}

/// One sample per position that has at least one neighbor within `z` tokens
/// on either side. The window is fixed at `z` per side and truncated at the
/// sentence ends.
pub fn extract_contexts(sentence_ids: &[usize], z: usize) -> Vec<ContextSample> {
    let n = sentence_ids.len();
    (0..n)
        .filter_map(|pos| {
            let lo = pos.saturating_sub(z);
            let hi = (pos + z + 1).min(n);
            let context_ids: Vec<usize> = (lo..hi)
                .filter(|&j| j != pos)
                .map(|j| sentence_ids[j])
                .collect();
            (!context_ids.is_empty()).then(|| ContextSample {
                center_id: sentence_ids[pos],
                context_ids,
            })
        })
        .collect()
}

/// Encodes every sentence against `vocab` and collects all context samples.
pub fn corpus_samples<S: AsRef<str>>(
    sentences: &[Vec<S>],
    vocab: &Vocabulary,
    z: usize,
) -> Vec<ContextSample> {
    sentences
        .iter()
        .flat_map(|s| extract_contexts(&vocab.encode(s), z))
        .collect()
}
