//! Word-vector text toolkit.
//!
//! Trains CBOW embeddings with hierarchical softmax over a Huffman tree,
//! feeds them into a one-dimensional convolutional classifier, and scores
//! generated captions with corpus BLEU and CIDEr-D.

pub mod cbow;
pub mod corpus;
mod error;
pub mod huffman;
pub mod metrics;
pub mod rng;
pub mod wvcnn;

pub use cbow::{
    nearest_neighbors, train, EmbeddingTable, EpochLoss, ProjectionVector, TrainerState,
    TrainingConfig, TrainingOutcome,
};
pub use corpus::{build_vocabulary, extract_contexts, tokenize, ContextSample, Token, Vocabulary};
pub use error::{Error, Result};
pub use huffman::{build_huffman, HuffmanTree};
pub use metrics::{bleu, cider, evaluate, BleuOptions, CaptionRecord, MetricReport};
pub use wvcnn::{CnnModel, Layer, LabeledSequence, Tensor};
