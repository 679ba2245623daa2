//! One-dimensional convolutional text classifier over word vectors.
//!
//! The stack is embedding lookup → conv1d + ReLU → dropout → max-pool →
//! flatten → dense → softmax, with hand-written forward and backward passes.

mod checkpoint;
mod layers;
mod model;
mod tensor;
mod train;

pub use checkpoint::Checkpoint;
pub use layers::{
    conv1d_forward, dense_forward, dense_softmax_forward, dropout_forward, embed_lookup,
    maxpool1d_forward, softmax, Conv1d, Dense, Embedding,
};
pub use model::{Architecture, CnnModel, ForwardPass, Gradients, Layer, Mode};
pub use tensor::{flatten, Tensor};
pub use train::{
    accuracy, read_dataset, train_classifier, write_accuracy_log, ClassifierTraining,
    EpochAccuracy, LabeledSequence,
};
