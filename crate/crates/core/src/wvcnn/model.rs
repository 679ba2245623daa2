use super::layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout_forward, embed_lookup,
    maxpool1d_forward, softmax, Conv1d, Dense, Embedding,
};
use super::tensor::{flatten, Tensor};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Embedding(Embedding),
    Conv1d(Conv1d),
    Dropout { rate: f64 },
    MaxPool1d { width: usize },
    Flatten,
    Dense(Dense),
    SoftmaxOutput { classes: usize },
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Embedding(_) => "embedding",
            Layer::Conv1d(_) => "conv1d",
            Layer::Dropout { .. } => "dropout",
            Layer::MaxPool1d { .. } => "maxpool1d",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
            Layer::SoftmaxOutput { .. } => "softmax",
        }
    }

    /// Trainable tensors in a fixed order: weights, then bias.
    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Embedding(e) => vec![&e.weights],
            Layer::Conv1d(c) => vec![&c.weights, &c.bias],
            Layer::Dense(d) => vec![&d.weights, &d.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Embedding(e) => vec![&mut e.weights],
            Layer::Conv1d(c) => vec![&mut c.weights, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
            _ => vec![],
        }
    }
}

/// Sizes for the default WV-CNN stack:
/// embedding → conv1d + ReLU → dropout → max-pool → flatten → dense → softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub seq_len: usize,
    pub kernel: usize,
    pub channels: usize,
    pub dropout: f64,
    pub pool: usize,
    pub classes: usize,
    pub freeze_embeddings: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            seq_len: 16,
            kernel: 3,
            channels: 16,
            dropout: 0.5,
            pool: 2,
            classes: 2,
            freeze_embeddings: false,
        }
    }
}

/// An ordered layer stack over fixed-length id sequences.
///
/// The first layer is an [`Embedding`], the last a `SoftmaxOutput` fed by a
/// `Dense` layer, and every `Dropout` sits directly between a `Conv1d` and a
/// `MaxPool1d`. `seed` drives the dropout masks during training.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    layers: Vec<Layer>,
    seq_len: usize,
    pub seed: u64,
}

/// Per-layer data the backward pass needs.
#[derive(Debug, Clone)]
enum Aux {
    None,
    Mask(Option<Vec<f64>>),
    Argmax(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Cache {
    ids: Vec<usize>,
    /// `outputs[i]` is the output of layer `i` (the softmax layer excluded).
    outputs: Vec<Tensor>,
    aux: Vec<Aux>,
}

/// Result of a forward pass. Training-mode passes keep the activations
/// needed by [`CnnModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub probs: Vec<f64>,
    cache: Option<Cache>,
}

impl ForwardPass {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn loss(&self, label: usize) -> Result<f64> {
        self.probs
            .get(label)
            .map(|p| -p.ln())
            .ok_or(Error::LabelOutOfRange {
                label,
                classes: self.probs.len(),
            })
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

/// Gradients for every parameter tensor (same order as
/// [`CnnModel::params`]) plus the gradient with respect to the embedded
/// input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<Vec<f64>>,
    pub input: Tensor,
}

pub enum Mode<'a> {
    Eval,
    /// Dropout active; masks drawn from the given generator.
    Train(&'a mut Rng),
    /// Dropout disabled but activations cached for backpropagation.
    Cached,
}

impl CnnModel {
    pub fn new(layers: Vec<Layer>, seq_len: usize, seed: u64) -> Result<Self> {
        let model = CnnModel {
            layers,
            seq_len,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    /// Builds the default stack on top of pre-trained word vectors
    /// (`vocab × dim`, row-major). Conv and dense weights are drawn from
    /// `seed`.
    pub fn wvcnn(vocab: usize, dim: usize, embeddings: Vec<f64>, arch: &Architecture, seed: u64) -> Result<Self> {
        if embeddings.len() != vocab * dim {
            return Err(Error::Shape(format!(
                "embedding matrix needs {vocab}x{dim} values, got {}",
                embeddings.len()
            )));
        }
        if arch.seq_len < arch.kernel {
            return Err(Error::Config(format!(
                "sequence length {} shorter than kernel {}",
                arch.seq_len, arch.kernel
            )));
        }
        let conv_len = arch.seq_len - arch.kernel + 1;
        if arch.pool == 0 || conv_len < arch.pool {
            return Err(Error::Config(format!("pool width {} too wide for {conv_len} steps", arch.pool)));
        }
        let pooled = conv_len / arch.pool * arch.channels;
        let mut r = rng::seeded(seed, rng::STREAM_INIT);
        let layers = vec![
            Layer::Embedding(Embedding {
                vocab,
                dim,
                frozen: arch.freeze_embeddings,
                weights: embeddings,
            }),
            Layer::Conv1d(Conv1d::new(arch.kernel, dim, arch.channels, &mut r)),
            Layer::Dropout { rate: arch.dropout },
            Layer::MaxPool1d { width: arch.pool },
            Layer::Flatten,
            Layer::Dense(Dense::new(pooled, arch.classes, &mut r)),
            Layer::SoftmaxOutput {
                classes: arch.classes,
            },
        ];
        CnnModel::new(layers, arch.seq_len, seed)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn embedding(&self) -> &Embedding {
        match &self.layers[0] {
            Layer::Embedding(e) => e,
            _ => unreachable!("validated"),
        }
    }

    pub fn pad_id(&self) -> usize {
        self.embedding().pad_id()
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(Layer::SoftmaxOutput { classes }) => *classes,
            _ => unreachable!("validated"),
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Checks layer order and propagates shapes through the stack.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Model(m));
        let n = self.layers.len();
        if n < 3 {
            return bad("need at least embedding, dense and softmax layers".into());
        }
        let Layer::Embedding(emb) = &self.layers[0] else {
            return bad("first layer must be an embedding".into());
        };
        if emb.weights.len() != emb.vocab * emb.dim || emb.dim == 0 {
            return bad("embedding weights do not match vocab x dim".into());
        }
        let Layer::SoftmaxOutput { classes } = self.layers[n - 1] else {
            return bad("last layer must be softmax".into());
        };
        if !matches!(self.layers[n - 2], Layer::Dense(_)) {
            return bad("softmax must follow a dense layer".into());
        }
        if self.seq_len == 0 {
            return bad("sequence length must be positive".into());
        }

        let mut shape = vec![self.seq_len, emb.dim];
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            match layer {
                Layer::Embedding(_) => return bad(format!("layer {i}: embedding only allowed first")),
                Layer::Conv1d(c) => {
                    if shape.len() != 2 || shape[1] != c.in_channels {
                        return bad(format!("layer {i}: conv1d expects (T, {}) input, got {shape:?}", c.in_channels));
                    }
                    if shape[0] < c.kernel || c.kernel == 0 || c.out_channels == 0 {
                        return bad(format!("layer {i}: kernel {} does not fit {shape:?}", c.kernel));
                    }
                    if c.weights.len() != c.out_channels * c.kernel * c.in_channels || c.bias.len() != c.out_channels {
                        return bad(format!("layer {i}: conv1d parameter sizes"));
                    }
                    shape = vec![shape[0] - c.kernel + 1, c.out_channels];
                }
                Layer::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return bad(format!("layer {i}: dropout rate {rate} outside [0, 1)"));
                    }
                    let after_conv = matches!(self.layers[i - 1], Layer::Conv1d(_));
                    let before_pool = matches!(self.layers.get(i + 1), Some(Layer::MaxPool1d { .. }));
                    if !(after_conv && before_pool) {
                        return bad(format!("layer {i}: dropout must sit between conv1d and maxpool1d"));
                    }
                }
                Layer::MaxPool1d { width } => {
                    if shape.len() != 2 || *width == 0 || shape[0] < *width {
                        return bad(format!("layer {i}: cannot pool {shape:?} with width {width}"));
                    }
                    shape = vec![shape[0] / width, shape[1]];
                }
                Layer::Flatten => shape = vec![shape.iter().product()],
                Layer::Dense(d) => {
                    if shape.len() != 1 || shape[0] != d.inputs {
                        return bad(format!("layer {i}: dense expects {} inputs, got {shape:?}", d.inputs));
                    }
                    if d.weights.len() != d.inputs * d.outputs || d.bias.len() != d.outputs {
                        return bad(format!("layer {i}: dense parameter sizes"));
                    }
                    shape = vec![d.outputs];
                }
                Layer::SoftmaxOutput { .. } if i != n - 1 => {
                    return bad(format!("layer {i}: softmax only allowed last"));
                }
                Layer::SoftmaxOutput { classes } => {
                    if shape != [*classes] {
                        return bad(format!("softmax over {classes} classes fed {shape:?}"));
                    }
                }
            }
        }
        debug_assert_eq!(shape, [classes]);
        Ok(())
    }

    pub fn forward(&self, ids: &[usize], mode: Mode) -> Result<ForwardPass> {
        if ids.len() != self.seq_len {
            return Err(Error::Shape(format!(
                "expected {} ids, got {}",
                self.seq_len,
                ids.len()
            )));
        }
        let (mut rng, keep) = match mode {
            Mode::Eval => (None, false),
            Mode::Train(r) => (Some(r), true),
            Mode::Cached => (None, true),
        };
        let mut outputs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        let mut aux = Vec::with_capacity(self.layers.len());
        let mut probs = Vec::new();
        for layer in &self.layers {
            let input = outputs.last();
            let (out, a) = match layer {
                Layer::Embedding(e) => (embed_lookup(ids, e)?, Aux::None),
                Layer::Conv1d(c) => (conv1d_forward(input.unwrap(), c)?, Aux::None),
                Layer::Dropout { rate } => {
                    let x = input.unwrap();
                    match rng.as_deref_mut() {
                        Some(r) => {
                            let (out, mask) = dropout_forward(x, *rate, true, r)?;
                            (out, Aux::Mask(mask))
                        }
                        None => (x.clone(), Aux::Mask(None)),
                    }
                }
                Layer::MaxPool1d { width } => {
                    let (out, arg) = maxpool1d_forward(input.unwrap(), *width)?;
                    (out, Aux::Argmax(arg))
                }
                Layer::Flatten => (flatten(input.unwrap()), Aux::None),
                Layer::Dense(d) => {
                    let z = dense_forward(input.unwrap().data(), d)?;
                    (Tensor::from_parts(vec![z.len()], z), Aux::None)
                }
                Layer::SoftmaxOutput { .. } => {
                    probs = softmax(input.unwrap().data());
                    break;
                }
            };
            outputs.push(out);
            aux.push(a);
        }
        Ok(ForwardPass {
            probs,
            cache: keep.then(|| Cache {
                ids: ids.to_vec(),
                outputs,
                aux,
            }),
        })
    }

    /// Exact reverse-mode gradients of `-ln p[label]`.
    pub fn backward(&self, pass: &ForwardPass, label: usize) -> Result<Gradients> {
        let cache = pass
            .cache
            .as_ref()
            .ok_or(Error::MissingCache("forward pass ran without caching"))?;
        let classes = self.classes();
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let mut params: Vec<Vec<f64>> = self.params().iter().map(|p| vec![0.0; p.len()]).collect();
        let mut slot = params.len();

        // softmax + cross-entropy
        let mut grad: Vec<f64> = pass.probs.clone();
        grad[label] -= 1.0;
        let mut grad_shape = vec![classes];

        let last = self.layers.len() - 1;
        for i in (0..last).rev() {
            let input = if i == 0 { None } else { Some(&cache.outputs[i - 1]) };
            match &self.layers[i] {
                Layer::Dense(d) => {
                    slot -= 2;
                    let (gw, rest) = params[slot..].split_at_mut(1);
                    grad = dense_backward(input.unwrap().data(), &grad, d, &mut gw[0], &mut rest[0]);
                    grad_shape = vec![d.inputs];
                }
                Layer::Flatten => grad_shape = input.unwrap().shape().to_vec(),
                Layer::MaxPool1d { .. } => {
                    let Aux::Argmax(arg) = &cache.aux[i] else {
                        return Err(Error::MissingCache("pool argmax"));
                    };
                    let x = input.unwrap();
                    let mut g = vec![0.0; x.len()];
                    for (&src, &dy) in arg.iter().zip(&grad) {
                        g[src] += dy;
                    }
                    grad = g;
                    grad_shape = x.shape().to_vec();
                }
                Layer::Dropout { .. } => {
                    let Aux::Mask(mask) = &cache.aux[i] else {
                        return Err(Error::MissingCache("dropout mask"));
                    };
                    if let Some(mask) = mask {
                        grad.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
                    }
                }
                Layer::Conv1d(c) => {
                    slot -= 2;
                    let (gw, rest) = params[slot..].split_at_mut(1);
                    let g = conv1d_backward(input.unwrap(), &cache.outputs[i], &grad, c, &mut gw[0], &mut rest[0]);
                    grad_shape = g.shape().to_vec();
                    grad = g.into_data();
                }
                Layer::Embedding(e) => {
                    slot -= 1;
                    if !e.frozen {
                        let d = e.dim;
                        for (t, &id) in cache.ids.iter().enumerate() {
                            if id == e.pad_id() {
                                continue;
                            }
                            let row = &mut params[slot][id * d..(id + 1) * d];
                            for (acc, g) in row.iter_mut().zip(&grad[t * d..(t + 1) * d]) {
                                *acc += g;
                            }
                        }
                    }
                }
                Layer::SoftmaxOutput { .. } => unreachable!("validated"),
            }
        }
        debug_assert_eq!(slot, 0);
        Ok(Gradients {
            params,
            input: Tensor::from_parts(grad_shape, grad),
        })
    }

    pub fn predict(&self, ids: &[usize]) -> Result<usize> {
        Ok(self.forward(ids, Mode::Eval)?.predicted())
    }
}
