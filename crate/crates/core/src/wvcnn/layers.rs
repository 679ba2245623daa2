//! Layer parameters and the per-layer forward and backward kernels.

use rand::Rng as _;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Word-vector lookup. Id `vocab` is the padding id and embeds to zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vocab: usize,
    pub dim: usize,
    pub frozen: bool,
    /// `vocab × dim`
    pub weights: Vec<f64>,
}

impl Embedding {
    pub fn pad_id(&self) -> usize {
        self.vocab
    }
}

/// Valid (unpadded) stride-1 convolution followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// `out_channels × kernel × in_channels`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(kernel: usize, in_channels: usize, out_channels: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (kernel * in_channels) as f64).sqrt();
        Conv1d {
            kernel,
            in_channels,
            out_channels,
            weights: (0..out_channels * kernel * in_channels)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    fn w(&self, o: usize, j: usize, i: usize) -> f64 {
        self.weights[(o * self.kernel + j) * self.in_channels + i]
    }
}

/// Fully connected `outputs × inputs` layer, no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
            bias: vec![0.0; outputs],
        }
    }
}

pub fn embed_lookup(ids: &[usize], layer: &Embedding) -> Result<Tensor> {
    if ids.is_empty() {
        return Err(Error::Shape("empty id sequence".into()));
    }
    let d = layer.dim;
    let mut out = vec![0.0; ids.len() * d];
    for (row, &id) in out.chunks_exact_mut(d).zip(ids) {
        if id == layer.pad_id() {
            continue;
        }
        if id > layer.vocab {
            return Err(Error::WordOutOfRange {
                id,
                size: layer.vocab,
            });
        }
        row.copy_from_slice(&layer.weights[id * d..(id + 1) * d]);
    }
    Ok(Tensor::from_parts(vec![ids.len(), d], out))
}

/// `out[t, o] = relu(bias[o] + Σ_{j<k, i<c_in} w[o, j, i] · in[t + j, i])`.
pub fn conv1d_forward(input: &Tensor, layer: &Conv1d) -> Result<Tensor> {
    let (len, c_in) = input.dims2()?;
    if c_in != layer.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {c_in}",
            layer.in_channels
        )));
    }
    if len < layer.kernel {
        return Err(Error::Shape(format!(
            "sequence length {len} shorter than kernel width {}",
            layer.kernel
        )));
    }
    let x = input.data();
    let t_out = len - layer.kernel + 1;
    let c_out = layer.out_channels;
    let mut out = vec![0.0; t_out * c_out];
    for t in 0..t_out {
        let window = &x[t * c_in..(t + layer.kernel) * c_in];
        for o in 0..c_out {
            let w = &layer.weights[o * layer.kernel * c_in..(o + 1) * layer.kernel * c_in];
            let pre = w.iter().zip(window).fold(layer.bias[o], |acc, (a, b)| acc + a * b);
            out[t * c_out + o] = pre.max(0.0);
        }
    }
    Ok(Tensor::from_parts(vec![t_out, c_out], out))
}

/// Returns the input gradient and accumulates parameter gradients.
/// `output` is the post-ReLU forward output, which gates the gradient.
pub(crate) fn conv1d_backward(
    input: &Tensor,
    output: &Tensor,
    grad_out: &[f64],
    layer: &Conv1d,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Tensor {
    let (len, c_in) = (input.shape()[0], input.shape()[1]);
    let (t_out, c_out) = (output.shape()[0], output.shape()[1]);
    let x = input.data();
    let mut grad_in = vec![0.0; len * c_in];
    for t in 0..t_out {
        for o in 0..c_out {
            let idx = t * c_out + o;
            if output.data()[idx] <= 0.0 {
                continue;
            }
            let g = grad_out[idx];
            grad_b[o] += g;
            for j in 0..layer.kernel {
                for i in 0..c_in {
                    grad_w[(o * layer.kernel + j) * c_in + i] += g * x[(t + j) * c_in + i];
                    grad_in[(t + j) * c_in + i] += g * layer.w(o, j, i);
                }
            }
        }
    }
    Tensor::from_parts(vec![len, c_in], grad_in)
}

/// Inverted dropout. In training, each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; the returned mask
/// holds that per-element multiplier. Outside training it is the identity.
pub fn dropout_forward(
    input: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut Rng,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let out = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((Tensor::from_parts(input.shape().to_vec(), out), Some(mask)))
}

/// Non-overlapping max pooling over time. A trailing remainder shorter than
/// `width` is dropped. The second value holds, per output element, the flat
/// input index of the maximum (earliest wins ties).
pub fn maxpool1d_forward(input: &Tensor, width: usize) -> Result<(Tensor, Vec<usize>)> {
    let (len, c) = input.dims2()?;
    if width == 0 || len < width {
        return Err(Error::Shape(format!("cannot pool length {len} with width {width}")));
    }
    let x = input.data();
    let t_out = len / width;
    let mut out = Vec::with_capacity(t_out * c);
    let mut argmax = Vec::with_capacity(t_out * c);
    for t in 0..t_out {
        for ch in 0..c {
            let mut best = (t * width) * c + ch;
            for s in 1..width {
                let idx = (t * width + s) * c + ch;
                if x[idx] > x[best] {
                    best = idx;
                }
            }
            out.push(x[best]);
            argmax.push(best);
        }
    }
    Ok((Tensor::from_parts(vec![t_out, c], out), argmax))
}

pub fn dense_forward(input: &[f64], layer: &Dense) -> Result<Vec<f64>> {
    if input.len() != layer.inputs {
        return Err(Error::Shape(format!(
            "dense expects {} inputs, got {}",
            layer.inputs,
            input.len()
        )));
    }
    Ok(layer
        .weights
        .chunks_exact(layer.inputs)
        .zip(&layer.bias)
        .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
        .collect())
}

pub(crate) fn dense_backward(
    input: &[f64],
    grad_out: &[f64],
    layer: &Dense,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Vec<f64> {
    let mut grad_in = vec![0.0; layer.inputs];
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] += g;
        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
        let grow = &mut grad_w[o * layer.inputs..(o + 1) * layer.inputs];
        for i in 0..layer.inputs {
            grow[i] += g * input[i];
            grad_in[i] += g * row[i];
        }
    }
    grad_in
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Class probabilities and the cross-entropy loss `-ln p[label]`.
pub fn dense_softmax_forward(input: &[f64], layer: &Dense, label: usize) -> Result<(Vec<f64>, f64)> {
    if label >= layer.outputs {
        return Err(Error::LabelOutOfRange {
            label,
            classes: layer.outputs,
        });
    }
    let probs = softmax(&dense_forward(input, layer)?);
    let loss = -probs[label].ln();
    Ok((probs, loss))
}
