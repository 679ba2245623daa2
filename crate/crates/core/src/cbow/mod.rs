//! CBOW with hierarchical softmax.
//!
//! The projection `U` of a training sample is the plain sum of its context
//! word vectors. The probability of the center word is the product of binary
//! decisions along its Huffman path, each decision made by a sigmoid of
//! `U · β` for the internal node's parameter vector `β`. Training maximizes
//! the log of that probability by stochastic gradient ascent: each node's `β`
//! moves along `(1 - s - σ(U·β)) U`, and the sum of `(1 - s - σ(U·β)) β` over
//! the path is added back to every context word vector.

mod embeddings;
mod store;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::corpus::{ContextSample, Vocabulary};
use crate::error::{Error, Result};
use crate::huffman::HuffmanTree;
use crate::rng;

pub use embeddings::EmbeddingTable;
use store::Store;

/// Logits are clamped to `[-SIGMOID_CLAMP, SIGMOID_CLAMP]` before any
/// exponentiation.
pub const SIGMOID_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub dim: usize,
    /// Context words taken on each side of the center word.
    pub half_window: usize,
    pub kappa0: f64,
    /// Learning-rate multiplier applied after every epoch.
    pub decay: f64,
    /// Shuffled samples are dealt out in batches of this size. Updates are
    /// still applied one sample at a time.
    pub batch: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub threads: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 100,
            half_window: 5,
            kappa0: 0.025,
            decay: 0.85,
            batch: 64,
            epochs: 5,
            min_count: 5,
            seed: 1,
            deterministic: true,
            threads: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if self.half_window == 0 {
            return fail("half_window must be positive");
        }
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) {
            return fail("kappa0 must be positive and finite");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return fail("decay must lie in (0, 1]");
        }
        if self.batch == 0 || self.epochs == 0 || self.min_count == 0 {
            return fail("batch, epochs and min_count must be positive");
        }
        Ok(())
    }

    fn single_worker(&self) -> bool {
        self.deterministic || self.threads <= 1
    }
}

/// Word vectors `W` (V × d), internal-node vectors `β` ((V−1) × d), the
/// current learning rate and the number of completed epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    vocab_size: usize,
    dim: usize,
    w: Vec<f64>,
    beta: Vec<f64>,
    pub kappa: f64,
    pub epoch: usize,
}

impl TrainerState {
    /// `W` uniform in `[-0.5/d, 0.5/d]` from the seed, `β` zero.
    pub fn initialized(vocab_size: usize, dim: usize, kappa: f64, seed: u64) -> Self {
        let mut r = rng::seeded(seed, rng::STREAM_INIT);
        let half = 0.5 / dim as f64;
        let w = (0..vocab_size * dim)
            .map(|_| r.random_range(-half..=half))
            .collect();
        TrainerState {
            vocab_size,
            dim,
            w,
            beta: vec![0.0; vocab_size.saturating_sub(1) * dim],
            kappa,
            epoch: 0,
        }
    }

    pub fn from_parts(
        vocab_size: usize,
        dim: usize,
        w: Vec<f64>,
        beta: Vec<f64>,
        kappa: f64,
    ) -> Result<Self> {
        if dim == 0 || vocab_size == 0 {
            return Err(Error::Shape("vocab_size and dim must be positive".into()));
        }
        if w.len() != vocab_size * dim || beta.len() != (vocab_size - 1) * dim {
            return Err(Error::Shape(format!(
                "expected W {}x{dim} and beta {}x{dim}, got {} and {} values",
                vocab_size,
                vocab_size - 1,
                w.len(),
                beta.len()
            )));
        }
        Ok(TrainerState {
            vocab_size,
            dim,
            w,
            beta,
            kappa,
            epoch: 0,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_mut(&mut self) -> &mut [f64] {
        &mut self.beta
    }

    pub fn w_row(&self, word: usize) -> &[f64] {
        &self.w[word * self.dim..(word + 1) * self.dim]
    }

    pub fn beta_row(&self, node: usize) -> &[f64] {
        &self.beta[node * self.dim..(node + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.beta).all(|v| v.is_finite())
    }

    fn check_tree(&self, tree: &HuffmanTree) -> Result<()> {
        if tree.leaf_count() != self.vocab_size {
            return Err(Error::Shape(format!(
                "tree has {} leaves but state has {} word vectors",
                tree.leaf_count(),
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// Sum of the context word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionVector(Vec<f64>);

impl ProjectionVector {
    pub fn new(values: Vec<f64>) -> Self {
        ProjectionVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for ProjectionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn project(context_ids: &[usize], state: &TrainerState) -> Result<ProjectionVector> {
    if context_ids.is_empty() {
        return Err(Error::EmptyContext);
    }
    let mut u = vec![0.0; state.dim];
    for &c in context_ids {
        if c >= state.vocab_size {
            return Err(Error::WordOutOfRange {
                id: c,
                size: state.vocab_size,
            });
        }
        for (acc, &x) in u.iter_mut().zip(state.w_row(c)) {
            *acc += x;
        }
    }
    Ok(ProjectionVector(u))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP)).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log σ(x)` for bit 0, `log(1 − σ(x))` for bit 1, without cancellation.
#[inline]
fn log_branch(x: f64, s: u8) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    let signed = if s == 0 { x } else { -x };
    -(-signed).exp().ln_1p()
}

/// Probability of taking branch `s` at a node with parameters `beta`.
pub fn branch_prob(u: &[f64], beta: &[f64], s: u8) -> f64 {
    let x = dot(u, beta);
    if s == 0 {
        sigmoid(x)
    } else {
        sigmoid(-x)
    }
}

/// Probability of `word` given the projection: product of branch
/// probabilities along its path (1 for a single-word tree).
pub fn word_prob(tree: &HuffmanTree, state: &TrainerState, u: &[f64], word: usize) -> Result<f64> {
    state.check_tree(tree)?;
    let (code, path) = tree.path_of(word)?;
    Ok(code
        .iter()
        .zip(path)
        .map(|(&s, &node)| branch_prob(u, state.beta_row(node), s))
        .product())
}

/// Per-node log-likelihood term; equals `ln(branch_prob(u, beta, s))`.
pub fn node_objective(u: &[f64], beta: &[f64], s: u8) -> f64 {
    log_branch(dot(u, beta), s)
}

/// Sum over samples of the center word's log-probability.
pub fn log_likelihood(
    samples: &[ContextSample],
    tree: &HuffmanTree,
    state: &TrainerState,
) -> Result<f64> {
    state.check_tree(tree)?;
    let mut total = 0.0;
    for sample in samples {
        let u = project(&sample.context_ids, state)?;
        let (code, path) = tree.path_of(sample.center_id)?;
        total += code
            .iter()
            .zip(path)
            .map(|(&s, &node)| node_objective(&u, state.beta_row(node), s))
            .sum::<f64>();
    }
    Ok(total)
}

#[inline]
fn gate(x: f64, s: u8) -> f64 {
    1.0 - s as f64 - sigmoid(x)
}

/// Gradient of [`node_objective`] with respect to `beta`.
pub fn grad_beta(u: &[f64], beta: &[f64], s: u8) -> Vec<f64> {
    let g = gate(dot(u, beta), s);
    u.iter().map(|&x| g * x).collect()
}

/// Gradient of [`node_objective`] with respect to `u`.
pub fn grad_u(u: &[f64], beta: &[f64], s: u8) -> Vec<f64> {
    let g = gate(dot(u, beta), s);
    beta.iter().map(|&x| g * x).collect()
}

/// Scratch buffers reused across samples.
struct Scratch {
    u: Vec<f64>,
    e: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            u: vec![0.0; dim],
            e: vec![0.0; dim],
        }
    }
}

/// One gradient-ascent update. Returns the sample's log-likelihood under the
/// parameters as they were before the update.
fn step<S: Store + ?Sized>(
    w: &S,
    beta: &S,
    dim: usize,
    tree: &HuffmanTree,
    sample: &ContextSample,
    kappa: f64,
    scratch: &mut Scratch,
) -> f64 {
    let Scratch { u, e } = scratch;
    u.fill(0.0);
    for &c in &sample.context_ids {
        let base = c * dim;
        for (k, acc) in u.iter_mut().enumerate() {
            *acc += w.get(base + k);
        }
    }

    e.fill(0.0);
    let mut ll = 0.0;
    let (code, path) = tree.path(sample.center_id);
    for (&s, &node) in code.iter().zip(path) {
        let base = node * dim;
        let x: f64 = u.iter().enumerate().map(|(k, &uk)| uk * beta.get(base + k)).sum();
        ll += log_branch(x, s);
        let g = gate(x, s);
        for k in 0..dim {
            let b = beta.get(base + k);
            e[k] += g * b;
            beta.set(base + k, b + kappa * g * u[k]);
        }
    }

    for &c in &sample.context_ids {
        let base = c * dim;
        for (k, &ek) in e.iter().enumerate() {
            w.set(base + k, w.get(base + k) + kappa * ek);
        }
    }
    ll
}

fn check_sample(sample: &ContextSample, v: usize) -> Result<()> {
    if sample.context_ids.is_empty() {
        return Err(Error::EmptyContext);
    }
    if let Some(&bad) = std::iter::once(&sample.center_id)
        .chain(&sample.context_ids)
        .find(|&&id| id >= v)
    {
        return Err(Error::WordOutOfRange { id: bad, size: v });
    }
    Ok(())
}

/// Applies one update for `sample` at the state's current learning rate and
/// returns the sample's pre-update log-likelihood.
pub fn sgd_step(sample: &ContextSample, tree: &HuffmanTree, state: &mut TrainerState) -> Result<f64> {
    state.check_tree(tree)?;
    check_sample(sample, state.vocab_size)?;
    let dim = state.dim;
    let kappa = state.kappa;
    let mut scratch = Scratch::new(dim);
    let TrainerState { w, beta, .. } = state;
    Ok(step(
        store::cells(w),
        store::cells(beta),
        dim,
        tree,
        sample,
        kappa,
        &mut scratch,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub kappa: f64,
    /// Mean negative log-likelihood of the samples, each measured just
    /// before its own update.
    pub mean_nll: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub state: TrainerState,
    pub losses: Vec<EpochLoss>,
}

impl TrainingOutcome {
    /// One `<epoch> <kappa> <mean_neg_log_likelihood>` line per epoch.
    pub fn write_loss_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for l in &self.losses {
            writeln!(out, "{} {} {:.6}", l.epoch, l.kappa, l.mean_nll)?;
        }
        Ok(())
    }
}

/// Trains embeddings for `vocab` from pre-extracted samples.
///
/// The learning rate starts at `kappa0` and is multiplied by `decay` after
/// each epoch. With `deterministic` set (or a single thread) the run is
/// bit-reproducible for a given seed; otherwise batches are spread over
/// `threads` workers that update the shared parameters without locking.
pub fn train(
    samples: &[ContextSample],
    vocab: &Vocabulary,
    tree: &HuffmanTree,
    config: &TrainingConfig,
) -> Result<TrainingOutcome> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let v = vocab.len();
    let mut state = TrainerState::initialized(v, config.dim, config.kappa0, config.seed);
    state.check_tree(tree)?;
    for s in samples {
        check_sample(s, v)?;
    }

    let mut shuffle = rng::seeded(config.seed, rng::STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let ll = if config.single_worker() {
            run_epoch_serial(samples, &order, tree, &mut state)
        } else {
            run_epoch_parallel(samples, &order, tree, &mut state, config)
        };
        if !state.is_finite() {
            return Err(Error::Model(format!("non-finite parameters after epoch {epoch}")));
        }
        losses.push(EpochLoss {
            epoch,
            kappa: state.kappa,
            mean_nll: -ll / samples.len() as f64,
        });
        state.kappa *= config.decay;
        state.epoch += 1;
    }
    Ok(TrainingOutcome { state, losses })
}

fn run_epoch_serial(
    samples: &[ContextSample],
    order: &[usize],
    tree: &HuffmanTree,
    state: &mut TrainerState,
) -> f64 {
    let dim = state.dim;
    let kappa = state.kappa;
    let mut scratch = Scratch::new(dim);
    let w = store::cells(&mut state.w);
    let beta = store::cells(&mut state.beta);
    order
        .iter()
        .map(|&i| step(w, beta, dim, tree, &samples[i], kappa, &mut scratch))
        .sum()
}

fn run_epoch_parallel(
    samples: &[ContextSample],
    order: &[usize],
    tree: &HuffmanTree,
    state: &mut TrainerState,
    config: &TrainingConfig,
) -> f64 {
    let dim = state.dim;
    let kappa = state.kappa;
    let w = store::to_atomic(&state.w);
    let beta = store::to_atomic(&state.beta);
    let batches: Vec<&[usize]> = order.chunks(config.batch).collect();
    let next = AtomicUsize::new(0);

    let ll = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..config.threads)
            .map(|_| {
                scope.spawn(|| {
                    let mut scratch = Scratch::new(dim);
                    let mut ll = 0.0;
                    loop {
                        let b = next.fetch_add(1, Ordering::Relaxed);
                        let Some(batch) = batches.get(b) else { break };
                        for &i in *batch {
                            ll += step(&w[..], &beta[..], dim, tree, &samples[i], kappa, &mut scratch);
                        }
                    }
                    ll
                })
            })
            .collect();
        workers.into_iter().map(|h| h.join().expect("worker panicked")).sum()
    });

    state.w = store::from_atomic(w);
    state.beta = store::from_atomic(beta);
    ll
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// The `k` rows most cosine-similar to row `query`, excluding `query`
/// itself, in descending similarity with ties broken by id.
pub(crate) fn nearest_rows(rows: &[f64], dim: usize, query: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let n = rows.len() / dim;
    if query >= n {
        return Err(Error::WordOutOfRange { id: query, size: n });
    }
    if k >= n {
        return Err(Error::Config(format!("k = {k} must be below the vocabulary size {n}")));
    }
    let q = &rows[query * dim..(query + 1) * dim];
    let mut scored: Vec<(usize, f64)> = (0..n)
        .filter(|&i| i != query)
        .map(|i| (i, cosine(q, &rows[i * dim..(i + 1) * dim])))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

pub fn nearest_neighbors(state: &TrainerState, word: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    nearest_rows(&state.w, state.dim, word, k)
}

#[cfg(test)]
mod tests;
