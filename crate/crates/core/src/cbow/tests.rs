use super::*;
use crate::corpus::{build_vocabulary, corpus_samples};
use crate::rng::{self, Rng};

const LOG_SIGMOID_30: f64 = -9.357622968839737e-14;

fn direct_objective(u: &[f64], beta: &[f64], s: u8) -> f64 {
    let x: f64 = u.iter().zip(beta).map(|(a, b)| a * b).sum();
    let p = 1.0 / (1.0 + (-x).exp());
    (1.0 - s as f64) * p.ln() + s as f64 * (1.0 - p).ln()
}

fn rand_vec(r: &mut Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| r.random_range(-scale..scale)).collect()
}

/// Norm-wise relative error, with an absolute floor for near-zero gradients.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-6)
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn random_state(r: &mut Rng, v: usize, d: usize) -> TrainerState {
    let w = rand_vec(r, v * d, 1.0);
    let beta = rand_vec(r, (v - 1) * d, 1.0);
    TrainerState::from_parts(v, d, w, beta, 1e-3).unwrap()
}

#[test]
fn projection_examples() {
    let state = TrainerState::from_parts(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.0; 4], 0.1)
        .unwrap();
    assert_eq!(project(&[1], &state).unwrap().as_slice(), [3.0, 4.0]);
    assert_eq!(project(&[0, 2], &state).unwrap().as_slice(), [6.0, 8.0]);
    assert_eq!(project(&[1, 1], &state).unwrap().as_slice(), [6.0, 8.0]);
    assert!(matches!(project(&[], &state), Err(Error::EmptyContext)));
    assert!(matches!(project(&[3], &state), Err(Error::WordOutOfRange { .. })));
}

#[test]
fn sigmoid_examples() {
    assert_eq!(sigmoid(0.0), 0.5);
    for x in [0.3, 2.0, 17.5] {
        assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
    }
    assert!((sigmoid(100.0) - sigmoid(30.0)).abs() < 1e-12);
    assert!(sigmoid(-1000.0) > 0.0 && sigmoid(1000.0) < 1.0 + 1e-15);
}

#[test]
fn branch_and_objective_examples() {
    let u = [1.0, -1.0];
    let b = [2.0, 2.0];
    assert_eq!(branch_prob(&u, &b, 0), 0.5);
    assert_eq!(branch_prob(&u, &b, 1), 0.5);
    assert!((node_objective(&u, &b, 0) - 0.5f64.ln()).abs() < 1e-15);

    let big = node_objective(&[30.0], &[1.0], 0);
    assert!(((big - LOG_SIGMOID_30) / LOG_SIGMOID_30).abs() < 1e-9, "{big}");

    let mut r = rng::seeded(11, 0);
    for _ in 0..100 {
        let d = r.random_range(1..=8);
        let (u, b) = (rand_vec(&mut r, d, 1.0), rand_vec(&mut r, d, 1.0));
        let s = r.random_range(0..2u8);
        assert!((branch_prob(&u, &b, 0) + branch_prob(&u, &b, 1) - 1.0).abs() < 1e-15);
        let lhs = node_objective(&u, &b, s);
        let rhs = branch_prob(&u, &b, s).ln();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }
}

#[test]
fn word_prob_examples() {
    let tree = HuffmanTree::from_frequencies(&[1, 1]).unwrap();
    let state = TrainerState::from_parts(2, 3, vec![0.1; 6], vec![0.0; 3], 0.1).unwrap();
    let u = project(&[1], &state).unwrap();
    assert_eq!(word_prob(&tree, &state, &u, 0).unwrap(), 0.5);
    assert_eq!(word_prob(&tree, &state, &u, 1).unwrap(), 0.5);

    let tree = HuffmanTree::from_frequencies(&[1, 1, 1, 1]).unwrap();
    let state = TrainerState::from_parts(4, 2, vec![0.3; 8], vec![0.0; 6], 0.1).unwrap();
    for w in 0..4 {
        assert_eq!(word_prob(&tree, &state, &[0.3, 0.3], w).unwrap(), 0.25);
    }

    let tree = HuffmanTree::from_frequencies(&[9]).unwrap();
    let state = TrainerState::from_parts(1, 2, vec![0.3; 2], vec![], 0.1).unwrap();
    assert_eq!(word_prob(&tree, &state, &[0.3, 0.3], 0).unwrap(), 1.0);
}

#[test]
fn word_probs_sum_to_one() {
    let mut r = rng::seeded(3, 0);
    for _ in 0..50 {
        let v = r.random_range(2..=64);
        let d = r.random_range(1..=16);
        let freqs: Vec<usize> = (0..v).map(|_| r.random_range(1..100)).collect();
        let tree = HuffmanTree::from_frequencies(&freqs).unwrap();
        let state = random_state(&mut r, v, d);
        let u = rand_vec(&mut r, d, 1.0);
        let total: f64 = (0..v).map(|w| word_prob(&tree, &state, &u, w).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }
}

#[test]
fn log_likelihood_examples() {
    let tree = HuffmanTree::from_frequencies(&[1, 1]).unwrap();
    let state = TrainerState::from_parts(2, 2, vec![0.2; 4], vec![0.0; 2], 0.1).unwrap();
    let s = |c| ContextSample { center_id: c, context_ids: vec![1 - c] };
    let ll = log_likelihood(&[s(0), s(1), s(0)], &tree, &state).unwrap();
    assert!((ll - 3.0 * 0.5f64.ln()).abs() < 1e-15);
    assert_eq!(log_likelihood(&[], &tree, &state).unwrap(), 0.0);
}

#[test]
fn log_likelihood_equals_log_of_word_probs() {
    let mut r = rng::seeded(5, 0);
    for _ in 0..20 {
        let v = r.random_range(2..=12);
        let d = r.random_range(1..=6);
        let freqs: Vec<usize> = (0..v).map(|_| r.random_range(1..50)).collect();
        let tree = HuffmanTree::from_frequencies(&freqs).unwrap();
        let state = random_state(&mut r, v, d);
        let samples: Vec<ContextSample> = (0..5)
            .map(|_| ContextSample {
                center_id: r.random_range(0..v),
                context_ids: (0..r.random_range(1..4)).map(|_| r.random_range(0..v)).collect(),
            })
            .collect();
        let direct: f64 = samples
            .iter()
            .map(|s| {
                let u = project(&s.context_ids, &state).unwrap();
                word_prob(&tree, &state, &u, s.center_id).unwrap().ln()
            })
            .sum();
        let ll = log_likelihood(&samples, &tree, &state).unwrap();
        assert!((ll - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }
}

#[test]
fn gradient_examples() {
    let u = [0.5, -2.0];
    let b = [0.0, 0.0];
    assert_eq!(grad_beta(&u, &b, 0), [0.25, -1.0]);
    let b2 = [2.0, 0.5];
    assert_eq!(grad_u(&[0.0, 0.0], &b2, 0), [1.0, 0.25]);
    assert_eq!(grad_beta(&[0.0, 0.0], &b2, 1), [0.0, 0.0]);
    assert_eq!(grad_u(&u, &b, 1), [0.0, 0.0]);
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng::seeded(17, 0);
    let h = 1e-5;
    for _ in 0..100 {
        let d = r.random_range(1..=8);
        let u = rand_vec(&mut r, d, 1.0);
        let b = rand_vec(&mut r, d, 1.0);
        let s = r.random_range(0..2u8);
        let fd_beta = central_diff(|x| direct_objective(&u, x, s), &b, h);
        let fd_u = central_diff(|x| direct_objective(x, &b, s), &u, h);
        assert!(rel_err(&grad_beta(&u, &b, s), &fd_beta) < 1e-6);
        assert!(rel_err(&grad_u(&u, &b, s), &fd_u) < 1e-6);
        // the two gradients are mirror images of each other
        assert_eq!(grad_u(&u, &b, s), grad_beta(&b, &u, s));
    }
}

#[test]
fn sgd_step_hand_example() {
    let tree = HuffmanTree::from_frequencies(&[1, 1]).unwrap();
    for center in 0..2 {
        let s = tree.path_of(center).unwrap().0[0];
        let kappa = 1e-3;
        let mut state = TrainerState::from_parts(2, 1, vec![1.0, 1.0], vec![0.0], kappa).unwrap();
        let sample = ContextSample { center_id: center, context_ids: vec![1] };
        let ll = sgd_step(&sample, &tree, &mut state).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(state.beta(), [kappa * (0.5 - s as f64)]);
        // e = gate * beta_old = 0, so W is untouched
        assert_eq!(state.w(), [1.0, 1.0]);
    }
}

#[test]
fn zero_beta_leaves_w_fixed() {
    let tree = HuffmanTree::from_frequencies(&[4, 3, 2, 1]).unwrap();
    let mut state = TrainerState::from_parts(4, 2, vec![0.0; 8], vec![0.0; 6], 0.5).unwrap();
    let sample = ContextSample { center_id: 3, context_ids: vec![0, 1] };
    sgd_step(&sample, &tree, &mut state).unwrap();
    assert!(state.w().iter().all(|&x| x == 0.0));
    assert!(state.beta().iter().all(|&x| x == 0.0));
}

#[test]
fn sgd_step_is_ascent() {
    let mut r = rng::seeded(23, 0);
    for _ in 0..100 {
        let v = r.random_range(2..=16);
        let d = r.random_range(1..=8);
        let freqs: Vec<usize> = (0..v).map(|_| r.random_range(1..30)).collect();
        let tree = HuffmanTree::from_frequencies(&freqs).unwrap();
        let mut state = random_state(&mut r, v, d);
        let sample = ContextSample {
            center_id: r.random_range(0..v),
            context_ids: (0..r.random_range(1..5)).map(|_| r.random_range(0..v)).collect(),
        };
        let before = log_likelihood(std::slice::from_ref(&sample), &tree, &state).unwrap();
        let reported = sgd_step(&sample, &tree, &mut state).unwrap();
        let after = log_likelihood(std::slice::from_ref(&sample), &tree, &state).unwrap();
        assert!((reported - before).abs() < 1e-12 * before.abs().max(1.0));
        assert!(after >= before, "{before} -> {after}");
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn sgd_step_matches_gradient_functions() {
    let mut r = rng::seeded(29, 0);
    let v = 9;
    let d = 4;
    let tree = HuffmanTree::from_frequencies(&[9, 8, 7, 6, 5, 4, 3, 2, 1]).unwrap();
    let state0 = random_state(&mut r, v, d);
    let sample = ContextSample { center_id: 8, context_ids: vec![0, 3, 3] };
    let mut state = state0.clone();
    state.kappa = 0.01;
    sgd_step(&sample, &tree, &mut state).unwrap();

    let u = project(&sample.context_ids, &state0).unwrap();
    let (code, path) = tree.path_of(8).unwrap();
    let mut e = vec![0.0; d];
    for (&s, &node) in code.iter().zip(path) {
        let old = state0.beta_row(node);
        let gb = grad_beta(&u, old, s);
        for (acc, g) in e.iter_mut().zip(grad_u(&u, old, s)) {
            *acc += g;
        }
        for k in 0..d {
            assert!((state.beta_row(node)[k] - (old[k] + 0.01 * gb[k])).abs() < 1e-15);
        }
    }
    for k in 0..d {
        // word 3 appears twice in the context, so it receives the update twice
        let want3 = state0.w_row(3)[k] + 0.01 * e[k] + 0.01 * e[k];
        assert!((state.w_row(3)[k] - want3).abs() < 1e-14);
        assert!((state.w_row(0)[k] - (state0.w_row(0)[k] + 0.01 * e[k])).abs() < 1e-15);
        assert_eq!(state.w_row(8)[k], state0.w_row(8)[k]);
    }
}

fn tiny_corpus() -> (Vocabulary, HuffmanTree, Vec<ContextSample>) {
    let lines = [
        "the cat sat on the mat",
        "the dog sat on the log",
        "a cat and a dog",
        "the mat and the log",
    ];
    let sentences: Vec<Vec<_>> = lines.iter().map(|l| crate::corpus::tokenize(l)).collect();
    let vocab = build_vocabulary(&sentences, 1).unwrap();
    let tree = crate::huffman::build_huffman(&vocab).unwrap();
    let samples = corpus_samples(&sentences, &vocab, 2);
    (vocab, tree, samples)
}

#[test]
fn initialization_bounds() {
    let state = TrainerState::initialized(50, 8, 0.1, 4);
    assert!(state.w().iter().all(|x| x.abs() <= 0.5 / 8.0));
    assert!(state.beta().iter().all(|&x| x == 0.0));
    assert_eq!(state.beta().len(), 49 * 8);
}

#[test]
fn learning_rate_decays_per_epoch() {
    let (vocab, tree, samples) = tiny_corpus();
    let config = TrainingConfig { dim: 4, epochs: 3, min_count: 1, ..Default::default() };
    let out = train(&samples, &vocab, &tree, &config).unwrap();
    let kappas: Vec<f64> = out.losses.iter().map(|l| l.kappa).collect();
    for (got, want) in kappas.iter().zip([0.025, 0.02125, 0.0180625]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert_eq!(out.state.epoch, 3);
}

#[test]
fn deterministic_training_is_bit_identical() {
    let (vocab, tree, samples) = tiny_corpus();
    let config = TrainingConfig { dim: 6, epochs: 4, seed: 99, ..Default::default() };
    let a = train(&samples, &vocab, &tree, &config).unwrap();
    let b = train(&samples, &vocab, &tree, &config).unwrap();
    assert_eq!(a.state, b.state);
    let c = train(&samples, &vocab, &tree, &TrainingConfig { seed: 100, ..config }).unwrap();
    assert_ne!(a.state.w(), c.state.w());
}

#[test]
fn parallel_training_stays_finite() {
    let (vocab, tree, samples) = tiny_corpus();
    let config = TrainingConfig {
        dim: 6,
        epochs: 5,
        batch: 2,
        threads: 4,
        deterministic: false,
        ..Default::default()
    };
    let out = train(&samples, &vocab, &tree, &config).unwrap();
    assert!(out.state.is_finite());
    assert_eq!(out.losses.len(), 5);
}

#[test]
fn train_rejects_bad_input() {
    let (vocab, tree, samples) = tiny_corpus();
    let config = TrainingConfig { dim: 4, ..Default::default() };
    assert!(matches!(train(&[], &vocab, &tree, &config), Err(Error::NoSamples)));
    let other = HuffmanTree::from_frequencies(&[1, 2, 3]).unwrap();
    assert!(matches!(train(&samples, &vocab, &other, &config), Err(Error::Shape(_))));
    let bad = TrainingConfig { decay: 1.5, ..config.clone() };
    assert!(matches!(train(&samples, &vocab, &tree, &bad), Err(Error::Config(_))));
    let bad = TrainingConfig { kappa0: 0.0, ..config };
    assert!(matches!(train(&samples, &vocab, &tree, &bad), Err(Error::Config(_))));
}

#[test]
fn loss_log_format() {
    let (vocab, tree, samples) = tiny_corpus();
    let config = TrainingConfig { dim: 4, epochs: 2, ..Default::default() };
    let out = train(&samples, &vocab, &tree, &config).unwrap();
    let mut buf = Vec::new();
    out.write_loss_log(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("0 0.025 "));
    assert!(lines[1].starts_with("1 0.02125 "));
}

#[test]
fn nearest_neighbor_examples() {
    let w = vec![
        1.0, 0.0, //
        0.0, 1.0, //
        1.0, 0.0, //
        -1.0, 0.0,
    ];
    let state = TrainerState::from_parts(4, 2, w, vec![0.0; 6], 0.1).unwrap();
    let nn = nearest_neighbors(&state, 0, 3).unwrap();
    assert_eq!(nn, vec![(2, 1.0), (1, 0.0), (3, -1.0)]);
    assert_eq!(nearest_neighbors(&state, 1, 1).unwrap(), vec![(0, 0.0)]);
    assert!(nearest_neighbors(&state, 4, 1).is_err());
    assert!(nearest_neighbors(&state, 0, 4).is_err());
}
