use wvtext::cbow::log_likelihood;
use wvtext::corpus::{corpus_samples, read_sentences};
use wvtext::wvcnn::{accuracy, train_classifier, Architecture, Checkpoint, ClassifierTraining};
use wvtext::{
    build_huffman, build_vocabulary, evaluate, train, BleuOptions, CaptionRecord, CnnModel,
    EmbeddingTable, LabeledSequence, TrainingConfig,
};

const TEXT: &str = "\
The cat sat on the mat.
A dog sat on the log!
The cat chased the dog; the dog chased the cat.
Cats and dogs, dogs and cats.
The mat was on the floor, the log was in the yard.
";

#[test]
fn text_to_embeddings_round_trip() {
    let sentences = read_sentences(TEXT.as_bytes()).unwrap();
    assert_eq!(sentences.len(), 5);
    let vocab = build_vocabulary(&sentences, 2).unwrap();
    assert_eq!(vocab.surface(0), Some("the"));
    let tree = build_huffman(&vocab).unwrap();
    // the most frequent word never gets a longer code than any other
    let shortest = (0..vocab.len()).map(|w| tree.code_len(w)).min().unwrap();
    assert_eq!(tree.code_len(0), shortest);

    let samples = corpus_samples(&sentences, &vocab, 2);
    let config = TrainingConfig {
        dim: 10,
        half_window: 2,
        epochs: 30,
        min_count: 2,
        kappa0: 0.1,
        ..TrainingConfig::default()
    };
    let out = train(&samples, &vocab, &tree, &config).unwrap();
    let first = out.losses[0].mean_nll;
    let last = out.losses.last().unwrap().mean_nll;
    assert!(last < first, "{first} -> {last}");
    // a fresh likelihood evaluation of the trained state beats epoch 0
    let ll = log_likelihood(&samples, &tree, &out.state).unwrap();
    assert!(-ll / samples.len() as f64 <= first);

    let table = EmbeddingTable::from_state(&vocab, &out.state).unwrap();
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    let back = EmbeddingTable::read(&buf[..]).unwrap();
    assert_eq!(back, table);
    assert_eq!(back.row(3), out.state.w_row(3));
}

#[test]
fn parallel_training_stays_finite_and_learns() {
    let sentences: Vec<Vec<String>> = (0..400)
        .map(|i| {
            let base = if i % 2 == 0 { "x" } else { "y" };
            (0..8).map(|j| format!("{base}{}", (i * 7 + j * 3) % 10)).collect()
        })
        .collect();
    let vocab = build_vocabulary(&sentences, 1).unwrap();
    let tree = build_huffman(&vocab).unwrap();
    let samples = corpus_samples(&sentences, &vocab, 2);
    let config = TrainingConfig {
        dim: 16,
        half_window: 2,
        epochs: 6,
        min_count: 1,
        kappa0: 0.05,
        deterministic: false,
        threads: 4,
        batch: 32,
        ..TrainingConfig::default()
    };
    let out = train(&samples, &vocab, &tree, &config).unwrap();
    assert!(out.state.is_finite());
    assert_eq!(out.losses.len(), 6);
    assert!(out.losses[5].mean_nll < out.losses[0].mean_nll);
}

#[test]
fn embeddings_feed_the_classifier() {
    let sentences = read_sentences(TEXT.as_bytes()).unwrap();
    let vocab = build_vocabulary(&sentences, 1).unwrap();
    let tree = build_huffman(&vocab).unwrap();
    let samples = corpus_samples(&sentences, &vocab, 2);
    let config = TrainingConfig {
        dim: 6,
        epochs: 3,
        min_count: 1,
        ..TrainingConfig::default()
    };
    let table = EmbeddingTable::from_state(&vocab, &train(&samples, &vocab, &tree, &config).unwrap().state).unwrap();

    let arch = Architecture {
        seq_len: 6,
        channels: 8,
        dropout: 0.0,
        ..Architecture::default()
    };
    let mut model = CnnModel::wvcnn(table.len(), table.dim(), table.values().to_vec(), &arch, 3).unwrap();
    let pad = model.pad_id();
    let data: Vec<LabeledSequence> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| LabeledSequence::encode(s, |w| table.id(w), 6, pad, i % 2))
        .collect();
    let opts = ClassifierTraining {
        epochs: 60,
        batch: 5,
        kappa0: 0.3,
        decay: 1.0,
        seed: 2,
    };
    let log = train_classifier(&data, &mut model, &opts).unwrap();
    assert_eq!(log.last().unwrap().accuracy, 1.0);

    let ck = Checkpoint::new(table.words().to_vec(), model).unwrap();
    let mut buf = Vec::new();
    ck.write(&mut buf).unwrap();
    let back = Checkpoint::read(&buf[..]).unwrap();
    assert_eq!(accuracy(&back.model, &data).unwrap(), 1.0);
}

#[test]
fn caption_report_from_text() {
    let records = vec![
        CaptionRecord::from_text("1", &["A man rides a horse.", "a person on a horse"], "a man rides a horse").unwrap(),
        CaptionRecord::from_text("2", &["Two dogs play."], "two cats sleep").unwrap(),
    ];
    let report = evaluate(&records, &BleuOptions::default()).unwrap();
    assert_eq!(report.record_count, 2);
    // pooled: p1 = 6/8, p2 = 4/6, p3 = 3/4, p4 = 2/2, no brevity penalty
    assert!((report.bleu1 - 0.75).abs() < 1e-12);
    assert!((report.bleu4 - 0.375f64.powf(0.25)).abs() < 1e-12);
    assert!(report.cider > 0.0);
    let mut out = Vec::new();
    report.write_json(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("{\n  \"bleu1\": "));
    assert!(text.ends_with("  \"records\": 2\n}\n"));
}
