use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use punct_restore::serve::{serve_listener, serve_stream, Restorer, ERROR_PREFIX};
use punct_restore::tagger::{predict, Checkpoint, TaggerConfig, TaggerModel, Vocab};
use punct_restore::text::{apply_labels, tokenize, LabeledSequence, Normalizer};

const LINES: &[&str] = &[
    "hi i'm calling about my bill",
    "um can you uh can you check the balance please",
    "thank you thank you",
    "",
    "uh",
    "...",
    "Okay, I'll wait.",
];

fn restorer() -> Restorer {
    let all: Vec<Vec<String>> = LINES.iter().map(|l| tokenize(l)).collect();
    let vocab = Vocab::build(all.iter().map(|t| t.as_slice()), 1);
    let model = TaggerModel::new(TaggerConfig {
        vocab_size: vocab.len(),
        d_model: 16,
        n_heads: 2,
        n_layers: 2,
        ffn_dim: 16,
        max_seq_len: 4,
        dropout_prob: 0.1,
        seed: 8,
    })
    .unwrap();
    Restorer::new(Checkpoint::new(model, vocab).unwrap())
}

#[test]
fn serving_equals_normalize_then_predict() {
    let r = restorer();
    let norm = Normalizer::default();
    let mut out = Vec::new();
    let input = LINES.join("\n");
    serve_stream(&r, input.as_bytes(), &mut out).unwrap();
    let got: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
    assert_eq!(got.len(), LINES.len());
    for (line, reply) in LINES.iter().zip(&got) {
        let want = match norm.normalize_line(line) {
            Ok(seq) => {
                let labels = predict(&r.checkpoint.model, &r.checkpoint.vocab, &seq.tokens).unwrap();
                apply_labels(&LabeledSequence { tokens: seq.tokens, labels })
            }
            Err(_) => String::new(),
        };
        assert_eq!(*reply, want, "{line:?}");
    }
    assert_eq!(punct_restore::text::strip_punctuation(got[1]), "can you check the balance please");
    assert_eq!(got[3], "");
    assert_eq!(got[4], "");
    assert_eq!(got[5], "");
}

#[test]
fn tcp_sessions_are_independent() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let r = Arc::new(restorer());
    let expected = r.restore_line(LINES[1]).unwrap();
    std::thread::spawn(move || serve_listener(r, listener));

    let clients: Vec<_> = (0..3)
        .map(|_| {
            let expected = expected.clone();
            std::thread::spawn(move || {
                let mut s = TcpStream::connect(addr).unwrap();
                let mut reader = BufReader::new(s.try_clone().unwrap());
                for _ in 0..5 {
                    writeln!(s, "{}", LINES[1]).unwrap();
                    let mut reply = String::new();
                    reader.read_line(&mut reply).unwrap();
                    assert_eq!(reply.trim_end_matches('\n'), expected);
                }
                s.write_all(b"\xc3\x28\n").unwrap();
                let mut reply = String::new();
                reader.read_line(&mut reply).unwrap();
                assert!(reply.starts_with(ERROR_PREFIX));
            })
        })
        .collect();
    for c in clients {
        c.join().unwrap();
    }
}

#[test]
fn trained_model_terminates_declaratives() {
    use punct_restore::tagger::{encode_dataset, train, TrainConfig};
    use punct_restore::text::extract_labels;
    let lines = [
        "thank you for calling.",
        "thank you for waiting.",
        "i can help you with that.",
        "can you hold for a moment?",
        "what is your account number?",
        "okay, thank you.",
        "yes, i can check that for you.",
        "how can i help you today?",
    ];
    let data: Vec<LabeledSequence> = lines.iter().map(|l| extract_labels(l).unwrap()).collect();
    let vocab = Vocab::build(data.iter().map(|s| s.tokens.as_slice()), 1);
    let model = TaggerModel::new(TaggerConfig {
        vocab_size: vocab.len(),
        d_model: 32,
        n_heads: 4,
        n_layers: 2,
        ffn_dim: 64,
        max_seq_len: 32,
        dropout_prob: 0.1,
        seed: 1,
    })
    .unwrap();
    let cfg = TrainConfig { epochs: 60, batch_size: 4, learning_rate: 2e-3, seed: 1, ..Default::default() };
    let trained = train(model, &encode_dataset(&data, &vocab, 32), &cfg, |_, _| Ok(())).unwrap();
    let r = Restorer::new(Checkpoint::new(trained.model, vocab).unwrap());
    let first = r.restore_line("um thank you for calling").unwrap();
    assert_eq!(first, "thank you for calling.");
    assert_eq!(r.restore_line("um thank you for calling").unwrap(), first);
}

#[test]
fn wider_model_is_slower() {
    use punct_restore::serve::bench;
    use punct_restore::synthetic::TARGET;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let lines: Vec<String> = (0..80).map(|_| TARGET.utterance(&mut rng, 3)).collect();
    let toks: Vec<Vec<String>> = lines.iter().map(|l| punct_restore::lm::lm_tokens(l).unwrap()).collect();
    let vocab = Vocab::build(toks.iter().map(|t| t.as_slice()), 1);
    let at = |d: usize| {
        let m = TaggerModel::new(TaggerConfig {
            vocab_size: vocab.len(),
            d_model: d,
            n_heads: 4,
            n_layers: 4,
            ffn_dim: 4 * d,
            max_seq_len: 128,
            dropout_prob: 0.1,
            seed: 2,
        })
        .unwrap();
        Restorer::new(Checkpoint::new(m, vocab.clone()).unwrap())
    };
    let (narrow, wide) = (at(64), at(128));
    let a = bench(&narrow, &lines, 10, "t").unwrap().mean_ms;
    let b = bench(&wide, &lines, 10, "t").unwrap().mean_ms;
    assert!(b > a, "d=64 {a} ms, d=128 {b} ms");
}
