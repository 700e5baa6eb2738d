use std::path::Path;

use punct_restore::dataset::{read_dataset, write_dataset};
use punct_restore::pipeline::{run_experiment, EarlyStopping, ExperimentPlan, InitSpec, StageSpec};
use punct_restore::synthetic::{EXTERNAL_CONVERSATIONAL, TARGET};
use punct_restore::tagger::{
    parameter_checksum, predict_ids, predict_logits, Checkpoint, TaggerConfig, TaggerModel,
    TrainConfig, Vocab,
};
use punct_restore::text::{extract_labels, LabeledSequence};
use punct_restore::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(vocab_size: usize, max_seq_len: usize) -> TaggerConfig {
    TaggerConfig {
        vocab_size,
        d_model: 16,
        n_heads: 2,
        n_layers: 2,
        ffn_dim: 32,
        max_seq_len,
        dropout_prob: 0.1,
        seed: 3,
    }
}

// Zero position embeddings and attention outputs leave every token's logits a
// function of that token alone.
fn position_agnostic(mut m: TaggerModel<f64>) -> TaggerModel<f64> {
    m.pos_emb.data.iter_mut().for_each(|x| *x = 0.0);
    for l in &mut m.layers {
        l.wo.data.iter_mut().for_each(|x| *x = 0.0);
        l.bo.data.iter_mut().for_each(|x| *x = 0.0);
    }
    m
}

#[test]
fn windowed_prediction_matches_one_long_window() {
    let short = position_agnostic(TaggerModel::<f64>::new(config(40, 16)).unwrap());
    let mut long = position_agnostic(TaggerModel::<f64>::new(config(40, 512)).unwrap());
    long.tok_emb = short.tok_emb.clone();
    long.emb_ln = short.emb_ln.clone();
    long.layers = short.layers.clone();
    long.head_w = short.head_w.clone();
    long.head_b = short.head_b.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for len in [1, 15, 16, 17, 31, 33, 100, 300] {
        let ids: Vec<u32> = (0..len).map(|_| rng.random_range(0..40)).collect();
        let a = predict_logits(&short, &ids).unwrap();
        let b = predict_logits(&long, &ids).unwrap();
        assert_eq!(a.len(), len * 4);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "len {len}");
        }
        assert_eq!(predict_ids(&short, &ids).unwrap(), predict_ids(&long, &ids).unwrap());
    }
}

#[test]
fn short_inputs_skip_windowing() {
    let m = TaggerModel::<f32>::new(config(40, 16)).unwrap();
    let ids: Vec<u32> = (0..16).map(|i| i % 40).collect();
    let whole = m.forward(&punct_restore::tagger::Batch::from_sequences(&[&ids])).unwrap();
    assert_eq!(predict_logits(&m, &ids).unwrap(), whole);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let words: Vec<String> = ["[PAD]", "[UNK]", "a", "b"].iter().map(|s| s.to_string()).collect();
    let vocab = Vocab::from_list(words).unwrap();
    let ckpt = Checkpoint::new(TaggerModel::new(config(4, 8)).unwrap(), vocab).unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.model, ckpt.model);
    assert_eq!(back.vocab, ckpt.vocab);
    assert_eq!(parameter_checksum(&back.model), parameter_checksum(&ckpt.model));
    assert_eq!(back.checksum(), ckpt.checksum());
}

fn write_sets(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut gen = |n: usize, ext: bool| -> Vec<LabeledSequence> {
        (0..n)
            .map(|_| {
                let g = if ext { &EXTERNAL_CONVERSATIONAL } else { &TARGET };
                extract_labels(&g.utterance(&mut rng, 2)).unwrap()
            })
            .collect()
    };
    write_dataset(&dir.join("ext.jsonl"), &gen(40, true)).unwrap();
    write_dataset(&dir.join("ind.jsonl"), &gen(40, false)).unwrap();
    write_dataset(&dir.join("test.jsonl"), &gen(20, false)).unwrap();
}

fn stage(name: &str, data: &str, epochs: usize) -> StageSpec {
    StageSpec {
        name: name.into(),
        data: data.into(),
        train: TrainConfig {
            epochs,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 5,
            ..Default::default()
        },
        early_stopping: None,
    }
}

fn plan(dir: &Path, name: &str, init: InitSpec, stages: Vec<StageSpec>) -> ExperimentPlan {
    ExperimentPlan {
        name: name.into(),
        init,
        model: TaggerConfig { vocab_size: 0, ..config(0, 32) },
        stages,
        eval: "test.jsonl".into(),
        vocab_sources: vec!["ext.jsonl".into(), "ind.jsonl".into()],
        vocab_min_freq: 1,
        base_dir: dir.to_path_buf(),
    }
}

#[test]
fn zero_epoch_stage_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    write_sets(dir.path());
    let one = run_experiment(&plan(dir.path(), "one", InitSpec::Random, vec![stage("ind", "ind.jsonl", 2)]), None).unwrap();
    let two = run_experiment(
        &plan(dir.path(), "two", InitSpec::Random, vec![stage("ext", "ext.jsonl", 0), stage("ind", "ind.jsonl", 2)]),
        None,
    )
    .unwrap();
    assert_eq!(one.checkpoint.model, two.checkpoint.model);
    assert_eq!(one.report, two.report);
}

#[test]
fn staged_run_equals_run_resumed_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    write_sets(dir.path());
    let out = dir.path().join("runs");
    let first = plan(dir.path(), "first", InitSpec::Random, vec![stage("ext", "ext.jsonl", 2)]);
    run_experiment(&first, Some(&out.join("first"))).unwrap();
    let resumed = plan(
        dir.path(),
        "resumed",
        InitSpec::Checkpoint { path: out.join("first/final.ckpt") },
        vec![stage("ind", "ind.jsonl", 2)],
    );
    let resumed = run_experiment(&resumed, Some(&out.join("resumed"))).unwrap();
    let both = plan(dir.path(), "both", InitSpec::Random, vec![stage("ext", "ext.jsonl", 2), stage("ind", "ind.jsonl", 2)]);
    let both = run_experiment(&both, Some(&out.join("both"))).unwrap();
    assert_eq!(resumed.checkpoint.model, both.checkpoint.model);
    let strip = |r: &punct_restore::eval::EvalReport| punct_restore::eval::EvalReport { manifest: None, ..r.clone() };
    assert_eq!(strip(&resumed.report), strip(&both.report));
    assert!(resumed.manifest.init_sha256.is_some());

    for f in ["ext/epoch1.ckpt", "ext/epoch2.ckpt", "ind/epoch2.ckpt", "final.ckpt", "manifest.json", "report.json"] {
        assert!(out.join("both").join(f).exists(), "{f}");
    }
    let saved = Checkpoint::load(&out.join("both/final.ckpt")).unwrap();
    assert_eq!(saved.model, both.checkpoint.model);
    assert_eq!(read_dataset(&dir.path().join("test.jsonl")).unwrap().len(), 20);
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_sets(dir.path());
    let out = dir.path().join("runs");
    run_experiment(&plan(dir.path(), "a", InitSpec::Random, vec![stage("ext", "ext.jsonl", 1)]), Some(&out)).unwrap();
    let mut wider = plan(
        dir.path(),
        "b",
        InitSpec::Checkpoint { path: out.join("final.ckpt") },
        vec![stage("ind", "ind.jsonl", 1)],
    );
    wider.model.d_model = 32;
    assert!(matches!(run_experiment(&wider, None), Err(Error::Incompatible(_))));
    let mut vocab = plan(
        dir.path(),
        "c",
        InitSpec::Checkpoint { path: out.join("final.ckpt") },
        vec![stage("ind", "ind.jsonl", 1)],
    );
    vocab.model.vocab_size = 3;
    assert!(matches!(run_experiment(&vocab, None), Err(Error::Incompatible(_))));
}

#[test]
fn missing_stage_data_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    write_sets(dir.path());
    let p = plan(dir.path(), "x", InitSpec::Random, vec![stage("ind", "ind.jsonl", 1), stage("gone", "nope.jsonl", 1)]);
    assert!(run_experiment(&p, Some(&dir.path().join("out"))).is_err());
    assert!(!dir.path().join("out/ind").exists());
}

#[test]
fn early_stopping_keeps_best_dev_epoch() {
    let dir = tempfile::tempdir().unwrap();
    write_sets(dir.path());
    let mut s = stage("ind", "ind.jsonl", 30);
    s.train.learning_rate = 3e-3;
    // dev = external data, which in-domain training eventually stops helping
    s.early_stopping = Some(EarlyStopping { dev: "ext.jsonl".into(), patience: 1 });
    let out = run_experiment(&plan(dir.path(), "es", InitSpec::Random, vec![s]), None).unwrap();
    let rec = &out.manifest.stages[0];
    let best = rec.best_epoch.unwrap();
    let trace = &rec.dev_loss_trace;
    assert_eq!(trace.len(), rec.loss_trace.len());
    assert!(trace.len() < 30, "never stopped: {trace:?}");
    assert_eq!(trace.len(), best + 2);
    assert!(trace.iter().all(|&l| l >= trace[best - 1]));

    let mut fixed = stage("ind", "ind.jsonl", 30);
    fixed.train.learning_rate = 3e-3;
    let plain = plan(dir.path(), "plain", InitSpec::Random, vec![fixed]);
    let full = run_experiment(&plain, Some(&dir.path().join("plain"))).unwrap();
    let at_best = Checkpoint::load(&dir.path().join(format!("plain/ind/epoch{best}.ckpt"))).unwrap();
    assert_eq!(out.checkpoint.model, at_best.model);
    assert!(full.manifest.stages[0].best_epoch.is_none());
}
