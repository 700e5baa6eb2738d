//! Train a small tagger from scratch and punctuate a few unseen utterances.

use punct_restore::synthetic::{DeskScaleConfig, DeskScaleData};
use punct_restore::tagger::{
    encode_dataset, predict, train, Checkpoint, TaggerConfig, TaggerModel, TrainConfig, Vocab,
};
use punct_restore::text::{apply_labels, LabeledSequence, Normalizer};

fn main() -> punct_restore::Result<()> {
    let data = DeskScaleData::generate(&DeskScaleConfig {
        train_utterances: 400,
        test_utterances: 5,
        ..Default::default()
    });
    let norm = Normalizer::default();
    let train_set: Vec<LabeledSequence> = data
        .train
        .iter()
        .map(|s| norm.clean_labeled(s))
        .collect::<Result<_, _>>()?;

    let vocab = Vocab::build(train_set.iter().map(|s| s.tokens.as_slice()), 1);
    let model = TaggerModel::new(TaggerConfig {
        vocab_size: vocab.len(),
        d_model: 32,
        n_heads: 4,
        n_layers: 2,
        ffn_dim: 64,
        max_seq_len: 64,
        ..Default::default()
    })?;
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        epochs: 6,
        ..Default::default()
    };
    let examples = encode_dataset(&train_set, &vocab, 64);
    let out = train(model, &examples, &cfg, |r, _| {
        println!("epoch {} loss {:.4}", r.epoch, r.mean_loss);
        Ok(())
    })?;

    for gold in &data.test {
        let gold = norm.clean_labeled(gold)?;
        let labels = predict(&out.model, &vocab, &gold.tokens)?;
        let pred = LabeledSequence::new(gold.tokens.clone(), labels)?;
        println!("gold: {}\npred: {}\n", apply_labels(&gold), apply_labels(&pred));
    }

    let path = std::env::temp_dir().join("tagger.ckpt");
    let ckpt = Checkpoint::new(out.model, vocab)?;
    ckpt.save(&path)?;
    println!("saved {} (sha256 {})", path.display(), &ckpt.checksum()[..16]);
    Ok(())
}
