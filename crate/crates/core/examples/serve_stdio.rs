//! Line-protocol serving. Trains a tiny model, then punctuates stdin:
//!
//! ```sh
//! echo "um okay okay let me check that for you" | cargo run --example serve_stdio
//! ```

use std::io;

use punct_restore::serve::{serve_stream, Restorer};
use punct_restore::synthetic::{DeskScaleConfig, DeskScaleData};
use punct_restore::tagger::{encode_dataset, train, Checkpoint, TaggerConfig, TaggerModel, TrainConfig, Vocab};
use punct_restore::text::Normalizer;

fn main() -> punct_restore::Result<()> {
    let data = DeskScaleData::generate(&DeskScaleConfig::default());
    let norm = Normalizer::default();
    let clean: Vec<_> = data.train.iter().map(|s| norm.clean_labeled(s)).collect::<Result<_, _>>()?;
    let vocab = Vocab::build(clean.iter().map(|s| s.tokens.as_slice()), 1);
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
    let trained = train(model, &encode_dataset(&clean, &vocab, 64), &cfg, |_, _| Ok(()))?;
    eprintln!("model ready; reading stdin");

    let restorer = Restorer::new(Checkpoint::new(trained.model, vocab)?);
    serve_stream(&restorer, io::stdin().lock(), io::stdout().lock())?;
    Ok(())
}
