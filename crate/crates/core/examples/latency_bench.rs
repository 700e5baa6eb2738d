//! Batch-size-1 latency of 3-, 6- and 12-layer models of the same width.

use punct_restore::serve::{bench, Restorer};
use punct_restore::synthetic::{DeskScaleConfig, DeskScaleData};
use punct_restore::tagger::{Checkpoint, TaggerConfig, TaggerModel, Vocab};

fn main() -> punct_restore::Result<()> {
    let data = DeskScaleData::generate(&DeskScaleConfig::default());
    let lines: Vec<String> = data.lm_lines.iter().take(300).cloned().collect();
    let vocab = Vocab::build(data.train.iter().map(|s| s.tokens.as_slice()), 1);
    let deep = TaggerModel::new(TaggerConfig {
        vocab_size: vocab.len(),
        d_model: 64,
        n_heads: 4,
        n_layers: 12,
        ffn_dim: 256,
        ..Default::default()
    })?;
    for layers in [12, 6, 3] {
        let ckpt = Checkpoint::new(deep.truncate_layers(layers)?, vocab.clone())?;
        let stats = bench(&Restorer::new(ckpt), &lines, 20, "desk lm lines")?;
        println!(
            "{:>2} layers: mean {:.3} ms, median {:.3}, p95 {:.3}, max {:.3} over {}",
            layers, stats.mean_ms, stats.median_ms, stats.p95_ms, stats.max_ms, stats.count
        );
    }
    Ok(())
}
