//! Keep the bottom layers of a deeper model: the truncated model reproduces
//! the source's intermediate activations exactly and runs faster.

use std::time::Instant;

use punct_restore::tagger::{Batch, TaggerConfig, TaggerModel};

fn main() -> punct_restore::Result<()> {
    let deep = TaggerModel::<f32>::new(TaggerConfig {
        vocab_size: 500,
        d_model: 64,
        n_heads: 4,
        n_layers: 12,
        ffn_dim: 256,
        ..Default::default()
    })?;
    let batch = Batch::from_sequences(&[(1..40).collect::<Vec<u32>>()]);
    let deep_states = deep.hidden_states(&batch)?;

    for k in [6, 3] {
        let shallow = deep.truncate_layers(k)?;
        let states = shallow.hidden_states(&batch)?;
        let max_diff = states[k]
            .iter()
            .zip(&deep_states[k])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);

        let start = Instant::now();
        for _ in 0..50 {
            shallow.forward(&batch)?;
        }
        let ms = start.elapsed().as_secs_f64() * 1e3 / 50.0;
        println!("{k:>2} layers: {:>8} params, {ms:.3} ms/forward, layer-{k} max diff {max_diff}", shallow.num_params());
    }
    Ok(())
}
