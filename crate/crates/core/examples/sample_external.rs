//! Perplexity-based selection: keep the external utterances that look most
//! like the target domain.

use std::io::Cursor;

use punct_restore::lm::{train_from_lines, Smoothing};
use punct_restore::sampler::{sample_stream, SampleOptions};
use punct_restore::synthetic::{DeskScaleConfig, DeskScaleData};

fn main() -> punct_restore::Result<()> {
    let data = DeskScaleData::generate(&DeskScaleConfig {
        external_similar: 300,
        external_dissimilar: 900,
        ..Default::default()
    });
    let lm = train_from_lines(&data.lm_lines, 3, 1, Smoothing::default())?;

    let pool: String = data.external.iter().map(|e| format!("{}\n", e.text)).collect();
    let opts = SampleOptions {
        k: 200,
        chunk_size: 256,
        ..Default::default()
    };
    let (picked, report) = sample_stream(&lm, Cursor::new(pool), &opts, |_| Ok(()))?;

    let similar = picked
        .iter()
        .filter(|p| data.external[p.source_index as usize].similar)
        .count();
    println!("scored {} lines, kept {}", report.scored, picked.len());
    println!("{similar} of {} picks come from the conversational subset", picked.len());
    println!("peak records held in memory: {}", report.peak_retained);
    for p in picked.iter().take(5) {
        println!("{}", p.to_tsv());
    }
    Ok(())
}
