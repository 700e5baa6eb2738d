//! Per-token prediction with overlapping windows for long inputs.
//!
//! Windows are `max_seq_len` wide and start every `max_seq_len / 2` tokens;
//! the last one is aligned to the end of the input. Each token takes its
//! label from the window in which it sits furthest from either edge, the
//! earliest such window on ties.

use super::data::{Batch, Vocab};
use super::math::Real;
use super::model::{argmax_labels, TaggerModel, NUM_LABELS};
use crate::error::Result;
use crate::text::PunctLabel;

/// Window start offsets covering `len` tokens.
pub fn window_starts(len: usize, width: usize) -> Vec<usize> {
    if len <= width {
        return vec![0];
    }
    let stride = (width / 2).max(1);
    let mut starts: Vec<usize> = (0..).map(|i| i * stride).take_while(|&s| s + width < len).collect();
    starts.push(len - width);
    starts.dedup();
    starts
}

/// For each position, the index into `starts` of the window it is read from.
pub fn assign_windows(len: usize, width: usize, starts: &[usize]) -> Vec<usize> {
    (0..len)
        .map(|p| {
            let mut best = 0;
            let mut best_margin = None;
            for (w, &s) in starts.iter().enumerate() {
                if p < s || p >= s + width {
                    continue;
                }
                let margin = (p - s).min(s + width - 1 - p);
                if best_margin.is_none_or(|m| margin > m) {
                    best = w;
                    best_margin = Some(margin);
                }
            }
            best
        })
        .collect()
}

/// Logits (`len x 4`) for a single sequence of any length.
pub fn predict_logits<F: Real>(model: &TaggerModel<F>, ids: &[u32]) -> Result<Vec<F>> {
    let width = model.config.max_seq_len;
    if ids.len() <= width {
        return model.forward(&Batch::from_sequences(&[ids]));
    }
    let starts = window_starts(ids.len(), width);
    let owner = assign_windows(ids.len(), width, &starts);
    let mut out = vec![F::zero(); ids.len() * NUM_LABELS];
    for (w, &s) in starts.iter().enumerate() {
        let logits = model.forward(&Batch::from_sequences(&[&ids[s..s + width]]))?;
        for (p, _) in owner.iter().enumerate().filter(|&(_, &o)| o == w) {
            let local = p - s;
            out[p * NUM_LABELS..(p + 1) * NUM_LABELS]
                .copy_from_slice(&logits[local * NUM_LABELS..(local + 1) * NUM_LABELS]);
        }
    }
    Ok(out)
}

pub fn predict_ids<F: Real>(model: &TaggerModel<F>, ids: &[u32]) -> Result<Vec<PunctLabel>> {
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    Ok(argmax_labels(&predict_logits(model, ids)?))
}

/// One label per token; unknown words map to the unknown id.
pub fn predict<F: Real, S: AsRef<str>>(
    model: &TaggerModel<F>,
    vocab: &Vocab,
    tokens: &[S],
) -> Result<Vec<PunctLabel>> {
    predict_ids(model, &vocab.encode(tokens))
}
