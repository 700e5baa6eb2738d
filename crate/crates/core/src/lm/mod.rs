//! Order-n language model over whitespace tokens.
//!
//! Sentences are padded with `order - 1` `<s>` markers and one `</s>`; the
//! `</s>` event is scored, so perplexity divides by `N + 1`. Words below the
//! frequency threshold map to `<unk>`, which keeps every held-out utterance
//! scorable under Kneser-Ney.

mod counts;
mod io;
mod model;

pub use counts::{count_ngrams, LmVocab, NgramCounts, BOS, BOS_STR, EOS, EOS_STR, UNK, UNK_STR};
pub use io::FORMAT_VERSION;
pub use model::{train_lm, LanguageModel, Smoothing, DEFAULT_DISCOUNT};

use std::path::Path;

use crate::error::Result;
use crate::text::extract_labels;

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_MIN_FREQ: u64 = 2;

/// Lowercased, punctuation-free tokens of a raw line; `None` when the line has
/// no words. This is the same normalization applied when building datasets.
pub fn lm_tokens(line: &str) -> Option<Vec<String>> {
    extract_labels(line).ok().map(|s| s.tokens)
}

/// Reads a one-utterance-per-line corpus, skipping lines without words.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(crate::io::read_lines(path)?
        .iter()
        .filter_map(|l| lm_tokens(l))
        .collect())
}

pub fn train_from_lines<S: AsRef<str>>(
    lines: &[S],
    order: usize,
    min_freq: u64,
    smoothing: Smoothing,
) -> Result<LanguageModel> {
    let corpus: Vec<Vec<String>> = lines.iter().filter_map(|l| lm_tokens(l.as_ref())).collect();
    train_lm(&count_ngrams(&corpus, order, min_freq)?, smoothing)
}

impl LanguageModel {
    /// Perplexity of a raw line after normalization; `None` for lines without words.
    pub fn line_perplexity(&self, line: &str) -> Option<f64> {
        let toks = lm_tokens(line)?;
        self.perplexity(&toks).ok()
    }
}
