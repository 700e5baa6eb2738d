//! Insertion-only disfluency noise for building ASR-like training data from
//! clean punctuated text.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{LabeledSequence, PunctLabel, DEFAULT_FILLERS};

pub use crate::text::strip_punctuation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Chance of a filler before each token.
    pub filler_prob: f64,
    /// Chance, per token, of repeating the span of one or two tokens ending there.
    pub repeat_prob: f64,
    pub seed: u64,
    pub filler_lexicon: Vec<String>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            filler_prob: 0.1,
            repeat_prob: 0.05,
            seed: 7,
            filler_lexicon: DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("filler_prob", self.filler_prob), ("repeat_prob", self.repeat_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.filler_prob > 0.0 && self.filler_lexicon.is_empty() {
            return Err(Error::invalid("filler lexicon is empty"));
        }
        Ok(())
    }

    /// Config for the utterance at `index`, seeded with `seed ^ index`.
    pub fn for_utterance(&self, index: u64) -> NoiseConfig {
        NoiseConfig {
            seed: self.seed ^ index,
            ..self.clone()
        }
    }
}

/// Inserts fillers (labeled `NONE`) and duplicated spans. In a duplicated
/// span the earlier copy is relabeled `NONE` and the final copy keeps the
/// original labels, so gold punctuation stays well defined.
pub fn inject_noise(seq: &LabeledSequence, cfg: &NoiseConfig) -> Result<LabeledSequence> {
    cfg.validate()?;
    seq.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = LabeledSequence::unlabeled(Vec::with_capacity(seq.len() * 2));
    for (i, (tok, &label)) in seq.tokens.iter().zip(&seq.labels).enumerate() {
        let filler = rng.random::<f64>() < cfg.filler_prob;
        if filler {
            let f = cfg
                .filler_lexicon
                .choose(&mut rng)
                .expect("validated non-empty");
            out.tokens.push(f.clone());
            out.labels.push(PunctLabel::None);
        }
        out.tokens.push(tok.clone());
        out.labels.push(label);

        if rng.random::<f64>() < cfg.repeat_prob {
            let two = rng.random_bool(0.5);
            let span = if two && i >= 1 && !filler { 2 } else { 1 };
            let n = out.len();
            for l in &mut out.labels[n - span..] {
                *l = PunctLabel::None;
            }
            for j in i + 1 - span..=i {
                out.tokens.push(seq.tokens[j].clone());
                out.labels.push(seq.labels[j]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{apply_labels, extract_labels, tokenize};

    #[test]
    fn zero_noise_is_identity() {
        let seq = extract_labels("well, thank you for coming down.").unwrap();
        let cfg = NoiseConfig {
            filler_prob: 0.0,
            repeat_prob: 0.0,
            ..Default::default()
        };
        assert_eq!(inject_noise(&seq, &cfg).unwrap(), seq);
    }

    #[test]
    fn forced_filler_before_single_token() {
        let seq = extract_labels("ok.").unwrap();
        let cfg = NoiseConfig {
            filler_prob: 1.0,
            repeat_prob: 0.0,
            seed: 3,
            filler_lexicon: vec!["um".into()],
        };
        let out = inject_noise(&seq, &cfg).unwrap();
        assert_eq!(out.tokens, tokenize("um ok"));
        assert_eq!(out.labels, vec![PunctLabel::None, PunctLabel::Period]);
    }

    #[test]
    fn forced_repetition_keeps_labels_on_last_copy() {
        let seq = extract_labels("yes, fine.").unwrap();
        let cfg = NoiseConfig {
            filler_prob: 0.0,
            repeat_prob: 1.0,
            seed: 11,
            ..Default::default()
        };
        let out = inject_noise(&seq, &cfg).unwrap();
        let rendered = apply_labels(&out);
        assert!(rendered.ends_with("fine."), "{rendered}");
        let marks = out.labels.iter().filter(|l| !l.is_none()).count();
        assert_eq!(marks, 2);
    }

    #[test]
    fn same_seed_same_output() {
        let seq = extract_labels("so we can do that on friday, right?").unwrap();
        let cfg = NoiseConfig {
            filler_prob: 0.4,
            repeat_prob: 0.3,
            ..Default::default()
        };
        assert_eq!(inject_noise(&seq, &cfg).unwrap(), inject_noise(&seq, &cfg).unwrap());
        let other = inject_noise(&seq, &cfg.for_utterance(1)).unwrap();
        assert_eq!(other, inject_noise(&seq, &cfg.for_utterance(1)).unwrap());
    }

    #[test]
    fn probabilities_validated() {
        let seq = extract_labels("ok").unwrap();
        let cfg = NoiseConfig {
            filler_prob: 1.5,
            ..Default::default()
        };
        assert!(inject_noise(&seq, &cfg).is_err());
    }
}
