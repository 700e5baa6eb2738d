use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::text::{LabeledSequence, PunctLabel};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "[PAD]";
pub const UNK_TOKEN: &str = "[UNK]";

/// Word-level vocabulary: `[PAD]`, `[UNK]`, then words in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn build<'a, I>(sequences: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for seq in sequences {
            for t in seq {
                *freq.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let words = freq
            .into_iter()
            .filter(|&(w, c)| c >= min_freq.max(1) && w != PAD_TOKEN && w != UNK_TOKEN)
            .map(|(w, _)| w.to_string());
        Self::from_words(words)
    }

    /// Builds a vocabulary from the full word list, specials included.
    pub fn from_list(words: Vec<String>) -> Result<Self> {
        if words.len() < 2 || words[0] != PAD_TOKEN || words[1] != UNK_TOKEN {
            return Err(Error::Format("vocabulary must start with [PAD], [UNK]".into()));
        }
        let index: HashMap<String, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        if index.len() != words.len() {
            return Err(Error::Format("duplicate vocabulary entry".into()));
        }
        Ok(Vocab { words, index })
    }

    fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(words);
        Self::from_list(all).expect("specials present, words unique")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

/// Padded id matrix plus key mask (`true` for real tokens).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
    pub batch_size: usize,
    pub seq_len: usize,
}

impl Batch {
    pub fn from_sequences<S: AsRef<[u32]>>(seqs: &[S]) -> Self {
        let seq_len = seqs.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
        let mut ids = Vec::with_capacity(seqs.len() * seq_len);
        let mut mask = Vec::with_capacity(seqs.len() * seq_len);
        for s in seqs {
            let s = s.as_ref();
            ids.extend_from_slice(s);
            mask.extend(std::iter::repeat_n(true, s.len()));
            ids.extend(std::iter::repeat_n(PAD_ID, seq_len - s.len()));
            mask.extend(std::iter::repeat_n(false, seq_len - s.len()));
        }
        Batch {
            ids,
            mask,
            batch_size: seqs.len(),
            seq_len,
        }
    }

    pub fn row(&self, b: usize) -> (&[u32], &[bool]) {
        let r = b * self.seq_len..(b + 1) * self.seq_len;
        (&self.ids[r.clone()], &self.mask[r])
    }
}

/// Token ids with label indices, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub ids: Vec<u32>,
    pub labels: Vec<u8>,
}

/// Encodes labeled sequences, splitting any longer than `max_len` into
/// consecutive pieces.
pub fn encode_dataset(data: &[LabeledSequence], vocab: &Vocab, max_len: usize) -> Vec<EncodedExample> {
    let mut out = Vec::with_capacity(data.len());
    for seq in data {
        let ids = vocab.encode(&seq.tokens);
        let labels: Vec<u8> = seq.labels.iter().map(|l| l.index() as u8).collect();
        for (i, l) in ids.chunks(max_len).zip(labels.chunks(max_len)) {
            out.push(EncodedExample {
                ids: i.to_vec(),
                labels: l.to_vec(),
            });
        }
    }
    out
}

/// Batch, flat labels and label mask for a group of examples.
pub fn collate(examples: &[&EncodedExample]) -> (Batch, Vec<u8>, Vec<bool>) {
    let ids: Vec<&[u32]> = examples.iter().map(|e| e.ids.as_slice()).collect();
    let batch = Batch::from_sequences(&ids);
    let mut labels = vec![PunctLabel::None.index() as u8; batch.ids.len()];
    for (b, e) in examples.iter().enumerate() {
        labels[b * batch.seq_len..b * batch.seq_len + e.labels.len()].copy_from_slice(&e.labels);
    }
    let mask = batch.mask.clone();
    (batch, labels, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    #[test]
    fn vocab_is_sorted_and_handles_unknowns() {
        let a = tokenize("b a c a");
        let v = Vocab::build([a.as_slice()], 1);
        assert_eq!(v.words(), &["[PAD]", "[UNK]", "a", "b", "c"]);
        assert_eq!(v.id("zzz"), UNK_ID);
        let v2 = Vocab::build([a.as_slice()], 2);
        assert_eq!(v2.len(), 3);
    }

    #[test]
    fn batch_padding() {
        let b = Batch::from_sequences(&[vec![5, 6, 7], vec![8]]);
        assert_eq!(b.seq_len, 3);
        assert_eq!(b.ids, vec![5, 6, 7, 8, 0, 0]);
        assert_eq!(b.mask, vec![true, true, true, true, false, false]);
    }

    #[test]
    fn long_sequences_are_split() {
        let v = Vocab::build([tokenize("a b c d e").as_slice()], 1);
        let seq = LabeledSequence::unlabeled(tokenize("a b c d e"));
        let enc = encode_dataset(&[seq], &v, 2);
        assert_eq!(enc.len(), 3);
        assert_eq!(enc[2].ids.len(), 1);
    }
}
