use std::collections::HashMap;

use crate::error::{Error, Result};

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;

pub const BOS_STR: &str = "<s>";
pub const EOS_STR: &str = "</s>";
pub const UNK_STR: &str = "<unk>";

/// Closed LM vocabulary. Ids 0..3 are `<s>`, `</s>`, `<unk>`; the remaining
/// words follow in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmVocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl LmVocab {
    /// Builds the vocabulary from word frequencies; words seen fewer than
    /// `min_freq` times map to `<unk>`.
    pub fn from_frequencies(freqs: &HashMap<String, u64>, min_freq: u64) -> Self {
        let mut kept: Vec<&String> = freqs
            .iter()
            .filter(|(w, &c)| c >= min_freq && !is_special(w))
            .map(|(w, _)| w)
            .collect();
        kept.sort();
        Self::from_words(kept.into_iter().cloned())
    }

    pub(crate) fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut all = vec![BOS_STR.to_string(), EOS_STR.to_string(), UNK_STR.to_string()];
        all.extend(words);
        let index = all
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        LmVocab { words: all, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of predictable symbols: every entry except `<s>`.
    pub fn scorable_len(&self) -> usize {
        self.words.len() - 1
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Ids of every symbol that may be predicted.
    pub fn scorable_ids(&self) -> impl Iterator<Item = u32> {
        1..self.words.len() as u32
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

fn is_special(w: &str) -> bool {
    w == BOS_STR || w == EOS_STR || w == UNK_STR
}

/// Raw n-gram tallies of every length 1..=order over BOS/EOS padded sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramCounts {
    order: usize,
    vocab: LmVocab,
    // tables[m - 1] holds the m-grams.
    tables: Vec<HashMap<Vec<u32>, u64>>,
    sentences: u64,
}

impl NgramCounts {
    pub fn new(order: usize, vocab: LmVocab) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        Ok(NgramCounts {
            order,
            vocab,
            tables: vec![HashMap::new(); order],
            sentences: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &LmVocab {
        &self.vocab
    }

    pub fn sentences(&self) -> u64 {
        self.sentences
    }

    /// Counts of all n-grams of length `m`.
    pub fn table(&self, m: usize) -> &HashMap<Vec<u32>, u64> {
        &self.tables[m - 1]
    }

    pub fn get(&self, ngram: &[u32]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        self.tables[ngram.len() - 1]
            .get(ngram)
            .copied()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.sentences == 0
    }

    /// `order - 1` BOS markers, the token ids, then one EOS.
    pub fn pad(&self, ids: &[u32]) -> Vec<u32> {
        let mut padded = vec![BOS; self.order - 1];
        padded.extend_from_slice(ids);
        padded.push(EOS);
        padded
    }

    pub fn add_sentence<S: AsRef<str>>(&mut self, tokens: &[S]) {
        let ids = self.vocab.encode(tokens);
        let padded = self.pad(&ids);
        for m in 1..=self.order {
            let table = &mut self.tables[m - 1];
            for w in padded.windows(m) {
                *table.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
        self.sentences += 1;
    }
}

/// Two-pass counting: word frequencies fix the vocabulary, then every padded
/// n-gram is tallied.
pub fn count_ngrams<S: AsRef<[String]>>(
    corpus: &[S],
    order: usize,
    min_token_freq: u64,
) -> Result<NgramCounts> {
    if order < 1 {
        return Err(Error::invalid("n-gram order must be at least 1"));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut freqs: HashMap<String, u64> = HashMap::new();
    for sent in corpus {
        for tok in sent.as_ref() {
            *freqs.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    let vocab = LmVocab::from_frequencies(&freqs, min_token_freq);
    let mut counts = NgramCounts::new(order, vocab)?;
    for sent in corpus {
        counts.add_sentence(sent.as_ref());
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    #[test]
    fn bigram_counts_of_tiny_corpus() {
        let c = count_ngrams(&corpus(&["a b", "a c"]), 2, 1).unwrap();
        let v = c.vocab();
        let (a, b, cc) = (v.id("a"), v.id("b"), v.id("c"));
        let expected: HashMap<Vec<u32>, u64> = [
            (vec![BOS, a], 2),
            (vec![a, b], 1),
            (vec![a, cc], 1),
            (vec![b, EOS], 1),
            (vec![cc, EOS], 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(c.table(2), &expected);
    }

    #[test]
    fn unigram_counts_include_eos() {
        let c = count_ngrams(&corpus(&["a a a"]), 1, 1).unwrap();
        let a = c.vocab().id("a");
        let expected: HashMap<Vec<u32>, u64> = [(vec![a], 3), (vec![EOS], 1)].into_iter().collect();
        assert_eq!(c.table(1), &expected);
    }

    #[test]
    fn rare_tokens_become_unk() {
        let c = count_ngrams(&corpus(&["a b", "a c"]), 1, 2).unwrap();
        assert_eq!(c.vocab().id("b"), UNK);
        assert_eq!(c.get(&[UNK]), 2);
        assert_eq!(c.vocab().scorable_len(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            count_ngrams::<Vec<String>>(&[], 2, 1),
            Err(Error::EmptyCorpus)
        ));
        assert!(count_ngrams(&corpus(&["a"]), 0, 1).is_err());
    }

    #[test]
    fn prefix_counts_dominate() {
        let c = count_ngrams(&corpus(&["a b a b c", "b a", "c c c a"]), 4, 1).unwrap();
        for m in 2..=4 {
            for (g, &n) in c.table(m) {
                assert!(c.get(&g[..m - 1]) >= n);
                assert!(n > 0);
            }
        }
    }
}
