//! Perplexity-ranked selection of external utterances.
//!
//! Each line of the external corpus is scored by a language model trained on
//! the target domain; the `k` lines with the lowest perplexity are kept. The
//! selection holds at most `k` records in a max-heap, so memory is bounded by
//! `k` plus one scoring chunk regardless of corpus size.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::LanguageModel;

pub const DEFAULT_K: usize = 4_800_000;
pub const DEFAULT_CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub source_index: u64,
    pub perplexity: f64,
    pub text: String,
}

impl ScoredUtterance {
    /// Ascending perplexity, then ascending source index.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.perplexity
            .total_cmp(&other.perplexity)
            .then(self.source_index.cmp(&other.source_index))
    }

    /// `<perplexity:%.6f>\t<source_index>\t<text>`
    pub fn to_tsv(&self) -> String {
        format!("{:.6}\t{}\t{}", self.perplexity, self.source_index, self.text)
    }
}

/// Lazily scores lines in order. Lines without any word are skipped and
/// counted, never scored.
pub struct CorpusScorer<'m, I> {
    lm: &'m LanguageModel,
    lines: I,
    next_index: u64,
    skipped: u64,
}

pub fn score_corpus<I, S>(lm: &LanguageModel, lines: I) -> CorpusScorer<'_, I::IntoIter>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    CorpusScorer {
        lm,
        lines: lines.into_iter(),
        next_index: 0,
        skipped: 0,
    }
}

impl<I> CorpusScorer<'_, I> {
    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

impl<I, S> Iterator for CorpusScorer<'_, I>
where
    I: Iterator<Item = S>,
    S: Into<String>,
{
    type Item = ScoredUtterance;

    fn next(&mut self) -> Option<ScoredUtterance> {
        loop {
            let text: String = self.lines.next()?.into();
            let source_index = self.next_index;
            self.next_index += 1;
            match self.lm.line_perplexity(&text) {
                Some(perplexity) => {
                    return Some(ScoredUtterance {
                        source_index,
                        perplexity,
                        text,
                    })
                }
                None => self.skipped += 1,
            }
        }
    }
}

struct Ranked(ScoredUtterance);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

/// Bounded selector for the `k` best-ranked records.
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Ranked>,
    peak: usize,
}

impl TopK {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(TopK {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 20)),
            peak: 0,
        })
    }

    pub fn push(&mut self, rec: ScoredUtterance) {
        if self.heap.len() < self.k {
            self.heap.push(Ranked(rec));
            self.peak = self.peak.max(self.heap.len());
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if rec.rank_cmp(&worst.0) == Ordering::Less {
                *worst = Ranked(rec);
            }
        }
    }

    /// Folds another selector's records into this one.
    pub fn merge(&mut self, other: TopK) {
        for r in other.heap.into_vec() {
            self.push(r.0);
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Largest number of records held at once.
    pub fn peak_len(&self) -> usize {
        self.peak
    }

    pub fn into_sorted_vec(self) -> Vec<ScoredUtterance> {
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }
}

/// The `k` lowest-perplexity records, sorted ascending with ties broken by
/// smaller source index.
pub fn select_top_k<I>(scored: I, k: usize) -> Result<Vec<ScoredUtterance>>
where
    I: IntoIterator<Item = ScoredUtterance>,
{
    let mut top = TopK::new(k)?;
    for rec in scored {
        top.push(rec);
    }
    Ok(top.into_sorted_vec())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOptions {
    pub k: usize,
    /// Records above this perplexity are never selected.
    pub max_ppl: Option<f64>,
    /// Drop exact repeats of an already-seen normalized utterance.
    pub dedup: bool,
    /// Lines scored in parallel per chunk.
    pub chunk_size: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            k: DEFAULT_K,
            max_ppl: None,
            dedup: false,
            chunk_size: DEFAULT_CHUNK,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SampleReport {
    pub lines_read: u64,
    pub scored: u64,
    pub skipped_empty: u64,
    pub above_threshold: u64,
    pub duplicates: u64,
    /// Peak of heap size plus buffered chunk size.
    pub peak_retained: usize,
}

/// Streams `reader`, scoring chunks in parallel and merging them into one
/// bounded selector in source order; output is identical for any thread count.
/// `on_scored` sees every scored record in source order.
pub fn sample_stream<R, F>(
    lm: &LanguageModel,
    reader: R,
    opts: &SampleOptions,
    mut on_scored: F,
) -> Result<(Vec<ScoredUtterance>, SampleReport)>
where
    R: BufRead,
    F: FnMut(&ScoredUtterance) -> Result<()>,
{
    let mut top = TopK::new(opts.k)?;
    let chunk_size = opts.chunk_size.max(1);
    let mut report = SampleReport::default();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut lines = reader.lines();
    let mut chunk: Vec<(u64, String)> = Vec::with_capacity(chunk_size);
    loop {
        chunk.clear();
        for line in lines.by_ref().take(chunk_size) {
            chunk.push((report.lines_read, line?));
            report.lines_read += 1;
        }
        if chunk.is_empty() {
            break;
        }
        let scores: Vec<Option<(f64, u64)>> = chunk
            .par_iter()
            .map(|(_, text)| {
                let toks = crate::lm::lm_tokens(text)?;
                let ppl = lm.perplexity(&toks).ok()?;
                let mut h = DefaultHasher::new();
                toks.hash(&mut h);
                Some((ppl, h.finish()))
            })
            .collect();
        report.peak_retained = report.peak_retained.max(top.len() + chunk.len());
        for ((idx, text), score) in chunk.drain(..).zip(scores) {
            let Some((perplexity, key)) = score else {
                report.skipped_empty += 1;
                continue;
            };
            report.scored += 1;
            let rec = ScoredUtterance {
                source_index: idx,
                perplexity,
                text,
            };
            on_scored(&rec)?;
            if opts.max_ppl.is_some_and(|m| perplexity > m) {
                report.above_threshold += 1;
                continue;
            }
            if opts.dedup && !seen.insert(key) {
                report.duplicates += 1;
                continue;
            }
            top.push(rec);
        }
    }
    report.peak_retained = report.peak_retained.max(top.peak_len());
    Ok((top.into_sorted_vec(), report))
}

/// Writes the selected texts (one per line) in rank order.
pub fn write_selected<W: Write>(mut out: W, selected: &[ScoredUtterance]) -> Result<()> {
    for rec in selected {
        writeln!(out, "{}", rec.text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{count_ngrams, train_lm, Smoothing};
    use crate::text::tokenize;

    fn rec(i: u64, p: f64) -> ScoredUtterance {
        ScoredUtterance {
            source_index: i,
            perplexity: p,
            text: format!("line {i}"),
        }
    }

    fn indices(v: &[ScoredUtterance]) -> Vec<u64> {
        v.iter().map(|r| r.source_index).collect()
    }

    #[test]
    fn picks_lowest_two() {
        let s = vec![rec(0, 5.0), rec(1, 2.0), rec(2, 9.0)];
        assert_eq!(indices(&select_top_k(s, 2).unwrap()), vec![1, 0]);
    }

    #[test]
    fn k_larger_than_input_returns_all_sorted() {
        let s = vec![rec(0, 5.0), rec(1, 2.0), rec(2, 9.0)];
        assert_eq!(indices(&select_top_k(s, 10).unwrap()), vec![1, 0, 2]);
    }

    #[test]
    fn ties_break_on_source_index() {
        let s = vec![rec(4, 1.0), rec(2, 1.0), rec(3, 1.0), rec(1, 3.0)];
        assert_eq!(indices(&select_top_k(s, 2).unwrap()), vec![2, 3]);
    }

    #[test]
    fn zero_k_rejected() {
        assert!(select_top_k(vec![rec(0, 1.0)], 0).is_err());
    }

    #[test]
    fn merge_matches_single_pass() {
        let all: Vec<_> = (0..50).map(|i| rec(i, ((i * 37) % 11) as f64)).collect();
        let mut a = TopK::new(7).unwrap();
        let mut b = TopK::new(7).unwrap();
        for r in all.iter().cloned() {
            if r.source_index % 2 == 0 {
                a.push(r)
            } else {
                b.push(r)
            }
        }
        a.merge(b);
        assert_eq!(a.into_sorted_vec(), select_top_k(all, 7).unwrap());
    }

    fn ml_model() -> LanguageModel {
        let corpus: Vec<Vec<String>> = vec![tokenize("thank you for calling"); 5];
        train_lm(&count_ngrams(&corpus, 3, 1).unwrap(), Smoothing::MaximumLikelihood).unwrap()
    }

    #[test]
    fn scorer_preserves_order_and_skips_empty_lines() {
        let lm = ml_model();
        let lines = vec!["Thank you for calling.", "", " ... ", "thank you"];
        let mut scorer = score_corpus(&lm, lines);
        let out: Vec<_> = scorer.by_ref().collect();
        assert_eq!(indices(&out), vec![0, 3]);
        assert_eq!(out[0].perplexity, 1.0);
        assert_eq!(out[0].text, "Thank you for calling.");
        assert_eq!(scorer.skipped(), 2);
    }

    #[test]
    fn stream_sampling_threshold_and_dedup() {
        let corpus: Vec<Vec<String>> = ["a b c", "a b d", "b c a"].iter().map(|l| tokenize(l)).collect();
        let lm = train_lm(&count_ngrams(&corpus, 2, 1).unwrap(), Smoothing::default()).unwrap();
        let text = "a b c\nA b c!\n\nz z z z\nb c a\n";
        let opts = SampleOptions {
            k: 10,
            max_ppl: Some(50.0),
            dedup: true,
            chunk_size: 2,
        };
        let mut all = Vec::new();
        let (sel, report) = sample_stream(&lm, text.as_bytes(), &opts, |r| {
            all.push(r.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(report.lines_read, 5);
        assert_eq!(report.scored, 4);
        assert_eq!(report.skipped_empty, 1);
        assert_eq!(report.duplicates, 1);
        assert_eq!(all.len(), 4);
        assert!(sel.iter().all(|r| r.perplexity <= 50.0));
        assert_eq!(sel.len() as u64, 4 - report.duplicates - report.above_threshold);
        assert!(report.peak_retained <= opts.k + opts.chunk_size);
    }

    #[test]
    fn tsv_format() {
        assert_eq!(rec(3, 2.5).to_tsv(), "2.500000\t3\tline 3");
    }
}
