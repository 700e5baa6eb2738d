//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use punct_restore::eval::ClassCounts;
use punct_restore::sampler::ScoredUtterance;
use punct_restore::text::PunctLabel;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Interpolated Kneser-Ney computed straight from tallies of padded windows,
/// by recursion over the context, in string space.
pub struct KnOracle {
    pub order: usize,
    pub d: f64,
    pub words: BTreeSet<String>,
    counts: HashMap<Vec<String>, u64>,
    // context -> (sum of effective counts, number of distinct followers)
    totals: RefCell<HashMap<Vec<String>, (u64, u64)>>,
}

impl KnOracle {
    pub fn new(corpus: &[Vec<String>], order: usize, min_freq: u64, d: f64) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for s in corpus {
            for t in s {
                *freq.entry(t).or_default() += 1;
            }
        }
        let mut words: BTreeSet<String> = freq
            .iter()
            .filter(|(_, &c)| c >= min_freq)
            .map(|(w, _)| w.to_string())
            .collect();
        words.insert(EOS.into());
        words.insert(UNK.into());
        let mut counts = HashMap::new();
        for s in corpus {
            let padded = Self::pad_with(&words, order, s);
            for n in 1..=order {
                for i in 0..=padded.len() - n {
                    *counts.entry(padded[i..i + n].to_vec()).or_default() += 1;
                }
            }
        }
        KnOracle {
            order,
            d,
            words,
            counts,
            totals: RefCell::default(),
        }
    }

    fn pad_with(words: &BTreeSet<String>, order: usize, s: &[String]) -> Vec<String> {
        let mut p = vec![BOS.to_string(); order - 1];
        for t in s {
            p.push(if words.contains(t) { t.clone() } else { UNK.into() });
        }
        p.push(EOS.into());
        p
    }

    pub fn pad(&self, s: &[String]) -> Vec<String> {
        Self::pad_with(&self.words, self.order, s)
    }

    /// Everything that can be predicted: words, `<unk>`, `</s>`.
    pub fn scorable(&self) -> Vec<String> {
        self.words.iter().cloned().collect()
    }

    fn count(&self, g: &[String]) -> u64 {
        self.counts.get(g).copied().unwrap_or(0)
    }

    // c(h w) at the top order, N1+(. h w) below it
    fn eff(&self, h: &[String], w: &str) -> u64 {
        let mut g = h.to_vec();
        g.push(w.to_string());
        if g.len() == self.order {
            return self.count(&g);
        }
        let mut n = 0;
        for v in self.words.iter().chain([&BOS.to_string()]) {
            let mut vg = vec![v.clone()];
            vg.extend(g.iter().cloned());
            if self.count(&vg) > 0 {
                n += 1;
            }
        }
        n
    }

    fn totals(&self, h: &[String]) -> (u64, u64) {
        if let Some(&t) = self.totals.borrow().get(h) {
            return t;
        }
        let eff: Vec<u64> = self.words.iter().map(|v| self.eff(h, v)).collect();
        let t = (eff.iter().sum(), eff.iter().filter(|&&c| c > 0).count() as u64);
        self.totals.borrow_mut().insert(h.to_vec(), t);
        t
    }

    /// p(w | h) with h of length at most order - 1.
    pub fn prob(&self, h: &[String], w: &str) -> f64 {
        let lower = if h.is_empty() {
            1.0 / self.words.len() as f64
        } else {
            self.prob(&h[1..], w)
        };
        let (total, types) = self.totals(h);
        if total == 0 {
            return lower;
        }
        let c = self.eff(h, w) as f64;
        ((c - self.d).max(0.0) + self.d * types as f64 * lower) / total as f64
    }

    /// Perplexity as the inverse geometric mean of per-step probabilities,
    /// `</s>` included.
    pub fn perplexity(&self, s: &[String]) -> f64 {
        let p = self.pad(s);
        let h = self.order - 1;
        let mut log = 0.0;
        for i in h..p.len() {
            log += self.prob(&p[i - h..i], &p[i]).ln();
        }
        (-log / (s.len() + 1) as f64).exp()
    }
}

/// Full sort by (perplexity, source index), then truncate.
pub fn top_k_by_sort(mut all: Vec<ScoredUtterance>, k: usize) -> Vec<ScoredUtterance> {
    all.sort_by(|a, b| {
        a.perplexity
            .total_cmp(&b.perplexity)
            .then(a.source_index.cmp(&b.source_index))
    });
    all.truncate(k);
    all
}

/// Repeatedly deletes the second copy of the leftmost, then longest, adjacent
/// repeated span, restarting from the left each time.
pub fn collapse_repeats(mut t: Vec<String>, max_span: usize) -> Vec<String> {
    'outer: loop {
        for i in 0..t.len() {
            for s in (1..=max_span).rev() {
                if i + 2 * s <= t.len() && t[i..i + s] == t[i + s..i + 2 * s] {
                    t.drain(i + s..i + 2 * s);
                    continue 'outer;
                }
            }
        }
        return t;
    }
}

pub fn has_adjacent_repeat(t: &[String], max_span: usize) -> bool {
    (1..=max_span).any(|s| t.windows(2 * s).any(|w| w[..s] == w[s..]))
}

/// Per-class counts by scanning each class separately.
pub fn naive_counts(pred: &[PunctLabel], gold: &[PunctLabel], class: PunctLabel) -> ClassCounts {
    let mut c = ClassCounts::default();
    for i in 0..pred.len() {
        let (p, g) = (pred[i] == class, gold[i] == class);
        if p && g {
            c.tp += 1;
        }
        if p && !g {
            c.fp += 1;
        }
        if g && !p {
            c.fn_ += 1;
        }
    }
    c
}

pub fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 * 100.0 / den as f64
    }
}
