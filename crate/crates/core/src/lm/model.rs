use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::counts::{LmVocab, NgramCounts, BOS, EOS};
use crate::error::{Error, Result};

pub const DEFAULT_DISCOUNT: f64 = 0.75;

/// How conditional distributions are estimated from counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    /// Interpolated Kneser-Ney with one fixed discount for every order.
    KneserNey { discount: f64 },
    /// Relative frequencies; unseen events get probability zero.
    MaximumLikelihood,
    /// Every scorable symbol equally likely regardless of context.
    Uniform,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::KneserNey {
            discount: DEFAULT_DISCOUNT,
        }
    }
}

impl Smoothing {
    pub(crate) fn validate(&self) -> Result<()> {
        if let Smoothing::KneserNey { discount } = *self {
            if !(discount > 0.0 && discount < 1.0) {
                return Err(Error::invalid(format!(
                    "discount must lie in (0, 1), got {discount}"
                )));
            }
        }
        Ok(())
    }
}

/// Backoff-form n-gram model.
///
/// `log_probs[m - 1]` stores `ln p(w | h)` for every m-gram `h w` observed at
/// that order; `log_backoffs[l - 1]` stores the log interpolation weight of
/// every observed context of length `l`. A lookup for an unseen `h w` adds the
/// context's backoff weight and retries with `h` shortened by one word. For
/// interpolated Kneser-Ney this reproduces the interpolated distribution
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    pub(crate) order: usize,
    pub(crate) vocab: LmVocab,
    pub(crate) smoothing: Smoothing,
    pub(crate) log_probs: Vec<HashMap<Vec<u32>, f64>>,
    pub(crate) log_backoffs: Vec<HashMap<Vec<u32>, f64>>,
}

impl LanguageModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &LmVocab {
        &self.vocab
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    /// `ln p(word | context)` where `context` holds at most `order - 1` ids;
    /// longer contexts are cut to their last `order - 1` ids.
    pub fn log_prob(&self, context: &[u32], word: u32) -> f64 {
        let ctx = &context[context.len().saturating_sub(self.order - 1)..];
        let mut acc = 0.0;
        let mut key = Vec::with_capacity(ctx.len() + 1);
        for start in 0..=ctx.len() {
            let h = &ctx[start..];
            key.clear();
            key.extend_from_slice(h);
            key.push(word);
            if let Some(lp) = self.log_probs[h.len()].get(&key) {
                return acc + lp;
            }
            if !h.is_empty() {
                if let Some(b) = self.log_backoffs[h.len() - 1].get(h) {
                    acc += b;
                }
            }
        }
        f64::NEG_INFINITY
    }

    pub fn prob(&self, context: &[u32], word: u32) -> f64 {
        self.log_prob(context, word).exp()
    }

    /// Natural-log probability of the ids followed by EOS, conditioning on
    /// `order - 1` leading BOS markers.
    pub fn ids_log_prob(&self, ids: &[u32]) -> f64 {
        let mut padded = vec![BOS; self.order - 1];
        padded.extend_from_slice(ids);
        padded.push(EOS);
        let h = self.order - 1;
        (h..padded.len())
            .map(|i| self.log_prob(&padded[i - h..i], padded[i]))
            .sum()
    }

    pub fn sequence_log_prob<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot score an empty token sequence"));
        }
        Ok(self.ids_log_prob(&self.vocab.encode(tokens)))
    }

    /// `exp(-log_prob / (N + 1))`; the EOS event counts as one prediction.
    pub fn perplexity<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        let lp = self.sequence_log_prob(tokens)?;
        Ok((-lp / (tokens.len() + 1) as f64).exp())
    }

    /// Number of stored conditional probabilities across all orders.
    pub fn num_entries(&self) -> usize {
        self.log_probs.iter().map(HashMap::len).sum()
    }
}

pub fn train_lm(counts: &NgramCounts, smoothing: Smoothing) -> Result<LanguageModel> {
    smoothing.validate()?;
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let order = counts.order();
    let vocab = counts.vocab().clone();
    let (log_probs, log_backoffs) = match smoothing {
        Smoothing::Uniform => uniform_tables(&vocab, order),
        Smoothing::MaximumLikelihood => ml_tables(counts),
        Smoothing::KneserNey { discount } => kn_tables(counts, discount),
    };
    Ok(LanguageModel {
        order,
        vocab,
        smoothing,
        log_probs,
        log_backoffs,
    })
}

type Tables = (Vec<HashMap<Vec<u32>, f64>>, Vec<HashMap<Vec<u32>, f64>>);

fn empty_tables(order: usize) -> Tables {
    (vec![HashMap::new(); order], vec![HashMap::new(); order - 1])
}

fn uniform_tables(vocab: &LmVocab, order: usize) -> Tables {
    let (mut probs, backoffs) = empty_tables(order);
    let lp = -(vocab.scorable_len() as f64).ln();
    for w in vocab.scorable_ids() {
        probs[0].insert(vec![w], lp);
    }
    (probs, backoffs)
}

// Per-context totals over predicted words (BOS is never predicted).
fn context_totals(table: &HashMap<Vec<u32>, u64>) -> HashMap<&[u32], (u64, u64)> {
    let mut totals: HashMap<&[u32], (u64, u64)> = HashMap::new();
    for (g, &c) in table {
        if c == 0 || g[g.len() - 1] == BOS {
            continue;
        }
        let e = totals.entry(&g[..g.len() - 1]).or_insert((0, 0));
        e.0 += c;
        e.1 += 1;
    }
    totals
}

fn ml_tables(counts: &NgramCounts) -> Tables {
    let order = counts.order();
    let (mut probs, mut backoffs) = empty_tables(order);
    for m in 1..=order {
        let table = counts.table(m);
        let totals = context_totals(table);
        for (g, &c) in table {
            if g[m - 1] == BOS {
                continue;
            }
            let (total, _) = totals[&g[..m - 1]];
            probs[m - 1].insert(g.clone(), (c as f64 / total as f64).ln());
        }
        if m > 1 {
            for h in totals.keys() {
                backoffs[m - 2].insert(h.to_vec(), f64::NEG_INFINITY);
            }
        }
    }
    (probs, backoffs)
}

/// Effective counts per order: raw counts at the top order, left-continuation
/// type counts `N1+(. g)` below it.
fn kn_effective_counts(counts: &NgramCounts) -> Vec<HashMap<Vec<u32>, u64>> {
    let order = counts.order();
    let mut eff: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    eff[order - 1] = counts
        .table(order)
        .iter()
        .filter(|(g, _)| g[order - 1] != BOS)
        .map(|(g, &c)| (g.clone(), c))
        .collect();
    for m in (1..order).rev() {
        let mut cont: HashMap<Vec<u32>, u64> = HashMap::new();
        for g in counts.table(m + 1).keys() {
            if g[m] == BOS {
                continue;
            }
            *cont.entry(g[1..].to_vec()).or_insert(0) += 1;
        }
        eff[m - 1] = cont;
    }
    eff
}

fn kn_tables(counts: &NgramCounts, d: f64) -> Tables {
    let order = counts.order();
    let vocab = counts.vocab();
    let (mut probs, mut backoffs) = empty_tables(order);
    let eff = kn_effective_counts(counts);

    // Unigrams: discounted continuation counts interpolated with uniform.
    let uniform = 1.0 / vocab.scorable_len() as f64;
    let uni = &eff[0];
    let total: u64 = uni.values().sum();
    let types = uni.len() as f64;
    for w in vocab.scorable_ids() {
        let c = uni.get([w].as_slice()).copied().unwrap_or(0) as f64;
        let p = if total == 0 {
            uniform
        } else {
            let total = total as f64;
            (c - d).max(0.0) / total + d * types / total * uniform
        };
        probs[0].insert(vec![w], p.ln());
    }

    for m in 2..=order {
        let table = &eff[m - 1];
        let totals = context_totals(table);
        let mut entries: Vec<(Vec<u32>, f64)> = Vec::with_capacity(table.len());
        for (g, &c) in table {
            let h = &g[..m - 1];
            let (total, types) = totals[h];
            let total = total as f64;
            let lower = lower_prob(&probs, &backoffs, &g[1..]);
            let p = (c as f64 - d).max(0.0) / total + d * types as f64 / total * lower;
            entries.push((g.clone(), p.ln()));
        }
        probs[m - 1].extend(entries);
        for (h, (total, types)) in totals {
            backoffs[m - 2].insert(h.to_vec(), (d * types as f64 / total as f64).ln());
        }
    }
    (probs, backoffs)
}

// Probability of the last id of `g` given the rest, from the already-built
// lower-order tables.
fn lower_prob(
    probs: &[HashMap<Vec<u32>, f64>],
    backoffs: &[HashMap<Vec<u32>, f64>],
    g: &[u32],
) -> f64 {
    let w = g[g.len() - 1];
    let ctx = &g[..g.len() - 1];
    let mut acc = 0.0;
    for start in 0..=ctx.len() {
        let h = &ctx[start..];
        let mut key = h.to_vec();
        key.push(w);
        if let Some(lp) = probs[h.len()].get(&key) {
            return (acc + lp).exp();
        }
        if !h.is_empty() {
            if let Some(b) = backoffs[h.len() - 1].get(h) {
                acc += b;
            }
        }
    }
    0.0
}
