use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{extract_labels_with, CodecOptions, LabeledSequence, PunctLabel};
use crate::error::{Error, Result};

pub const DEFAULT_FILLERS: &[&str] = &["um", "uh", "uhm", "eh", "hmm", "mhm", "erm"];

pub const DEFAULT_MAX_SPAN: usize = 3;

/// Closed set of hesitation tokens removed during normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillerLexicon(BTreeSet<String>);

impl Default for FillerLexicon {
    fn default() -> Self {
        FillerLexicon(DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect())
    }
}

impl FillerLexicon {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = words
            .into_iter()
            .map(Into::into)
            .map(|w| w.trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if set.is_empty() {
            return Err(Error::invalid("filler lexicon is empty"));
        }
        Ok(FillerLexicon(set))
    }

    /// One filler per line; blank lines and `#` comments ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

// Earlier non-NONE label wins.
fn merge(kept: PunctLabel, removed: PunctLabel) -> PunctLabel {
    if kept.is_none() {
        removed
    } else {
        kept
    }
}

pub fn remove_fillers(tokens: &[String], lexicon: &FillerLexicon) -> Result<Vec<String>> {
    let out: Vec<String> = tokens
        .iter()
        .filter(|t| !lexicon.contains(t))
        .cloned()
        .collect();
    if out.is_empty() {
        return Err(Error::AllFillers);
    }
    Ok(out)
}

/// Removes fillers; a removed filler's label moves onto the previous surviving
/// token, and is dropped when no token precedes it.
pub fn remove_fillers_labeled(
    seq: &LabeledSequence,
    lexicon: &FillerLexicon,
) -> Result<LabeledSequence> {
    let mut out = LabeledSequence::unlabeled(Vec::with_capacity(seq.len()));
    for (tok, &label) in seq.tokens.iter().zip(&seq.labels) {
        if lexicon.contains(tok) {
            if let Some(prev) = out.labels.last_mut() {
                *prev = merge(*prev, label);
            }
        } else {
            out.tokens.push(tok.clone());
            out.labels.push(label);
        }
    }
    if out.is_empty() {
        return Err(Error::AllFillers);
    }
    Ok(out)
}

pub fn remove_repetitions(tokens: &[String], max_span: usize) -> Vec<String> {
    let seq = LabeledSequence::unlabeled(tokens.to_vec());
    remove_repetitions_labeled(&seq, max_span).tokens
}

/// Collapses adjacent duplicate spans of 1..=`max_span` tokens into one copy.
///
/// Each pass scans left to right and tries the longest span first at every
/// position; passes repeat until nothing changes. The surviving copy takes,
/// position by position, the earlier non-NONE label of the two copies.
pub fn remove_repetitions_labeled(seq: &LabeledSequence, max_span: usize) -> LabeledSequence {
    let mut tokens = seq.tokens.clone();
    let mut labels = seq.labels.clone();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < tokens.len() {
            let found = (1..=max_span).rev().find(|&span| {
                i + 2 * span <= tokens.len()
                    && tokens[i..i + span] == tokens[i + span..i + 2 * span]
            });
            match found {
                Some(span) => {
                    for j in 0..span {
                        labels[i + j] = merge(labels[i + j], labels[i + span + j]);
                    }
                    tokens.drain(i + span..i + 2 * span);
                    labels.drain(i + span..i + 2 * span);
                    changed = true;
                }
                None => i += 1,
            }
        }
        if !changed {
            break;
        }
    }
    LabeledSequence { tokens, labels }
}

pub fn remove_false_start(tokens: &[String]) -> Vec<String> {
    let seq = LabeledSequence::unlabeled(tokens.to_vec());
    remove_false_start_labeled(&seq).tokens
}

/// Drops a leading fragment of at most three tokens when the speaker restarts
/// with the same first word ("i want i need to go" -> "i need to go"). The
/// restatement must keep at least two tokens.
pub fn remove_false_start_labeled(seq: &LabeledSequence) -> LabeledSequence {
    let t = &seq.tokens;
    let cut = (1..=3).find(|&f| f + 1 < t.len() && t[f] == t[0]);
    match cut {
        Some(f) => LabeledSequence {
            tokens: t[f..].to_vec(),
            labels: seq.labels[f..].to_vec(),
        },
        None => seq.clone(),
    }
}

/// Full transcript cleanup applied identically at dataset construction and
/// serving time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalizer {
    pub lexicon: FillerLexicon,
    pub max_span: usize,
    pub false_starts: bool,
    pub codec: CodecOptions,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer {
            lexicon: FillerLexicon::default(),
            max_span: DEFAULT_MAX_SPAN,
            false_starts: false,
            codec: CodecOptions::default(),
        }
    }
}

impl Normalizer {
    pub fn clean_labeled(&self, seq: &LabeledSequence) -> Result<LabeledSequence> {
        let seq = remove_fillers_labeled(seq, &self.lexicon)?;
        let mut seq = remove_repetitions_labeled(&seq, self.max_span);
        if self.false_starts {
            seq = remove_false_start_labeled(&seq);
        }
        Ok(seq)
    }

    pub fn clean_tokens(&self, tokens: &[String]) -> Result<Vec<String>> {
        Ok(self
            .clean_labeled(&LabeledSequence::unlabeled(tokens.to_vec()))?
            .tokens)
    }

    /// Parses a raw line (punctuated or not) and cleans it, keeping any labels
    /// present in the input.
    pub fn normalize_line(&self, line: &str) -> Result<LabeledSequence> {
        let seq = extract_labels_with(line, self.codec)?;
        self.clean_labeled(&seq)
    }
}
