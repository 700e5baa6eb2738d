//! Label codec between punctuated text and `(tokens, labels)` pairs, plus
//! disfluency cleanup for ASR-style transcripts.
//!
//! Each word token carries the punctuation mark that immediately follows it:
//!
//! ```text
//! "Well, thank you for coming down."
//!   well   thank  you   for   coming  down
//!   COMMA  NONE   NONE  NONE  NONE    PERIOD
//! ```
//!
//! Exclamation marks are folded into `PERIOD`. When several marks follow one
//! token, the first recognized one wins. Other punctuation (`;`, `:`, dashes,
//! quotes, brackets) is dropped.

mod disfluency;

pub use disfluency::{
    remove_false_start, remove_false_start_labeled, remove_fillers, remove_fillers_labeled,
    remove_repetitions, remove_repetitions_labeled, FillerLexicon, Normalizer, DEFAULT_FILLERS,
    DEFAULT_MAX_SPAN,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The punctuation mark following a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PunctLabel {
    #[serde(rename = "PERIOD")]
    Period,
    #[serde(rename = "COMMA")]
    Comma,
    #[serde(rename = "QUESTIONMARK")]
    QuestionMark,
    #[serde(rename = "NONE")]
    None,
}

impl PunctLabel {
    pub const ALL: [PunctLabel; 4] = [
        PunctLabel::Period,
        PunctLabel::Comma,
        PunctLabel::QuestionMark,
        PunctLabel::None,
    ];

    /// The three classes that are scored during evaluation.
    pub const SCORED: [PunctLabel; 3] = [
        PunctLabel::Period,
        PunctLabel::QuestionMark,
        PunctLabel::Comma,
    ];

    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            PunctLabel::Period => 0,
            PunctLabel::Comma => 1,
            PunctLabel::QuestionMark => 2,
            PunctLabel::None => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PunctLabel::Period => "PERIOD",
            PunctLabel::Comma => "COMMA",
            PunctLabel::QuestionMark => "QUESTIONMARK",
            PunctLabel::None => "NONE",
        }
    }

    /// The character written after a token carrying this label.
    pub fn mark(self) -> Option<char> {
        match self {
            PunctLabel::Period => Some('.'),
            PunctLabel::Comma => Some(','),
            PunctLabel::QuestionMark => Some('?'),
            PunctLabel::None => None,
        }
    }

    /// Maps a punctuation character to a label; `!` becomes `PERIOD`.
    pub fn from_mark(c: char) -> Option<Self> {
        match c {
            '.' | '!' => Some(PunctLabel::Period),
            ',' => Some(PunctLabel::Comma),
            '?' => Some(PunctLabel::QuestionMark),
            _ => None,
        }
    }

    pub fn is_none(self) -> bool {
        self == PunctLabel::None
    }
}

impl fmt::Display for PunctLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PunctLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PERIOD" => Ok(PunctLabel::Period),
            "COMMA" => Ok(PunctLabel::Comma),
            "QUESTIONMARK" => Ok(PunctLabel::QuestionMark),
            "NONE" => Ok(PunctLabel::None),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

/// Parallel tokens and punctuation labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub tokens: Vec<String>,
    pub labels: Vec<PunctLabel>,
}

impl LabeledSequence {
    pub fn new(tokens: Vec<String>, labels: Vec<PunctLabel>) -> Result<Self> {
        let seq = LabeledSequence { tokens, labels };
        seq.validate()?;
        Ok(seq)
    }

    /// All tokens labeled `NONE`.
    pub fn unlabeled(tokens: Vec<String>) -> Self {
        let labels = vec![PunctLabel::None; tokens.len()];
        LabeledSequence { tokens, labels }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: self.tokens.len(),
                right: self.labels.len(),
            });
        }
        if let Some(bad) = self.tokens.iter().find(|t| !is_clean_token(t)) {
            return Err(Error::invalid(format!("malformed token {bad:?}")));
        }
        Ok(())
    }
}

fn is_clean_token(t: &str) -> bool {
    !t.is_empty()
        && !t
            .chars()
            .any(|c| c.is_whitespace() || PunctLabel::from_mark(c).is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecOptions {
    pub lowercase: bool,
}

impl Default for CodecOptions {
    fn default() -> Self {
        CodecOptions { lowercase: true }
    }
}

// Characters allowed inside a word when flanked by alphanumerics.
fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

/// Splits punctuated text into lowercased word tokens and per-token labels.
pub fn extract_labels(text: &str) -> Result<LabeledSequence> {
    extract_labels_with(text, CodecOptions::default())
}

pub fn extract_labels_with(text: &str, opts: CodecOptions) -> Result<LabeledSequence> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens: Vec<String> = Vec::new();
    let mut labels: Vec<PunctLabel> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            let mut word = String::new();
            while i < chars.len() {
                let c = chars[i];
                if c.is_alphanumeric() {
                    push_char(&mut word, c, opts.lowercase);
                } else if is_joiner(c)
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphanumeric()
                {
                    word.push(if c == '\u{2019}' { '\'' } else { c });
                } else {
                    break;
                }
                i += 1;
            }
            tokens.push(word);
            labels.push(PunctLabel::None);
            continue;
        }
        if let (Some(label), Some(last)) = (PunctLabel::from_mark(c), labels.last_mut()) {
            if last.is_none() {
                *last = label;
            }
        }
        i += 1;
    }
    if tokens.is_empty() {
        return Err(Error::NoTokens(text.to_string()));
    }
    Ok(LabeledSequence { tokens, labels })
}

fn push_char(word: &mut String, c: char, lowercase: bool) {
    if lowercase {
        word.extend(c.to_lowercase());
    } else {
        word.push(c);
    }
}

/// Renders tokens with their marks attached, separated by single spaces.
pub fn apply_labels(seq: &LabeledSequence) -> String {
    let mut out = String::new();
    for (i, (tok, label)) in seq.tokens.iter().zip(&seq.labels).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(tok);
        if let Some(m) = label.mark() {
            out.push(m);
        }
    }
    out
}

/// Tokens of `text` joined by single spaces, with every punctuation mark removed.
/// Text without word tokens yields an empty string.
pub fn strip_punctuation(text: &str) -> String {
    match extract_labels(text) {
        Ok(seq) => seq.tokens.join(" "),
        Err(_) => String::new(),
    }
}

/// Whitespace tokenization of an already-normalized line.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use PunctLabel::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn comma_and_period_from_conversational_line() {
        let seq = extract_labels("Well, thank you for coming down.").unwrap();
        assert_eq!(seq.tokens, toks("well thank you for coming down"));
        assert_eq!(seq.labels, vec![Comma, None, None, None, None, Period]);
    }

    #[test]
    fn question_mark_at_end() {
        let seq = extract_labels("Might I have your email?").unwrap();
        assert_eq!(*seq.labels.last().unwrap(), QuestionMark);
        assert_eq!(seq.tokens[1], "i");
    }

    #[test]
    fn exclamation_becomes_period_and_apostrophes_stay() {
        let seq = extract_labels("Eh, I really don't know what to do about it!").unwrap();
        assert_eq!(seq.labels[0], Comma);
        assert_eq!(*seq.labels.last().unwrap(), Period);
        assert!(seq.tokens.contains(&"don't".to_string()));
        assert_eq!(seq.len(), 10);
    }

    #[test]
    fn consecutive_marks_collapse_to_first() {
        let seq = extract_labels("really?! yes... ok , . fine").unwrap();
        assert_eq!(seq.labels, vec![QuestionMark, Period, Comma, None]);
    }

    #[test]
    fn unrecognized_punctuation_is_dropped() {
        let seq = extract_labels("\"note: this; is — it\"").unwrap();
        assert_eq!(seq.tokens, toks("note this is it"));
        assert!(seq.labels.iter().all(|l| l.is_none()));
    }

    #[test]
    fn leading_marks_have_no_token_to_attach_to() {
        let seq = extract_labels("... hello").unwrap();
        assert_eq!(seq.labels, vec![None]);
    }

    #[test]
    fn curly_apostrophe_is_normalized() {
        let seq = extract_labels("I don\u{2019}t").unwrap();
        assert_eq!(seq.tokens, toks("i don't"));
    }

    #[test]
    fn keep_case_option() {
        let seq = extract_labels_with("Hello World.", CodecOptions { lowercase: false }).unwrap();
        assert_eq!(seq.tokens, toks("Hello World"));
    }

    #[test]
    fn no_words_is_an_error() {
        assert!(matches!(extract_labels(" ?! ... "), Err(Error::NoTokens(_))));
        assert!(extract_labels("").is_err());
    }

    #[test]
    fn apply_single_token() {
        let seq = LabeledSequence::new(vec!["ok".into()], vec![Period]).unwrap();
        assert_eq!(apply_labels(&seq), "ok.");
    }

    #[test]
    fn apply_then_extract_round_trips() {
        let s = "well, thank you. might i have your email? sure";
        assert_eq!(apply_labels(&extract_labels(s).unwrap()), s);
    }

    #[test]
    fn strip_removes_all_marks() {
        assert_eq!(strip_punctuation("Stop!"), "stop");
        assert_eq!(strip_punctuation("already plain text"), "already plain text");
        assert_eq!(strip_punctuation("?!"), "");
    }

    #[test]
    fn label_string_forms() {
        for l in PunctLabel::ALL {
            assert_eq!(l.as_str().parse::<PunctLabel>().unwrap(), l);
            assert_eq!(PunctLabel::from_index(l.index()), Some(l));
            let json = serde_json::to_string(&l).unwrap();
            assert_eq!(json, format!("\"{}\"", l.as_str()));
        }
    }

    #[test]
    fn validate_rejects_mismatch() {
        assert!(LabeledSequence::new(toks("a b"), vec![None]).is_err());
        assert!(LabeledSequence::new(vec!["a,".into()], vec![None]).is_err());
    }
}
