//! JSON-lines datasets: one `{"tokens": [...], "labels": [...]}` object per line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{LabeledSequence, Normalizer};

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledSequence>> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_dataset(BufReader::new(f), path)
}

/// Parses a JSONL stream; `path` only labels errors.
pub fn parse_dataset<R: BufRead>(reader: R, path: &Path) -> Result<Vec<LabeledSequence>> {
    let schema = |line: usize, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: LabeledSequence =
            serde_json::from_str(&line).map_err(|e| schema(i + 1, e.to_string()))?;
        seq.validate().map_err(|e| schema(i + 1, e.to_string()))?;
        if seq.is_empty() {
            return Err(schema(i + 1, "empty sequence".into()));
        }
        out.push(seq);
    }
    if out.is_empty() {
        return Err(schema(0, "dataset has no sequences".into()));
    }
    Ok(out)
}

pub fn write_dataset_to<W: Write>(mut out: W, data: &[LabeledSequence]) -> Result<()> {
    for seq in data {
        serde_json::to_writer(&mut out, seq)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_dataset(path: &Path, data: &[LabeledSequence]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_dataset_to(&mut w, data)?;
    w.flush().map_err(|e| Error::file(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub lines: usize,
    pub kept: usize,
    pub skipped: usize,
}

/// Labeled sequences from punctuated text lines. With a normalizer, fillers
/// and repetitions are removed first; lines with no usable tokens are skipped.
pub fn build_dataset<I, S>(lines: I, normalizer: Option<&Normalizer>) -> (Vec<LabeledSequence>, BuildReport)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut report = BuildReport::default();
    let mut out = Vec::new();
    for line in lines {
        report.lines += 1;
        let seq = match normalizer {
            Some(n) => n.normalize_line(line.as_ref()),
            None => crate::text::extract_labels(line.as_ref()),
        };
        match seq {
            Ok(s) if !s.is_empty() => {
                out.push(s);
                report.kept += 1;
            }
            _ => report.skipped += 1,
        }
    }
    (out, report)
}
