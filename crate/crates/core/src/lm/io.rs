//! Binary model container.
//!
//! ```text
//! magic      b"PNLM"
//! version    u32
//! order      u32
//! smoothing  u8 kind (0 = Kneser-Ney, 1 = maximum likelihood, 2 = uniform), f64 discount
//! vocab      u32 count, then per word: u32 byte length, UTF-8 bytes
//! probs      per order m = 1..=order: u64 count, then per entry: m x u32 ids, f64 ln p
//! backoffs   per length l = 1..order: u64 count, then per entry: l x u32 ids, f64 ln weight
//! ```
//!
//! All integers and floats are little-endian. Entries are sorted by id
//! sequence so identical models serialize to identical bytes. Probabilities
//! are natural logs.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::counts::LmVocab;
use super::model::{LanguageModel, Smoothing};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

const MAGIC: &[u8; 4] = b"PNLM";
pub const FORMAT_VERSION: u32 = 1;

impl LanguageModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u32(self.order as u32);
        let (kind, discount) = match self.smoothing {
            Smoothing::KneserNey { discount } => (0u8, discount),
            Smoothing::MaximumLikelihood => (1, 0.0),
            Smoothing::Uniform => (2, 0.0),
        };
        w.u8(kind);
        w.f64(discount);
        w.u32(self.vocab.len() as u32);
        for word in self.vocab.words() {
            w.str(word);
        }
        for table in self.log_probs.iter().chain(&self.log_backoffs) {
            write_table(&mut w, table);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a language model".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported LM format version {version}")));
        }
        let order = r.u32()? as usize;
        if order < 1 {
            return Err(Error::Format("order must be at least 1".into()));
        }
        let kind = r.u8()?;
        let discount = r.f64()?;
        let smoothing = match kind {
            0 => Smoothing::KneserNey { discount },
            1 => Smoothing::MaximumLikelihood,
            2 => Smoothing::Uniform,
            k => return Err(Error::Format(format!("unknown smoothing kind {k}"))),
        };
        let n = r.u32()? as usize;
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            words.push(r.str()?);
        }
        if n < 3 {
            return Err(Error::Format("vocabulary lacks special symbols".into()));
        }
        let vocab = LmVocab::from_words(words.into_iter().skip(3));
        let mut log_probs = Vec::with_capacity(order);
        for m in 1..=order {
            log_probs.push(read_table(&mut r, m, vocab.len())?);
        }
        let mut log_backoffs = Vec::with_capacity(order - 1);
        for l in 1..order {
            log_backoffs.push(read_table(&mut r, l, vocab.len())?);
        }
        if !r.is_done() {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        Ok(LanguageModel {
            order,
            vocab,
            smoothing,
            log_probs,
            log_backoffs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn write_table(w: &mut ByteWriter, table: &HashMap<Vec<u32>, f64>) {
    let mut entries: Vec<(&Vec<u32>, &f64)> = table.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    w.u64(entries.len() as u64);
    for (ids, v) in entries {
        for &id in ids {
            w.u32(id);
        }
        w.f64(*v);
    }
}

fn read_table(r: &mut ByteReader<'_>, m: usize, vocab_len: usize) -> Result<HashMap<Vec<u32>, f64>> {
    let n = r.u64()? as usize;
    let mut table = HashMap::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let mut ids = Vec::with_capacity(m);
        for _ in 0..m {
            let id = r.u32()?;
            if id as usize >= vocab_len {
                return Err(Error::Format(format!("id {id} outside vocabulary")));
            }
            ids.push(id);
        }
        table.insert(ids, r.f64()?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::count_ngrams;
    use crate::text::tokenize;

    fn model(smoothing: Smoothing) -> LanguageModel {
        let corpus: Vec<Vec<String>> = ["a b c", "b c d d", "a a b", "c"]
            .iter()
            .map(|l| tokenize(l))
            .collect();
        crate::lm::train_lm(&count_ngrams(&corpus, 3, 1).unwrap(), smoothing).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for s in [
            Smoothing::default(),
            Smoothing::MaximumLikelihood,
            Smoothing::Uniform,
        ] {
            let lm = model(s);
            let bytes = lm.to_bytes();
            let back = LanguageModel::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back.smoothing(), s);
            assert_eq!(back.vocab(), lm.vocab());
        }
    }

    #[test]
    fn same_input_same_bytes() {
        assert_eq!(
            model(Smoothing::default()).to_bytes(),
            model(Smoothing::default()).to_bytes()
        );
    }

    #[test]
    fn corrupt_input_rejected() {
        let bytes = model(Smoothing::default()).to_bytes();
        assert!(LanguageModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(LanguageModel::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(LanguageModel::from_bytes(&extra).is_err());
    }
}
