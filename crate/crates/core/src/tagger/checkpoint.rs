//! Binary model container.
//!
//! ```text
//! "PRCK" | version u32 | config (JSON string) | vocab: count u32, strings
//! | tensor count u32 | per tensor: name, ndim u32, dims u64.., f32 data
//! ```
//!
//! Integers and floats are little-endian; strings are u32-length-prefixed UTF-8.

use std::path::Path;

use super::config::TaggerConfig;
use super::data::Vocab;
use super::model::TaggerModel;
use crate::error::{Error, Result};
use crate::io::{sha256_hex, ByteReader, ByteWriter};

const MAGIC: &[u8; 4] = b"PRCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TaggerModel<f32>,
    pub vocab: Vocab,
}

impl Checkpoint {
    pub fn new(model: TaggerModel<f32>, vocab: Vocab) -> Result<Self> {
        if vocab.len() != model.config.vocab_size {
            return Err(Error::Incompatible(format!(
                "vocabulary has {} entries, model expects {}",
                vocab.len(),
                model.config.vocab_size
            )));
        }
        Ok(Checkpoint { model, vocab })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(MAGIC);
        w.u32(FORMAT_VERSION);
        w.str(&serde_json::to_string(&self.model.config).expect("config serializes"));
        w.u32(self.vocab.len() as u32);
        for word in self.vocab.words() {
            w.str(word);
        }
        let tensors = self.model.named_tensors();
        w.u32(tensors.len() as u32);
        for (name, t) in tensors {
            w.str(&name);
            w.u32(t.shape.len() as u32);
            for &d in &t.shape {
                w.u64(d as u64);
            }
            for &v in &t.data {
                w.f32(v);
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a tagger checkpoint".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let config: TaggerConfig = serde_json::from_str(&r.str()?)?;
        let n_words = r.u32()? as usize;
        let words = (0..n_words).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let vocab = Vocab::from_list(words)?;
        let mut model = TaggerModel::<f32>::new(config)?;
        let mut tensors = model.named_tensors_mut();
        if r.u32()? as usize != tensors.len() {
            return Err(Error::Format("tensor count does not match config".into()));
        }
        for (name, t) in tensors.iter_mut() {
            let got = r.str()?;
            if &got != name {
                return Err(Error::Format(format!("expected tensor {name}, found {got}")));
            }
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if shape != t.shape {
                return Err(Error::Format(format!(
                    "tensor {name} has shape {shape:?}, expected {:?}",
                    t.shape
                )));
            }
            for v in t.data.iter_mut() {
                *v = r.f32()?;
            }
        }
        if !r.is_done() {
            return Err(Error::Format("trailing bytes".into()));
        }
        drop(tensors);
        Checkpoint::new(model, vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn checksum(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

/// SHA-256 over tensor names, shapes and little-endian values.
pub fn parameter_checksum(model: &TaggerModel<f32>) -> String {
    let mut w = ByteWriter::default();
    for (name, t) in model.named_tensors() {
        w.str(&name);
        for &d in &t.shape {
            w.u64(d as u64);
        }
        for &v in &t.data {
            w.f32(v);
        }
    }
    sha256_hex(&w.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn sample() -> Checkpoint {
        let vocab = Vocab::build([tokenize("hello there how are you").as_slice()], 1);
        let model = TaggerModel::new(TaggerConfig {
            vocab_size: vocab.len(),
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            ffn_dim: 16,
            max_seq_len: 10,
            dropout_prob: 0.1,
            seed: 1,
        })
        .unwrap();
        Checkpoint::new(model, vocab).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }

    #[test]
    fn vocab_size_must_match() {
        let c = sample();
        let small = Vocab::build([tokenize("a").as_slice()], 1);
        assert!(matches!(Checkpoint::new(c.model, small), Err(Error::Incompatible(_))));
    }
}
