//! Punctuation restoration for noisy conversational transcripts.
//!
//! The crate covers the full pipeline:
//!
//! - [`lm`]: order-n Kneser-Ney language model used to measure how close an
//!   external utterance is to the target domain.
//! - [`sampler`]: streaming perplexity scoring and bounded top-k selection.
//! - [`text`]: the punctuation label codec and disfluency cleanup.
//! - [`noise`] and [`synthetic`]: ASR-like noise and templated corpora.
//! - [`dataset`]: JSON-lines labeled datasets.
//! - [`tagger`]: a small transformer encoder with a 4-way token head, trained
//!   from scratch, with bottom-k layer truncation.
//! - [`pipeline`]: single- and two-stage fine-tuning experiments.
//! - [`eval`]: per-class and support-weighted precision/recall/F1.
//! - [`serve`]: batch-size-1 line-protocol serving and latency benchmarks.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod dataset;
pub mod desk;
pub mod error;
pub mod eval;
pub mod io;
pub mod lm;
pub mod noise;
pub mod pipeline;
pub mod sampler;
pub mod serve;
pub mod synthetic;
pub mod tagger;
pub mod text;

pub use error::{Error, Result};
