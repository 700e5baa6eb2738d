//! Batch-size-1 punctuation restoration over a line protocol, and latency
//! benchmarking of the same path.
//!
//! Each input line yields exactly one output line: the normalized tokens with
//! predicted punctuation. Empty lines (and lines with nothing left after
//! cleanup) yield empty lines; undecodable lines yield `#ERR <reason>`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagger::{predict, Checkpoint};
use crate::text::{apply_labels, LabeledSequence, Normalizer};

pub const ERROR_PREFIX: &str = "#ERR ";

/// A loaded model plus the cleanup applied before inference.
#[derive(Debug, Clone)]
pub struct Restorer {
    pub checkpoint: Checkpoint,
    pub normalizer: Normalizer,
}

impl Restorer {
    pub fn new(checkpoint: Checkpoint) -> Self {
        Restorer {
            checkpoint,
            normalizer: Normalizer::default(),
        }
    }

    /// Cleaned tokens of a raw line; `None` when nothing is left.
    pub fn prepare(&self, line: &str) -> Result<Option<Vec<String>>> {
        match self.normalizer.normalize_line(line) {
            Ok(seq) if !seq.is_empty() => Ok(Some(seq.tokens)),
            Ok(_) | Err(Error::NoTokens(_)) | Err(Error::AllFillers) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn restore_line(&self, line: &str) -> Result<String> {
        let Some(tokens) = self.prepare(line)? else {
            return Ok(String::new());
        };
        let labels = predict(&self.checkpoint.model, &self.checkpoint.vocab, &tokens)?;
        Ok(apply_labels(&LabeledSequence { tokens, labels }))
    }

    fn respond(&self, raw: &[u8]) -> String {
        match std::str::from_utf8(raw) {
            Ok(line) => self
                .restore_line(line)
                .unwrap_or_else(|e| format!("{ERROR_PREFIX}{e}")),
            Err(_) => format!("{ERROR_PREFIX}invalid UTF-8"),
        }
    }
}

/// Answers every line of `input` on `output`, flushing after each one.
/// Returns the number of lines answered.
pub fn serve_stream<R: BufRead, W: Write>(restorer: &Restorer, mut input: R, mut output: W) -> Result<u64> {
    let mut buf = Vec::new();
    let mut n = 0;
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        let reply = restorer.respond(&buf);
        output.write_all(reply.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
        n += 1;
    }
    Ok(n)
}

/// Serves each accepted connection on its own thread, sharing one model.
pub fn serve_listener(restorer: Arc<Restorer>, listener: TcpListener) -> Result<()> {
    for conn in listener.incoming() {
        let conn = conn?;
        let r = Arc::clone(&restorer);
        std::thread::spawn(move || {
            let Ok(read_half) = conn.try_clone() else { return };
            // a dropped client only ends its own session
            let _ = serve_stream(&r, BufReader::new(read_half), BufWriter::new(conn));
        });
    }
    Ok(())
}

pub fn serve_tcp<A: ToSocketAddrs>(restorer: Arc<Restorer>, addr: A) -> Result<()> {
    serve_listener(restorer, TcpListener::bind(addr)?)
}

/// Per-utterance latency over the full normalize, encode, forward and decode path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub n_layers: usize,
    pub corpus: String,
}

pub const MIN_TIMED: usize = 30;

impl LatencyStats {
    pub fn from_samples(samples_ms: &[f64], n_layers: usize, corpus: &str) -> Result<Self> {
        if samples_ms.is_empty() {
            return Err(Error::invalid("no latency samples"));
        }
        let mut s = samples_ms.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        };
        let p95 = s[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        Ok(LatencyStats {
            count: n,
            mean_ms: s.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p95_ms: p95,
            max_ms: s[n - 1],
            n_layers,
            corpus: corpus.to_string(),
        })
    }
}

/// Times every line single-threaded, discarding the first `warmup` timings.
pub fn bench<S: AsRef<str>>(
    restorer: &Restorer,
    lines: &[S],
    warmup: usize,
    corpus: &str,
) -> Result<LatencyStats> {
    if lines.len() < warmup + MIN_TIMED {
        return Err(Error::invalid(format!(
            "corpus has {} utterances; need at least warmup + {MIN_TIMED} = {}",
            lines.len(),
            warmup + MIN_TIMED
        )));
    }
    let mut samples = Vec::with_capacity(lines.len() - warmup);
    for (i, line) in lines.iter().enumerate() {
        let start = Instant::now();
        let out = restorer.restore_line(line.as_ref())?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(out);
        if i >= warmup {
            samples.push(ms);
        }
    }
    LatencyStats::from_samples(&samples, restorer.checkpoint.model.config.n_layers, corpus)
}

/// Mean milliseconds per utterance spent in each part of the serving path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub normalize_ms: f64,
    pub model_ms: f64,
    pub render_ms: f64,
}

/// Times normalization, encoding plus forward pass, and rendering separately,
/// over the same lines and warmup as [`bench`].
pub fn bench_stages<S: AsRef<str>>(restorer: &Restorer, lines: &[S], warmup: usize) -> Result<StageTimes> {
    if lines.len() < warmup + MIN_TIMED {
        return Err(Error::invalid(format!(
            "corpus has {} utterances; need at least {}",
            lines.len(),
            warmup + MIN_TIMED
        )));
    }
    let mut sums = [0.0; 3];
    for line in lines.iter().skip(warmup) {
        let t0 = Instant::now();
        let tokens = restorer.prepare(line.as_ref())?;
        let t1 = Instant::now();
        let labels = match &tokens {
            Some(t) => predict(&restorer.checkpoint.model, &restorer.checkpoint.vocab, t)?,
            None => Vec::new(),
        };
        let t2 = Instant::now();
        let out = tokens.map(|tokens| apply_labels(&LabeledSequence { tokens, labels }));
        std::hint::black_box(out);
        let t3 = Instant::now();
        for (s, d) in sums.iter_mut().zip([t1 - t0, t2 - t1, t3 - t2]) {
            *s += d.as_secs_f64() * 1e3;
        }
    }
    let n = (lines.len() - warmup) as f64;
    Ok(StageTimes {
        normalize_ms: sums[0] / n,
        model_ms: sums[1] / n,
        render_ms: sums[2] / n,
    })
}
