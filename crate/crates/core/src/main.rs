use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use punct_restore::dataset::{build_dataset, read_dataset, write_dataset, write_dataset_to};
use punct_restore::desk::{self, DeskSetup};
use punct_restore::lm::{self, LanguageModel, Smoothing};
use punct_restore::noise::{inject_noise, NoiseConfig};
use punct_restore::pipeline::{evaluate_checkpoint, run_experiment, write_json, ExperimentPlan};
use punct_restore::sampler::{sample_stream, write_selected, SampleOptions};
use punct_restore::serve::{bench, bench_stages, serve_stream, serve_tcp, Restorer};
use punct_restore::tagger::{
    encode_dataset, train, Checkpoint, TaggerConfig, TaggerModel, TrainConfig, Vocab,
};
use punct_restore::text::{apply_labels, extract_labels, CodecOptions, FillerLexicon, Normalizer};

#[derive(Parser)]
#[command(name = "punct", version, about = "Punctuation restoration toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SmoothingKind {
    Kn,
    Ml,
    Uniform,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an n-gram language model on one utterance per line.
    LmTrain {
        #[arg(long, default_value_t = lm::DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = 0.75)]
        discount: f64,
        #[arg(long, default_value_t = lm::DEFAULT_MIN_FREQ)]
        min_freq: u64,
        #[arg(long, value_enum, default_value = "kn")]
        smoothing: SmoothingKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print `<perplexity>\t<line>` for every line.
    LmScore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Keep the k lowest-perplexity lines of an external corpus.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write `<perplexity>\t<source_index>\t<text>` for every scored line.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        max_ppl: Option<f64>,
        #[arg(long)]
        dedup: bool,
    },
    /// Remove fillers and repetitions from raw transcripts.
    Normalize {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        keep_case: bool,
        #[arg(long)]
        fillers: Option<PathBuf>,
        #[arg(long)]
        false_starts: bool,
    },
    /// Convert punctuated text into a labeled JSONL dataset.
    DatasetBuild {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Normalize (fillers, repetitions) before labeling.
        #[arg(long)]
        clean: bool,
        #[arg(long)]
        fillers: Option<PathBuf>,
    },
    /// Inject fillers and repetitions into clean punctuated text.
    Simulate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        filler_prob: f64,
        #[arg(long, default_value_t = 0.05)]
        repeat_prob: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Train a tagger on one dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// `random` or a checkpoint path.
        #[arg(long, default_value = "random")]
        init: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the bottom layers of a checkpoint.
    Truncate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        layers: usize,
        #[arg(long)]
        out: PathBuf,
        /// Reinitialize the classification head instead of copying it.
        #[arg(long)]
        reset_head: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run experiment plans.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
    /// Score a checkpoint on a labeled dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Manifest to reference in the report.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Restore punctuation line by line on stdin/stdout or a TCP port.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tcp: Option<String>,
    },
    /// Measure per-utterance latency at batch size 1.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        warmup: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic data directory used by the shipped plans.
    DeskData {
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Defaults to `runs/<plan name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `train.toml`: optimizer settings, plus the model shape for random init.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    model: TaggerConfig,
    #[serde(default = "one")]
    vocab_min_freq: usize,
}

fn one() -> usize {
    1
}

fn open_in(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(io::stdin().lock()),
    })
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn normalizer(fillers: Option<&Path>, keep_case: bool, false_starts: bool) -> Result<Normalizer> {
    let mut n = Normalizer::default();
    if let Some(p) = fillers {
        n.lexicon = FillerLexicon::from_file(p)?;
    }
    n.codec = CodecOptions {
        lowercase: !keep_case,
    };
    n.false_starts = false_starts;
    Ok(n)
}

fn print_stdout(text: &str) -> Result<()> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::LmTrain {
            order,
            discount,
            min_freq,
            smoothing,
            input,
            out,
        } => {
            let smoothing = match smoothing {
                SmoothingKind::Kn => Smoothing::KneserNey { discount },
                SmoothingKind::Ml => Smoothing::MaximumLikelihood,
                SmoothingKind::Uniform => Smoothing::Uniform,
            };
            let lines = punct_restore::io::read_lines(&input)?;
            let model = lm::train_from_lines(&lines, order, min_freq, smoothing)?;
            model.save(&out)?;
            eprintln!(
                "{}-gram model: {} words, {} entries",
                order,
                model.vocab().len(),
                model.num_entries()
            );
        }
        Cmd::LmScore { model, input } => {
            let model = LanguageModel::load(&model)?;
            let mut out = open_out(None)?;
            for line in open_in(input.as_deref())?.lines() {
                let line = line?;
                match model.line_perplexity(&line) {
                    Some(p) => writeln!(out, "{p:.6}\t{line}")?,
                    None => writeln!(out, "nan\t{line}")?,
                }
            }
            out.flush()?;
        }
        Cmd::Sample {
            model,
            input,
            k,
            out,
            scores,
            max_ppl,
            dedup,
        } => {
            let model = LanguageModel::load(&model)?;
            let reader = open_in(Some(&input))?;
            let mut score_out = scores.as_deref().map(|p| open_out(Some(p))).transpose()?;
            let opts = SampleOptions {
                k,
                max_ppl,
                dedup,
                ..Default::default()
            };
            let (selected, report) = sample_stream(&model, reader, &opts, |rec| {
                if let Some(w) = score_out.as_mut() {
                    writeln!(w, "{}", rec.to_tsv())?;
                }
                Ok(())
            })?;
            if let Some(mut w) = score_out {
                w.flush()?;
            }
            let mut w = open_out(Some(&out))?;
            write_selected(&mut w, &selected)?;
            w.flush()?;
            eprintln!("{}", serde_json::to_string(&report)?);
        }
        Cmd::Normalize {
            input,
            out,
            keep_case,
            fillers,
            false_starts,
        } => {
            let n = normalizer(fillers.as_deref(), keep_case, false_starts)?;
            let mut w = open_out(out.as_deref())?;
            for line in open_in(input.as_deref())?.lines() {
                let cleaned = match n.normalize_line(&line?) {
                    Ok(seq) => apply_labels(&seq),
                    Err(_) => String::new(),
                };
                writeln!(w, "{cleaned}")?;
            }
            w.flush()?;
        }
        Cmd::DatasetBuild {
            input,
            out,
            clean,
            fillers,
        } => {
            let n = normalizer(fillers.as_deref(), false, false)?;
            let lines = punct_restore::io::read_lines(&input)?;
            let (data, report) = build_dataset(&lines, clean.then_some(&n));
            write_dataset(&out, &data)?;
            eprintln!("kept {} of {} lines", report.kept, report.lines);
        }
        Cmd::Simulate {
            input,
            out,
            filler_prob,
            repeat_prob,
            seed,
        } => {
            let cfg = NoiseConfig {
                filler_prob,
                repeat_prob,
                seed,
                ..Default::default()
            };
            cfg.validate()?;
            let mut noisy = Vec::new();
            for (i, line) in punct_restore::io::read_lines(&input)?.iter().enumerate() {
                let Ok(seq) = extract_labels(line) else { continue };
                noisy.push(inject_noise(&seq, &cfg.for_utterance(i as u64))?);
            }
            let mut w = open_out(Some(&out))?;
            write_dataset_to(&mut w, &noisy)?;
            w.flush()?;
        }
        Cmd::Train {
            config,
            data,
            init,
            out,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let file: TrainFile = toml::from_str(&text)?;
            let seqs = read_dataset(&data)?;
            let (model, vocab) = if init == "random" {
                let vocab = Vocab::build(seqs.iter().map(|s| s.tokens.as_slice()), file.vocab_min_freq);
                let cfg = TaggerConfig {
                    vocab_size: vocab.len(),
                    ..file.model
                };
                (TaggerModel::new(cfg)?, vocab)
            } else {
                let ckpt = Checkpoint::load(Path::new(&init))?;
                (ckpt.model, ckpt.vocab)
            };
            let encoded = encode_dataset(&seqs, &vocab, model.config.max_seq_len);
            let outcome = train(model, &encoded, &file.train, |r, _| {
                eprintln!("epoch {} loss {:.4} ({} steps)", r.epoch, r.mean_loss, r.steps);
                Ok(())
            })?;
            Checkpoint::new(outcome.model, vocab)?.save(&out)?;
        }
        Cmd::Truncate {
            input,
            layers,
            out,
            reset_head,
            seed,
        } => {
            let ckpt = Checkpoint::load(&input)?;
            let mut model = ckpt.model.truncate_layers(layers)?;
            if reset_head {
                model.reset_head(seed);
            }
            Checkpoint::new(model, ckpt.vocab)?.save(&out)?;
        }
        Cmd::Experiment {
            cmd: ExperimentCmd::Run { plan, out },
        } => {
            let plan = ExperimentPlan::load(&plan)?;
            let out = out.unwrap_or_else(|| Path::new("runs").join(&plan.name));
            let res = run_experiment(&plan, Some(&out))?;
            for (stage, trace) in res.loss_traces() {
                eprintln!("{stage}: loss {trace:.4?}");
            }
            print_stdout(&serde_json::to_string_pretty(&res.report.overall)?)?;
            eprintln!("artifacts in {}", out.display());
        }
        Cmd::Evaluate {
            model,
            data,
            out,
            manifest,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let mut report = evaluate_checkpoint(&ckpt, &read_dataset(&data)?)?;
            report.manifest = manifest.map(|m| m.display().to_string());
            match out {
                Some(p) => write_json(&p, &report)?,
                None => print_stdout(&serde_json::to_string_pretty(&report)?)?,
            }
        }
        Cmd::Serve { model, tcp } => {
            let r = Restorer::new(Checkpoint::load(&model)?);
            match tcp {
                Some(addr) => {
                    eprintln!("listening on {addr}");
                    serve_tcp(Arc::new(r), addr.as_str())?;
                }
                None => {
                    serve_stream(&r, io::stdin().lock(), io::stdout().lock())?;
                }
            }
        }
        Cmd::Bench {
            model,
            input,
            warmup,
            out,
        } => {
            let r = Restorer::new(Checkpoint::load(&model)?);
            let lines = punct_restore::io::read_lines(&input)?;
            let stats = bench(&r, &lines, warmup, &input.display().to_string())?;
            let parts = bench_stages(&r, &lines, warmup)?;
            eprintln!(
                "per utterance: normalize {:.3} ms, encode+forward {:.3} ms, render {:.3} ms",
                parts.normalize_ms, parts.model_ms, parts.render_ms
            );
            match out {
                Some(p) => write_json(&p, &stats)?,
                None => print_stdout(&serde_json::to_string_pretty(&stats)?)?,
            }
        }
        Cmd::DeskData { out, seed, k } => {
            let mut setup = DeskSetup { k, ..Default::default() };
            setup.data.seed = seed;
            let files = desk::prepare(&out, &setup)?;
            eprintln!(
                "wrote {}; {:.1}% of sampled lines come from the similar subset ({:.1}% of pool)",
                out.display(),
                100.0 * files.sampled_similar_fraction,
                100.0 * files.pool_similar_fraction
            );
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse().cmd) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
