//! Experiment plans: one or more fine-tuning stages chained on one model,
//! followed by evaluation on a held-out set.
//!
//! A plan is a TOML file. Relative paths resolve against the plan's directory.
//!
//! ```toml
//! name = "two_stage"
//! eval = "data/test.jsonl"
//!
//! [init]
//! kind = "random"            # or: kind = "checkpoint", path = "base.ckpt"
//!
//! [model]
//! d_model = 64
//! n_layers = 4
//!
//! [[stages]]
//! name = "external"
//! data = "data/samex.jsonl"
//! train = { epochs = 4, learning_rate = 1e-3 }
//!
//! [[stages]]
//! name = "indomain"
//! data = "data/indom.jsonl"
//! train = { epochs = 8, learning_rate = 1e-3 }
//! # optional: stop once dev loss fails to improve for `patience` epochs,
//! # keeping the best epoch's weights
//! early_stopping = { dev = "data/dev.jsonl", patience = 2 }
//! ```
//!
//! Every dataset is loaded and checked, the vocabulary fixed and the initial
//! model built before the first stage trains.

use std::collections::HashSet;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::read_dataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::io::{file_sha256, sha256_hex};
use crate::tagger::{
    collate, encode_dataset, predict, train_until, Checkpoint, EncodedExample, TaggerConfig, TaggerModel,
    TrainConfig, Vocab,
};
use crate::text::{LabeledSequence, PunctLabel};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("PUNCT_GIT_DESCRIBE"));

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// Fresh weights seeded by `model.seed`.
    #[default]
    Random,
    Checkpoint { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    pub data: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stopping: Option<EarlyStopping>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStopping {
    pub dev: PathBuf,
    pub patience: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    #[serde(default)]
    pub init: InitSpec,
    /// `vocab_size` is filled in from the vocabulary.
    #[serde(default)]
    pub model: TaggerConfig,
    pub stages: Vec<StageSpec>,
    pub eval: PathBuf,
    /// Datasets the vocabulary is built from. Empty means every stage that
    /// trains for at least one epoch.
    #[serde(default)]
    pub vocab_sources: Vec<PathBuf>,
    #[serde(default = "one")]
    pub vocab_min_freq: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut plan: ExperimentPlan =
            toml::from_str(text).map_err(|e| Error::Plan(e.to_string()))?;
        plan.base_dir = base_dir.into();
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("plan serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Plan("a plan needs at least one stage".into()));
        }
        let mut names = HashSet::new();
        for s in &self.stages {
            if s.name.is_empty() || s.name.contains(['/', '\\']) || !names.insert(&s.name) {
                return Err(Error::Plan(format!("bad or duplicate stage name {:?}", s.name)));
            }
            s.train
                .validate()
                .map_err(|e| Error::Plan(format!("stage {}: {e}", s.name)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub sequences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub data: DatasetRecord,
    pub train: TrainConfig,
    pub loss_trace: Vec<f64>,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dev_loss_trace: Vec<f64>,
    /// Epoch whose weights were kept, when early stopping is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

/// Human-readable record of everything that determined a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan: String,
    pub version: String,
    pub init: InitSpec,
    pub init_sha256: Option<String>,
    pub model: TaggerConfig,
    pub vocab_size: usize,
    pub vocab_sha256: String,
    pub stages: Vec<StageRecord>,
    pub eval: DatasetRecord,
    pub final_checkpoint_sha256: String,
    pub final_parameter_sha256: String,
}

pub struct ExperimentOutcome {
    pub checkpoint: Checkpoint,
    pub report: EvalReport,
    pub manifest: Manifest,
}

impl ExperimentOutcome {
    pub fn loss_traces(&self) -> Vec<(String, Vec<f64>)> {
        self.manifest
            .stages
            .iter()
            .map(|s| (s.name.clone(), s.loss_trace.clone()))
            .collect()
    }
}

struct LoadedData {
    record: DatasetRecord,
    data: Vec<LabeledSequence>,
}

fn load_data(plan: &ExperimentPlan, p: &Path) -> Result<LoadedData> {
    let full = plan.resolve(p);
    let data = read_dataset(&full)?;
    Ok(LoadedData {
        record: DatasetRecord {
            path: p.to_path_buf(),
            sha256: file_sha256(&full)?,
            sequences: data.len(),
        },
        data,
    })
}

fn vocab_sha(vocab: &Vocab) -> String {
    sha256_hex(vocab.words().join("\n").as_bytes())
}

/// Vocabulary built from the plan's vocabulary sources.
pub fn plan_vocab(plan: &ExperimentPlan) -> Result<Vocab> {
    let sources: Vec<PathBuf> = if plan.vocab_sources.is_empty() {
        plan.stages
            .iter()
            .filter(|s| s.train.epochs > 0)
            .map(|s| s.data.clone())
            .collect()
    } else {
        plan.vocab_sources.clone()
    };
    let mut seqs = Vec::new();
    for p in &sources {
        seqs.extend(read_dataset(&plan.resolve(p))?);
    }
    Ok(Vocab::build(seqs.iter().map(|s| s.tokens.as_slice()), plan.vocab_min_freq))
}

/// Runs every stage in order, then evaluates. With `out_dir`, per-epoch
/// checkpoints go to `<out_dir>/<stage>/epoch<N>.ckpt` and the final
/// checkpoint, manifest and report to `<out_dir>/`.
pub fn run_experiment(plan: &ExperimentPlan, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    plan.check_shape()?;
    let stages: Vec<LoadedData> = plan
        .stages
        .iter()
        .map(|s| load_data(plan, &s.data))
        .collect::<Result<_>>()?;
    let eval = load_data(plan, &plan.eval)?;
    let devs: Vec<Option<LoadedData>> = plan
        .stages
        .iter()
        .map(|s| s.early_stopping.as_ref().map(|e| load_data(plan, &e.dev)).transpose())
        .collect::<Result<_>>()?;

    let (mut model, vocab, init_sha256) = match &plan.init {
        InitSpec::Random => {
            let vocab = plan_vocab(plan)?;
            let config = TaggerConfig {
                vocab_size: vocab.len(),
                ..plan.model.clone()
            };
            (TaggerModel::new(config)?, vocab, None)
        }
        InitSpec::Checkpoint { path } => {
            let full = plan.resolve(path);
            let ckpt = Checkpoint::load(&full)?;
            let wanted = TaggerConfig {
                vocab_size: ckpt.model.config.vocab_size,
                ..plan.model.clone()
            };
            if plan.model.vocab_size != 0 && plan.model.vocab_size != ckpt.vocab.len() {
                return Err(Error::Incompatible(format!(
                    "plan expects vocabulary of {}, checkpoint has {}",
                    plan.model.vocab_size,
                    ckpt.vocab.len()
                )));
            }
            if !wanted.same_shape(&ckpt.model.config) {
                return Err(Error::Incompatible(format!(
                    "plan model {:?} does not match checkpoint {:?}",
                    wanted, ckpt.model.config
                )));
            }
            if !plan.vocab_sources.is_empty() && plan_vocab(plan)? != ckpt.vocab {
                return Err(Error::Incompatible(
                    "plan vocabulary differs from the checkpoint's".into(),
                ));
            }
            let mut model = ckpt.model;
            model.config.dropout_prob = plan.model.dropout_prob;
            (model, ckpt.vocab, Some(file_sha256(&full)?))
        }
    };
    model.config.validate()?;
    let max_len = model.config.max_seq_len;
    let encoded: Vec<Vec<EncodedExample>> = stages
        .iter()
        .map(|s| encode_dataset(&s.data, &vocab, max_len))
        .collect();
    let dev_encoded: Vec<Option<Vec<EncodedExample>>> = devs
        .iter()
        .map(|d| d.as_ref().map(|d| encode_dataset(&d.data, &vocab, max_len)))
        .collect();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let mut records = Vec::with_capacity(plan.stages.len());
    for (((spec, loaded), data), dev) in plan.stages.iter().zip(stages).zip(&encoded).zip(&dev_encoded) {
        let stage_dir = out_dir.map(|d| d.join(&spec.name));
        if let Some(d) = &stage_dir {
            std::fs::create_dir_all(d).map_err(|e| Error::file(d, e))?;
        }
        let patience = spec.early_stopping.as_ref().map_or(0, |e| e.patience);
        let mut dev_losses = Vec::new();
        let mut best: Option<(usize, f64, TaggerModel<f32>)> = None;
        let outcome = train_until(model, data, &spec.train, |report, m| {
            if let Some(d) = &stage_dir {
                let ckpt = Checkpoint::new(m.clone(), vocab.clone())?;
                ckpt.save(&d.join(format!("epoch{}.ckpt", report.epoch)))?;
            }
            let Some(dev) = dev else {
                return Ok(ControlFlow::Continue(()));
            };
            let loss = dataset_loss(m, dev)?;
            dev_losses.push(loss);
            if best.as_ref().is_none_or(|(_, l, _)| loss < *l) {
                best = Some((report.epoch, loss, m.clone()));
            }
            let best_epoch = best.as_ref().map_or(0, |b| b.0);
            Ok(if report.epoch - best_epoch > patience {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            })
        })?;
        let best_epoch = best.as_ref().map(|b| b.0);
        records.push(StageRecord {
            name: spec.name.clone(),
            data: loaded.record,
            train: spec.train.clone(),
            loss_trace: outcome.loss_trace(),
            steps: outcome.epochs.last().map_or(0, |e| e.steps),
            dev_loss_trace: dev_losses,
            best_epoch,
        });
        model = match best {
            Some((_, _, m)) => m,
            None => outcome.model,
        };
    }

    let checkpoint = Checkpoint::new(model, vocab)?;
    let mut report = evaluate_checkpoint(&checkpoint, &eval.data)?;
    let manifest = Manifest {
        plan: plan.name.clone(),
        version: VERSION.to_string(),
        init: plan.init.clone(),
        init_sha256,
        model: checkpoint.model.config.clone(),
        vocab_size: checkpoint.vocab.len(),
        vocab_sha256: vocab_sha(&checkpoint.vocab),
        stages: records,
        eval: eval.record,
        final_checkpoint_sha256: checkpoint.checksum(),
        final_parameter_sha256: crate::tagger::parameter_checksum(&checkpoint.model),
    };
    if let Some(dir) = out_dir {
        checkpoint.save(&dir.join("final.ckpt"))?;
        let mpath = dir.join("manifest.json");
        write_json(&mpath, &manifest)?;
        report.manifest = Some(mpath.display().to_string());
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(ExperimentOutcome {
        checkpoint,
        report,
        manifest,
    })
}

/// Mean token cross-entropy of a model over a dataset, inference mode.
pub fn dataset_loss(model: &TaggerModel<f32>, data: &[EncodedExample]) -> Result<f64> {
    let parts: Vec<(f64, usize)> = data
        .par_chunks(32)
        .map(|chunk| {
            let refs: Vec<&EncodedExample> = chunk.iter().collect();
            let (batch, labels, mask) = collate(&refs);
            let n = mask.iter().filter(|&&m| m).count();
            Ok((model.loss(&batch, &labels, &mask)? as f64 * n as f64, n))
        })
        .collect::<Result<_>>()?;
    let (sum, n) = parts.iter().fold((0.0, 0), |(s, c), (l, k)| (s + l, c + k));
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(sum / n as f64)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// Predicts every sequence (in parallel) and scores against its labels.
pub fn evaluate_checkpoint(ckpt: &Checkpoint, data: &[LabeledSequence]) -> Result<EvalReport> {
    let preds: Vec<Vec<PunctLabel>> = data
        .par_iter()
        .map(|s| predict(&ckpt.model, &ckpt.vocab, &s.tokens))
        .collect::<Result<_>>()?;
    let gold: Vec<&[PunctLabel]> = data.iter().map(|s| s.labels.as_slice()).collect();
    evaluate(&preds, &gold)
}
