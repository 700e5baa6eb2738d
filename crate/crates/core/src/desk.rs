//! Desk-scale reproduction of the in-domain / sampled-external / two-stage
//! comparison on synthetic data.
//!
//! [`prepare`] writes a self-contained data directory:
//!
//! - `lm.txt`: unpunctuated noisy target transcripts,
//! - `external.txt`: the mixed external pool,
//! - `target.lm`: a Kneser-Ney model trained on `lm.txt`,
//! - `samex.jsonl`: the `k` lowest-perplexity external utterances,
//! - `indom.jsonl`, `test.jsonl`: normalized in-domain train and test sets.
//!
//! [`preset_plans`] builds the three experiment plans over those files.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::dataset::{build_dataset, write_dataset};
use crate::error::{Error, Result};
use crate::lm::{train_from_lines, Smoothing};
use crate::pipeline::{ExperimentPlan, InitSpec, StageSpec};
use crate::sampler::{sample_stream, SampleOptions};
use crate::synthetic::{DeskScaleConfig, DeskScaleData};
use crate::tagger::{TaggerConfig, TrainConfig};
use crate::text::{apply_labels, Normalizer};

#[derive(Debug, Clone)]
pub struct DeskSetup {
    pub data: DeskScaleConfig,
    pub lm_order: usize,
    pub lm_min_freq: u64,
    /// External utterances selected for the sampled-external stage.
    pub k: usize,
}

impl Default for DeskSetup {
    fn default() -> Self {
        DeskSetup {
            data: DeskScaleConfig::default(),
            lm_order: 3,
            lm_min_freq: 1,
            k: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeskFiles {
    pub dir: PathBuf,
    pub indom: PathBuf,
    pub samex: PathBuf,
    pub test: PathBuf,
    /// Share of the sampled utterances drawn from the similar external subset.
    pub sampled_similar_fraction: f64,
    /// Share of the whole external pool that is similar.
    pub pool_similar_fraction: f64,
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = impl AsRef<str>>) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l.as_ref());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn prepare(dir: &Path, setup: &DeskSetup) -> Result<DeskFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let data = DeskScaleData::generate(&setup.data);
    write_lines(&dir.join("lm.txt"), &data.lm_lines)?;
    write_lines(&dir.join("external.txt"), data.external.iter().map(|e| &e.text))?;

    let lm = train_from_lines(&data.lm_lines, setup.lm_order, setup.lm_min_freq, Smoothing::default())?;
    lm.save(&dir.join("target.lm"))?;
    let ext_path = dir.join("external.txt");
    let f = std::fs::File::open(&ext_path).map_err(|e| Error::file(&ext_path, e))?;
    let opts = SampleOptions {
        k: setup.k,
        ..Default::default()
    };
    let (picked, _) = sample_stream(&lm, BufReader::new(f), &opts, |_| Ok(()))?;
    let similar = picked
        .iter()
        .filter(|p| data.external[p.source_index as usize].similar)
        .count();

    let normalizer = Normalizer::default();
    let (samex, _) = build_dataset(picked.iter().map(|p| &p.text), Some(&normalizer));
    let clean = |seqs: &[crate::text::LabeledSequence]| {
        build_dataset(seqs.iter().map(apply_labels), Some(&normalizer)).0
    };
    let files = DeskFiles {
        dir: dir.to_path_buf(),
        indom: dir.join("indom.jsonl"),
        samex: dir.join("samex.jsonl"),
        test: dir.join("test.jsonl"),
        sampled_similar_fraction: similar as f64 / picked.len().max(1) as f64,
        pool_similar_fraction: data.external.iter().filter(|e| e.similar).count() as f64
            / data.external.len().max(1) as f64,
    };
    write_dataset(&files.samex, &samex)?;
    write_dataset(&files.indom, &clean(&data.train))?;
    write_dataset(&files.test, &clean(&data.test))?;
    Ok(files)
}

/// Training recipes for the two kinds of stage.
#[derive(Debug, Clone)]
pub struct PresetRecipe {
    pub model: TaggerConfig,
    pub external: TrainConfig,
    pub indomain: TrainConfig,
}

impl Default for PresetRecipe {
    fn default() -> Self {
        let base = TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            seed: 1,
            ..Default::default()
        };
        PresetRecipe {
            model: TaggerConfig {
                d_model: 32,
                n_heads: 4,
                n_layers: 2,
                ffn_dim: 64,
                max_seq_len: 64,
                dropout_prob: 0.1,
                seed: 1,
                vocab_size: 0,
            },
            external: TrainConfig { epochs: 4, ..base.clone() },
            indomain: TrainConfig { epochs: 8, ..base },
        }
    }
}

/// `indom`, `samex` and `two_stage` plans over the files of `dir`, sharing
/// one vocabulary.
pub fn preset_plans(dir: &Path, recipe: &PresetRecipe) -> [ExperimentPlan; 3] {
    let stage = |name: &str, file: &str, train: &TrainConfig| StageSpec {
        name: name.into(),
        data: file.into(),
        train: train.clone(),
        early_stopping: None,
    };
    let ext = stage("external", "samex.jsonl", &recipe.external);
    let ind = stage("indomain", "indom.jsonl", &recipe.indomain);
    let plan = |name: &str, stages: Vec<StageSpec>| ExperimentPlan {
        name: name.into(),
        init: InitSpec::Random,
        model: recipe.model.clone(),
        stages,
        eval: "test.jsonl".into(),
        vocab_sources: vec!["samex.jsonl".into(), "indom.jsonl".into()],
        vocab_min_freq: 1,
        base_dir: dir.to_path_buf(),
    };
    [
        plan("indom", vec![ind.clone()]),
        plan("samex", vec![ext.clone()]),
        plan("two_stage", vec![ext, ind]),
    ]
}
