use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{LrSchedule, TrainConfig};
use super::data::{collate, EncodedExample};
use super::model::TaggerModel;
use crate::error::{Error, Result};

const DROPOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Adam moments for every parameter of a model.
pub struct Adam {
    m: TaggerModel<f32>,
    v: TaggerModel<f32>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
}

impl Adam {
    pub fn new(model: &TaggerModel<f32>, cfg: &TrainConfig) -> Self {
        Adam {
            m: model.zeros_like(),
            v: model.zeros_like(),
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_epsilon,
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut TaggerModel<f32>, grads: &TaggerModel<f32>, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2) = (self.beta1, self.beta2);
        let params = model.named_tensors_mut();
        let ms = self.m.named_tensors_mut();
        let vs = self.v.named_tensors_mut();
        let gs = grads.named_tensors();
        for (((p, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(gs) {
            for i in 0..p.1.data.len() {
                let gi = g.1.data[i] as f64;
                let mi = b1 * m.1.data[i] as f64 + (1.0 - b1) * gi;
                let vi = b2 * v.1.data[i] as f64 + (1.0 - b2) * gi * gi;
                m.1.data[i] = mi as f32;
                v.1.data[i] = vi as f32;
                let update = lr * (mi / c1) / ((vi / c2).sqrt() + self.eps);
                p.1.data[i] = (p.1.data[i] as f64 - update) as f32;
            }
        }
    }
}

/// Global L2 norm over every gradient tensor.
pub fn grad_norm(grads: &TaggerModel<f32>) -> f64 {
    grads
        .named_tensors()
        .iter()
        .flat_map(|(_, t)| t.data.iter())
        .map(|&g| (g as f64) * (g as f64))
        .sum::<f64>()
        .sqrt()
}

fn scale(grads: &mut TaggerModel<f32>, s: f64) {
    for (_, t) in grads.named_tensors_mut() {
        t.data.iter_mut().for_each(|g| *g = (*g as f64 * s) as f32);
    }
}

fn add_into(acc: &mut TaggerModel<f32>, g: &TaggerModel<f32>) {
    for ((_, a), (_, b)) in acc.named_tensors_mut().into_iter().zip(g.named_tensors()) {
        for (x, &y) in a.data.iter_mut().zip(&b.data) {
            *x += y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub mean_loss: f64,
    /// Optimizer updates applied so far.
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TaggerModel<f32>,
    pub epochs: Vec<EpochReport>,
}

impl TrainOutcome {
    pub fn loss_trace(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

/// Number of optimizer updates `train` will apply.
pub fn total_steps(examples: usize, cfg: &TrainConfig) -> usize {
    let batches = examples.div_ceil(cfg.batch_size);
    batches.div_ceil(cfg.grad_accumulation_steps) * cfg.epochs
}

/// Trains with Adam under a linear warmup/decay schedule. Examples are
/// reshuffled every epoch from a generator seeded by `cfg.seed`; dropout uses
/// an independent stream from the same seed. `on_epoch` runs after every
/// epoch, typically to write a checkpoint.
pub fn train<C>(
    model: TaggerModel<f32>,
    data: &[EncodedExample],
    cfg: &TrainConfig,
    mut on_epoch: C,
) -> Result<TrainOutcome>
where
    C: FnMut(&EpochReport, &TaggerModel<f32>) -> Result<()>,
{
    train_until(model, data, cfg, |r, m| on_epoch(r, m).map(|_| ControlFlow::Continue(())))
}

/// Like [`train`], but stops after any epoch for which `on_epoch` returns
/// `Break`. The schedule is still laid out over `cfg.epochs`.
pub fn train_until<C>(
    mut model: TaggerModel<f32>,
    data: &[EncodedExample],
    cfg: &TrainConfig,
    mut on_epoch: C,
) -> Result<TrainOutcome>
where
    C: FnMut(&EpochReport, &TaggerModel<f32>) -> Result<ControlFlow<()>>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let schedule = LrSchedule::new(cfg.learning_rate, cfg.warmup_proportion, total_steps(data.len(), cfg));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM);
    let mut adam = Adam::new(&model, cfg);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let mut loss_sum = 0.0;
        for group in batches.chunks(cfg.grad_accumulation_steps) {
            let mut acc: Option<TaggerModel<f32>> = None;
            for idx in group {
                let examples: Vec<&EncodedExample> = idx.iter().map(|&i| &data[i]).collect();
                let (batch, labels, mask) = collate(&examples);
                let (loss, g) = model.loss_and_grads(&batch, &labels, &mask, Some(&mut dropout_rng))?;
                loss_sum += loss as f64;
                match acc.as_mut() {
                    Some(a) => add_into(a, &g),
                    None => acc = Some(g),
                }
            }
            let mut grads = acc.expect("non-empty accumulation group");
            if group.len() > 1 {
                scale(&mut grads, 1.0 / group.len() as f64);
            }
            if cfg.max_grad_norm > 0.0 {
                let norm = grad_norm(&grads);
                if norm > cfg.max_grad_norm {
                    scale(&mut grads, cfg.max_grad_norm / norm);
                }
            }
            adam.step(&mut model, &grads, schedule.lr_at(step));
            step += 1;
        }
        if !model.is_finite() {
            return Err(Error::invalid(format!("parameters diverged in epoch {epoch}")));
        }
        let report = EpochReport {
            epoch,
            mean_loss: loss_sum / batches.len() as f64,
            steps: step,
        };
        let flow = on_epoch(&report, &model)?;
        epochs.push(report);
        if flow.is_break() {
            break;
        }
    }
    Ok(TrainOutcome { model, epochs })
}
