use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_dim: usize,
    pub max_seq_len: usize,
    pub dropout_prob: f64,
    /// Seeds parameter initialization.
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            vocab_size: 0,
            d_model: 64,
            n_heads: 4,
            n_layers: 6,
            ffn_dim: 256,
            max_seq_len: 300,
            dropout_prob: 0.1,
            seed: 42,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("tagger config: {m}")));
        if self.vocab_size < 2 {
            return bad("vocab_size must cover at least the padding and unknown tokens");
        }
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.n_layers < 1 {
            return bad("n_layers must be at least 1");
        }
        if self.ffn_dim == 0 {
            return bad("ffn_dim must be positive");
        }
        if self.max_seq_len < 1 {
            return bad("max_seq_len must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad("dropout_prob must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// True when two configs produce parameter tensors of identical shapes.
    pub fn same_shape(&self, other: &TaggerConfig) -> bool {
        self.vocab_size == other.vocab_size
            && self.d_model == other.d_model
            && self.n_heads == other.n_heads
            && self.n_layers == other.n_layers
            && self.ffn_dim == other.ffn_dim
            && self.max_seq_len == other.max_seq_len
    }
}

/// Optimization recipe. Defaults follow the reference fine-tuning setup:
/// learning rate 5e-5, batch size 50, warmup proportion 0.1, no gradient
/// accumulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub warmup_proportion: f64,
    pub grad_accumulation_steps: usize,
    pub epochs: usize,
    /// Seeds shuffling and dropout.
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 50,
            warmup_proportion: 0.1,
            grad_accumulation_steps: 1,
            epochs: 3,
            seed: 42,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_grad_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("train config: {m}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup_proportion) {
            return bad("warmup_proportion must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.grad_accumulation_steps == 0 {
            return bad("batch_size and grad_accumulation_steps must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) || self.max_grad_norm < 0.0 {
            return bad("adam_epsilon must be positive and max_grad_norm non-negative");
        }
        Ok(())
    }
}

/// Linear warmup to the peak rate, then linear decay to zero.
#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    pub peak: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(peak: f64, warmup_proportion: f64, total_steps: usize) -> Self {
        LrSchedule {
            peak,
            warmup_steps: (warmup_proportion * total_steps as f64).floor() as usize,
            total_steps,
        }
    }

    /// Learning rate applied at optimizer update `step` (0-based).
    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.peak * (step as f64 / self.warmup_steps as f64);
        }
        let decay = self.total_steps.saturating_sub(self.warmup_steps);
        if decay == 0 {
            return self.peak;
        }
        self.peak * (self.total_steps.saturating_sub(step) as f64 / decay as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_recipe() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 5e-5);
        assert_eq!(c.batch_size, 50);
        assert_eq!(c.warmup_proportion, 0.1);
        assert_eq!(c.grad_accumulation_steps, 1);
        assert_eq!(TaggerConfig::default().max_seq_len, 300);
    }

    #[test]
    fn schedule_peaks_at_warmup_end() {
        let s = LrSchedule::new(5e-5, 0.1, 1000);
        assert_eq!(s.warmup_steps, 100);
        assert_eq!(s.lr_at(0), 0.0);
        assert!((s.lr_at(50) - 2.5e-5).abs() < 1e-18);
        assert_eq!(s.lr_at(100), 5e-5);
        assert!((s.lr_at(550) - 2.5e-5).abs() < 1e-18);
        assert_eq!(s.lr_at(1000), 0.0);
        for step in 0..1000 {
            assert!(s.lr_at(step) <= 5e-5);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TaggerConfig {
            vocab_size: 10,
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        c.n_heads = 3;
        assert!(c.validate().is_err());
        let t = TrainConfig {
            warmup_proportion: 1.0,
            ..Default::default()
        };
        assert!(t.validate().is_err());
        let t = TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }
}
