use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SGD regime for one training stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    /// Learning-rate multiplier for the final 1×1 layer.
    pub final_layer_lr_multiplier: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every_epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub crop_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            initial_lr: 0.01,
            final_layer_lr_multiplier: 10.0,
            lr_decay_factor: 10.0,
            lr_decay_every_epochs: 5,
            momentum: 0.9,
            weight_decay: 0.0005,
            epochs: 15,
            crop_size: 48,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_lr", self.initial_lr),
            ("final_layer_lr_multiplier", self.final_layer_lr_multiplier),
            ("lr_decay_factor", self.lr_decay_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        if self.batch_size == 0 || self.lr_decay_every_epochs == 0 || self.crop_size == 0 {
            return Err(Error::invalid(
                "batch_size, lr_decay_every_epochs and crop_size must be positive",
            ));
        }
        Ok(())
    }

    /// Base learning rate during `epoch` (0-based): divided by the decay
    /// factor every `lr_decay_every_epochs` epochs.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let drops = (epoch / self.lr_decay_every_epochs) as i32;
        self.initial_lr / self.lr_decay_factor.powi(drops)
    }
}

/// Knobs of the three-stage procedure beyond the per-stage SGD regime.
#[derive(Clone, Debug, PartialEq)]
pub struct StcConfig {
    pub num_classes: u8,
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub train: TrainConfig,
    /// Start each stage from the previous stage's weights instead of a
    /// fresh initialization.
    pub warm_start: bool,
    /// Add simple-image pseudo-masks to the final stage's training set.
    pub powerful_includes_simple: bool,
    /// Number of relabel-and-retrain rounds for the enhanced stage.
    pub enhanced_rounds: usize,
}

impl Default for StcConfig {
    fn default() -> Self {
        Self {
            num_classes: crate::data::synth::DEFAULT_NUM_CLASSES,
            channels: vec![16, 32, 64],
            kernel_size: 3,
            train: TrainConfig::default(),
            warm_start: false,
            powerful_includes_simple: true,
            enhanced_rounds: 1,
        }
    }
}
