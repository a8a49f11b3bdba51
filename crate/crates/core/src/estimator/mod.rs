//! Single-layer quadratic estimator trained on power measurements.

mod model;
mod recover;
mod schedule;
mod train;

use serde::{Deserialize, Serialize};

pub use model::{embed, forward, gradient, loss, structured_weights, RealChannelMatrix, RealInput, WeightMatrix};
pub use recover::recover_autocorrelation;
pub use schedule::{cosine_annealing, lr_schedule};
pub use train::{train, TrainResult};

use crate::error::{Error, Result};

/// How target powers are scaled before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the mean training power and undo it on the recovered matrix.
    #[default]
    MeanPower,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Fraction of the measurements used for training; the rest validate.
    pub train_fraction: f64,
    pub max_iterations: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    /// Iterations per cosine cycle.
    pub cosine_period: usize,
    /// Clamped to the training-set size.
    pub batch_size: usize,
    /// Standard deviation of the initial weights, in normalized units.
    pub init_scale: f64,
    pub normalization: Normalization,
    /// Validation error is evaluated every this many iterations.
    pub validate_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            max_iterations: 5000,
            lr_max: 0.1,
            lr_min: 1e-4,
            cosine_period: 1000,
            batch_size: 32,
            init_scale: 0.1,
            normalization: Normalization::MeanPower,
            validate_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if self.max_iterations == 0 || self.cosine_period == 0 || self.batch_size == 0 || self.validate_every == 0 {
            return Err(Error::invalid("iteration counts, cosine period, batch size and validation stride must be positive"));
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rates must satisfy 0 <= lr_min <= lr_max, got {} and {}",
                self.lr_min, self.lr_max
            )));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("init scale must be positive"));
        }
        Ok(())
    }
}
