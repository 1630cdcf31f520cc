use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HyperError {
    #[error("buffer_size {buffer} is not a multiple of batch_size {batch}")]
    BufferNotMultiple { buffer: usize, batch: usize },
    #[error("{0} out of range")]
    OutOfRange(&'static str),
}

/// Linear decay from the initial value to `floor` at `max_steps`.
pub fn linear_schedule(initial: f64, floor: f64, step: u64, max_steps: u64) -> f64 {
    let frac = 1.0 - (step as f64 / max_steps.max(1) as f64).min(1.0);
    floor + (initial - floor) * frac
}

pub const LR_FLOOR: f64 = 1e-10;
pub const BETA_FLOOR: f64 = 1e-5;
pub const EPSILON_FLOOR: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_rate: f64,
    pub learning_rate_decay: bool,
    pub beta: f64,
    pub beta_decay: bool,
    pub epsilon: f64,
    pub epsilon_decay: bool,
    pub lambda: f64,
    pub num_epoch: usize,
    pub gamma: f64,
    /// Multiplies extrinsic rewards before advantage estimation.
    pub extrinsic_strength: f64,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub normalize: bool,
    pub value_coef: f64,
    pub curiosity_strength: f64,
    pub curiosity_gamma: f64,
    pub curiosity_encoding_size: usize,
    pub curiosity_layers: usize,
    pub curiosity_learning_rate: f64,
    pub max_steps: u64,
    pub time_horizon: usize,
    pub checkpoint_interval: u64,
    pub summary_freq: u64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            batch_size: 2560,
            buffer_size: 102_400,
            learning_rate: 3e-4,
            learning_rate_decay: true,
            beta: 0.05,
            beta_decay: true,
            epsilon: 0.2,
            epsilon_decay: true,
            lambda: 0.95,
            num_epoch: 3,
            gamma: 0.99,
            extrinsic_strength: 1.0,
            hidden_units: 512,
            num_layers: 2,
            normalize: true,
            value_coef: 0.5,
            curiosity_strength: 0.02,
            curiosity_gamma: 0.99,
            curiosity_encoding_size: 256,
            curiosity_layers: 2,
            curiosity_learning_rate: 3e-4,
            max_steps: 10_000_000,
            time_horizon: 512,
            checkpoint_interval: 500_000,
            summary_freq: 30_000,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), HyperError> {
        if self.batch_size == 0 || self.buffer_size % self.batch_size != 0 {
            return Err(HyperError::BufferNotMultiple {
                buffer: self.buffer_size,
                batch: self.batch_size,
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(HyperError::OutOfRange("epsilon"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(HyperError::OutOfRange("lambda"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(HyperError::OutOfRange("gamma"));
        }
        if self.num_epoch == 0 || self.hidden_units == 0 || self.num_layers == 0 || self.time_horizon == 0 {
            return Err(HyperError::OutOfRange("network or rollout size"));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, step: u64) -> f64 {
        if self.learning_rate_decay {
            linear_schedule(self.learning_rate, LR_FLOOR, step, self.max_steps)
        } else {
            self.learning_rate
        }
    }

    pub fn beta_at(&self, step: u64) -> f64 {
        if self.beta_decay {
            linear_schedule(self.beta, BETA_FLOOR, step, self.max_steps)
        } else {
            self.beta
        }
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if self.epsilon_decay {
            linear_schedule(self.epsilon, EPSILON_FLOOR, step, self.max_steps)
        } else {
            self.epsilon
        }
    }
}
