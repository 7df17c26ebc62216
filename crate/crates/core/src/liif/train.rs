use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{sample_training_pair_with, SamplingConfig};
use super::model::{train_step, LiifModel};
use crate::nn::{AdamConfig, AdamState};
use crate::raster::ImageGrid;
use crate::{Error, Result};

/// Optimization schedule. An epoch draws one pair from every training image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// The learning rate halves every `decay_epoch` epochs.
    pub decay_epoch: Option<usize>,
    pub batch_size: usize,
    pub lr: f64,
    /// Stops early once this many optimizer steps have run.
    pub max_steps: Option<usize>,
    pub sampling: SamplingConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            decay_epoch: Some(200),
            batch_size: 8,
            lr: 1e-4,
            max_steps: None,
            sampling: SamplingConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        match self.decay_epoch {
            Some(d) if d > 0 => self.lr * 0.5f64.powi((epoch / d) as i32),
            _ => self.lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

/// Owns the model, optimizer state and sampling stream.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: LiifModel,
    states: Vec<AdamState>,
    config: TrainConfig,
    rng: ChaCha8Rng,
    epoch: usize,
    steps: usize,
}

impl Trainer {
    pub fn new(model: LiifModel, config: TrainConfig, seed: u64) -> Result<Self> {
        config.sampling.validate()?;
        if config.batch_size == 0 {
            return Err(Error::arg("batch_size must be positive"));
        }
        if !(config.lr > 0.0 && config.lr.is_finite()) {
            return Err(Error::arg("learning rate must be positive"));
        }
        let adam = AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        };
        let states = model.tensors().iter().map(|t| AdamState::new(t.shape(), adam)).collect();
        Ok(Self {
            model,
            states,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: 0,
            steps: 0,
        })
    }

    pub fn model(&self) -> &LiifModel {
        &self.model
    }

    pub fn into_model(self) -> LiifModel {
        self.model
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn budget_left(&self) -> bool {
        self.config.max_steps.map_or(true, |m| self.steps < m)
    }

    /// One pass over `images` in shuffled order.
    pub fn run_epoch(&mut self, images: &[ImageGrid]) -> Result<EpochSummary> {
        if images.is_empty() {
            return Err(Error::arg("no training images"));
        }
        let lr = self.config.lr_at_epoch(self.epoch);
        for s in &mut self.states {
            s.config.lr = lr;
        }
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut loss_sum, mut steps) = (0.0, 0);
        for chunk in order.chunks(self.config.batch_size) {
            if !self.budget_left() {
                break;
            }
            let batch = chunk
                .iter()
                .map(|&i| sample_training_pair_with(&images[i], &self.config.sampling, None, &mut self.rng))
                .collect::<Result<Vec<_>>>()?;
            let step = self.steps;
            loss_sum += train_step(&mut self.model, &batch, &mut self.states).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("step {step}: {msg}")),
                other => other,
            })?;
            steps += 1;
            self.steps += 1;
        }
        let summary = EpochSummary {
            epoch: self.epoch,
            steps,
            mean_loss: if steps > 0 { loss_sum / steps as f64 } else { f64::NAN },
            lr,
        };
        self.epoch += 1;
        Ok(summary)
    }

    /// Runs the configured number of epochs (or until the step budget ends),
    /// reporting each epoch to `on_epoch`.
    pub fn fit(&mut self, images: &[ImageGrid], mut on_epoch: impl FnMut(&EpochSummary)) -> Result<Vec<EpochSummary>> {
        let mut out = Vec::new();
        while self.epoch < self.config.epochs && self.budget_left() {
            let s = self.run_epoch(images)?;
            on_epoch(&s);
            out.push(s);
        }
        Ok(out)
    }
}
