//! Multitask loss, RMSProp, learning-rate schedule with early stopping, and
//! the training loop.

mod batch;
mod loss;
mod optim;
mod schedule;
mod trainer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;
use crate::schema::SchemaError;
use crate::tensor::TensorError;

pub use batch::{make_batches, Batch};
pub use loss::{multitask_loss, LossAccumulator, LossBreakdown};
pub use optim::{clip_grad_norm, RmsProp};
pub use schedule::{run_schedule, EarlyStopping, EpochRunner, ScheduleOutcome};
pub use trainer::{batch_loss, evaluate_loss, gradient_check, train, EpochRecord, TrainOutput};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Schema(#[from] SchemaError),

    #[error("batch has no annotated words")]
    NoTargets,

    #[error("{0} data contains no words")]
    EmptyData(&'static str),

    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_lemma: f64,
    pub lambda_pos: f64,
    /// Weight of every feature head without an entry in `lambda_feat`.
    pub lambda_feats: f64,
    pub lambda_feat: BTreeMap<String, f64>,
    pub lr_initial: f64,
    pub lr_decayed: f64,
    /// First (1-based) epoch that uses `lr_decayed`.
    pub lr_decay_epoch: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub rmsprop_rho: f64,
    pub rmsprop_epsilon: f64,
    /// Global gradient norm limit; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_lemma: 1.0,
            lambda_pos: 0.2,
            lambda_feats: 1.0,
            lambda_feat: BTreeMap::new(),
            lr_initial: 0.001,
            lr_decayed: 0.0005,
            lr_decay_epoch: 7,
            patience: 5,
            batch_size: 32,
            max_epochs: 100,
            seed: 42,
            rmsprop_rho: 0.9,
            rmsprop_epsilon: 1e-7,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn lambda_for(&self, key: &str) -> f64 {
        self.lambda_feat.get(key).copied().unwrap_or(self.lambda_feats)
    }

    /// Learning rate of a 1-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_decay_epoch {
            self.lr_decayed
        } else {
            self.lr_initial
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let lambdas = [self.lambda_lemma, self.lambda_pos, self.lambda_feats]
            .into_iter()
            .chain(self.lambda_feat.values().copied());
        if lambdas.into_iter().any(|l| !(l >= 0.0 && l.is_finite())) {
            return Err(TrainError::Config("loss weights must be finite and non-negative".into()));
        }
        if !(self.lr_initial > 0.0 && self.lr_decayed > 0.0) {
            return Err(TrainError::Config("learning rates must be positive".into()));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(TrainError::Config(
                "patience, batch_size and max_epochs must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rmsprop_rho) || self.rmsprop_epsilon <= 0.0 || self.clip_norm < 0.0 {
            return Err(TrainError::Config("invalid optimizer settings".into()));
        }
        Ok(())
    }
}
