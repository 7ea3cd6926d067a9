use std::cmp::Ordering;

use super::OptimizerKind;
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::numerics::Activation;

macro_rules! train_config {
    ($($(#[$doc:meta])* $field:ident: $ty:ty = $default:expr,)*) => {
        /// Model size, optimizer and schedule for one training run.
        #[derive(Clone, Debug, PartialEq)]
        pub struct TrainConfig {
            $($(#[$doc])* pub $field: $ty,)*
        }

        impl Default for TrainConfig {
            fn default() -> Self {
                TrainConfig { $($field: $default,)* }
            }
        }

        impl TrainConfig {
            /// Overrides fields with the keys present in `kv`.
            pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
                $(kv.set(stringify!($field), &mut self.$field)?;)*
                Ok(())
            }

            /// Canonical `key = value` text.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(s.push_str(&format!("{} = {}\n", stringify!($field), self.$field));)*
                s
            }
        }
    };
}

train_config! {
    rank: usize = 50,
    hidden: usize = 100,
    learning_rate: f64 = 0.1,
    dropout_rate: f64 = 0.1,
    optimizer: OptimizerKind = OptimizerKind::Adagrad,
    rmsprop_decay: f64 = 0.9,
    epsilon: f64 = 1e-8,
    max_epochs: usize = 100,
    /// Epochs without validation improvement tolerated before stopping.
    patience: usize = 10,
    /// Patients per mini-batch.
    batch: usize = 16,
    seed: u64 = 0,
    /// Recent visits seen by the time-limited estimator.
    window: usize = 3,
    /// Activation of the plain RNN cell.
    activation: Activation = Activation::Tanh,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::config(key, reason));
        if self.rank == 0 {
            return bad("rank", "must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate", "must be in [0, 1)");
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return bad("rmsprop_decay", "must be in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs", "must be positive");
        }
        if self.batch == 0 {
            return bad("batch", "must be positive");
        }
        if self.window == 0 {
            return bad("window", "must be positive");
        }
        Ok(())
    }

    /// Total order used to break ties between equally scored grid points.
    pub fn lexicographic_cmp(&self, other: &Self) -> Ordering {
        self.optimizer
            .cmp(&other.optimizer)
            .then(self.rank.cmp(&other.rank))
            .then(self.hidden.cmp(&other.hidden))
            .then(self.learning_rate.total_cmp(&other.learning_rate))
            .then(self.dropout_rate.total_cmp(&other.dropout_rate))
            .then(self.window.cmp(&other.window))
            .then(self.batch.cmp(&other.batch))
            .then(self.rmsprop_decay.total_cmp(&other.rmsprop_decay))
            .then(self.epsilon.total_cmp(&other.epsilon))
            .then(self.max_epochs.cmp(&other.max_epochs))
            .then(self.patience.cmp(&other.patience))
            .then(self.seed.cmp(&other.seed))
            .then(self.activation.name().cmp(other.activation.name()))
    }

    /// Short human-readable summary of the searched fields.
    pub fn label(&self) -> String {
        format!(
            "{} rank={} hidden={} lr={} dropout={}",
            self.optimizer, self.rank, self.hidden, self.learning_rate, self.dropout_rate
        )
    }
}

/// Variations around the published configuration (rank 50, 100 hidden units,
/// learning rate 0.1, dropout 0.1, Adagrad), which is included.
pub fn default_grid(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut grid = Vec::new();
    for optimizer in [OptimizerKind::Adagrad, OptimizerKind::Rmsprop] {
        for (rank, hidden) in [(50, 100), (25, 50), (50, 50), (100, 100)] {
            for learning_rate in [0.1, 0.01] {
                for dropout_rate in [0.1, 0.0] {
                    grid.push(TrainConfig { rank, hidden, learning_rate, dropout_rate, optimizer, ..base.clone() });
                }
            }
        }
    }
    grid
}
