//! From-scratch deep Q-network: policy/target multilayer perceptrons,
//! replay memory, exploration and learning-rate schedules, and the training
//! loop.

mod checkpoint;
mod network;
mod replay;
mod schedule;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use network::forward;
pub use replay::{ReplayBuffer, Transition};
pub use schedule::{epsilon_at, lr_at};
pub use train::{
    select_action, soft_update, td_targets, train, train_from, train_step, TrainLogRow,
    TrainOutcome,
};

pub(crate) use network::{
    apply_sgd, argmax, backward, forward_cached, forward_raw, Mat,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QlearnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("replay buffer has {have} transition(s); at least {needed} required")]
    BufferTooSmall { have: usize, needed: usize },
    #[error(transparent)]
    Env(#[from] crate::mdp_env::EnvError),
}

/// Negative slope of the leaky rectified linear activation.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Network architecture and regularization options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    /// Dropout on hidden activations, active in training mode only.
    pub dropout_rate: f64,
    /// Opt-in per-row min-max rescale of [`forward`] outputs to [0,1].
    /// Monotone per row, so action selection is unaffected; the TD training
    /// path always uses raw Q-values.
    pub output_normalization: bool,
}

impl NetworkConfig {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        NetworkConfig {
            input_dim,
            hidden_layers: vec![1024, 512, 512, 256],
            output_dim,
            dropout_rate: 0.0,
            output_normalization: false,
        }
    }

    /// (in, out) shape of every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let widths: Vec<usize> = std::iter::once(self.input_dim)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(self.output_dim))
            .collect();
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One dense layer; `weights` is row-major with one row of length `in_dim`
/// per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub(crate) fn weight_row(&self, out: usize) -> &[f64] {
        &self.weights[out * self.in_dim..(out + 1) * self.in_dim]
    }
}

/// How a parameter set was initialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitRecord {
    pub scheme: String,
    pub seed: u64,
}

/// Weights and biases of a Q-network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetworkParams {
    pub layers: Vec<Dense>,
    pub init: InitRecord,
}

impl QNetworkParams {
    /// Seeded uniform He-style fan-in initialization; biases start at zero.
    pub fn init(config: &NetworkConfig, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(in_dim, out_dim)| {
                let bound = (6.0 / in_dim as f64).sqrt();
                let weights = (0..in_dim * out_dim)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                Dense {
                    in_dim,
                    out_dim,
                    weights,
                    biases: vec![0.0; out_dim],
                }
            })
            .collect();
        QNetworkParams {
            layers,
            init: InitRecord {
                scheme: "he-uniform".to_string(),
                seed,
            },
        }
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub(crate) fn check_config(&self, config: &NetworkConfig) -> Result<(), QlearnError> {
        if self.shapes() != config.layer_shapes() {
            return Err(QlearnError::ShapeMismatch(format!(
                "params shapes {:?} do not match config shapes {:?}",
                self.shapes(),
                config.layer_shapes()
            )));
        }
        Ok(())
    }
}

/// Training hyperparameters; defaults follow the experimental setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub gradient_steps: usize,
    pub exploration_initial: f64,
    pub exploration_fraction: f64,
    pub exploration_final: f64,
    pub lr_base: f64,
    pub lr_decay: f64,
    pub lr_decay_period: f64,
    pub buffer_capacity: usize,
    pub total_timesteps: u64,
    pub eval_interval: u64,
    /// Environment steps collected before updates begin; `None` means
    /// `batch_size`.
    pub learning_starts: Option<usize>,
    /// Optional hard target-network copy every N steps, in addition to the
    /// per-step soft update.
    pub target_copy_interval: Option<u64>,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            gradient_steps: 3,
            exploration_initial: 1.0,
            exploration_fraction: 0.1,
            exploration_final: 0.02,
            lr_base: 1e-3,
            lr_decay: 0.99,
            lr_decay_period: 1000.0,
            buffer_capacity: 100_000,
            total_timesteps: 20_000,
            eval_interval: 500,
            learning_starts: None,
            target_copy_interval: None,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn learning_starts(&self) -> usize {
        self.learning_starts.unwrap_or(self.batch_size)
    }
}
