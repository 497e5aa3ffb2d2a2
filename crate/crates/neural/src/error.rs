use thiserror::Error;

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("token {token} is outside the vocabulary of size {vocab}")]
    TokenOutOfVocab { token: usize, vocab: usize },

    #[error("sequence of {len} positions exceeds the positional table of {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("feature width {got} for {node_type} nodes, model expects {expected}")]
    FeatureWidth { node_type: String, got: usize, expected: usize },

    #[error("no valid action left at decoding step {step}")]
    DeadEnd { step: usize },

    #[error("non-finite loss at training step {step} (batch {batch:?})")]
    NonFiniteLoss { step: usize, batch: Vec<usize> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Core(#[from] copcs_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
