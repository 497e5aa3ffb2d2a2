//! Learned co-planner: a typed graph-attention encoder over the mission context graph, a causal
//! decoder that cross-attends to the node embeddings, imitation training on exact demonstrations
//! and masked greedy decoding. Gradients come from the small reverse-mode [`tape`].

pub mod decode;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod tape;
pub mod train;
pub mod vocab;

pub use decode::{masked_greedy_decode, safe_actions, DecodeMode};
pub use error::{NeuralError, Result};
pub use model::{EdgeMasks, EncoderKind, Forward, Model, ModelConfig};
pub use params::{AdamConfig, AdamState, ParamStore};
pub use tape::{Tape, Var};
pub use train::{evaluate, load_model, loss_csv, save_model, Checkpoint, Example, LossRecord, TrainConfig, Trainer};
pub use vocab::Vocab;
