//! Neural components of the backtracking network.

mod checkpoint;
mod gumbel;
mod layers;
mod model;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gumbel::{gumbel_sigmoid, logistic_noise, logistic_noise_matrix, GumbelConfig};
pub use layers::{attention_mask, ConvOutput, EdgeMlp, Linear, TransformerConv};
pub use model::{ForwardVars, GistModel, ModelConfig, GIST_CHECKPOINT_KIND};
