//! Reverse-mode differentiation over dense matrices, parameters, and
//! optimizers.

pub mod gradcheck;
mod optim;
mod params;
mod tape;

pub use optim::{Adam, RmsProp};
pub use params::{FlatParam, ParamSet};
pub(crate) use tape::open_sigmoid;
pub use tape::{eigen_degeneracy_counts, Gradients, Tape, Var, DEGENERACY_GAP};
