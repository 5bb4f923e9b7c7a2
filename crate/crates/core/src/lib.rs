//! Backtracking graph counterfactual explanations.
//!
//! Given a graph `G` and a frozen classifier, the explainer first jumps to a
//! known graph `Gε` of a different class, then learns a reverse
//! transformation that keeps the local content of `Gε` while pulling the
//! Laplacian spectrum back toward that of `G`.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod explainer;
pub mod graph;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod spectral;

pub use error::{GistError, Result};
pub use graph::{Dataset, Graph, LaplacianKind};
