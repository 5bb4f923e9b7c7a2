//! Overshoot-then-backtrack counterfactual search, and the random edge-flip
//! baseline.

mod backtrack;
mod irand;
mod overshoot;

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GistError, Result};
use crate::graph::{Graph, LaplacianKind};

pub use backtrack::{
    explain, fit, gist_forward, gist_loss, gist_loss_value, train_gist, training_pairs,
    ForwardOutput, LossParts, TrainReport, TrainingPair,
};
pub use irand::{irand_explain, IRAND_FLIP_PROB, IRAND_ROUNDS};
pub use overshoot::{overshoot, smart_overshoot, Overshoot};

/// Lower and upper clamp applied to ρ inside the cross-entropy term.
pub const BCE_CLAMP: (f64, f64) = (1e-7, 1.0 - 1e-7);

/// How the final edge set is read off the relaxed adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// No Gumbel noise, keep pairs with ρ > 0.5.
    #[default]
    Deterministic,
    /// Gumbel noise, then one Bernoulli draw per pair.
    Bernoulli,
}

impl FromStr for SampleMode {
    type Err = GistError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Self::Deterministic),
            "bernoulli" => Ok(Self::Bernoulli),
            other => Err(GistError::Input(format!(
                "unknown mode `{other}` (expected deterministic or bernoulli)"
            ))),
        }
    }
}

/// Rule for picking the overshoot graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OvershootStrategy {
    /// First differently classified graph in a seeded shuffle of the pool.
    #[default]
    Random,
    /// Differently classified graph with the closest Laplacian.
    Smart,
}

impl FromStr for OvershootStrategy {
    type Err = GistError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "smart" => Ok(Self::Smart),
            other => Err(GistError::Input(format!(
                "unknown overshoot `{other}` (expected random or smart)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GistConfig {
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub mlp_hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub temperature: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: SampleMode,
    pub overshoot: OvershootStrategy,
    /// Laplacian used by the style term.
    pub laplacian: LaplacianKind,
}

impl Default for GistConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            epochs: 50,
            batch_size: 16,
            heads: 2,
            embed_dim: 16,
            layers: 2,
            mlp_hidden: 16,
            lr: 1e-3,
            weight_decay: 1e-5,
            temperature: 1.0,
            epsilon: 1e-7,
            seed: 0,
            mode: SampleMode::Deterministic,
            overshoot: OvershootStrategy::Random,
            laplacian: LaplacianKind::Normalized,
        }
    }
}

impl GistConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(GistError::Input(format!(
                "alpha {} outside [0,1]",
                self.alpha
            )));
        }
        if self.batch_size == 0 {
            return Err(GistError::Input("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(GistError::Input(
                "lr must be positive, weight_decay non-negative".into(),
            ));
        }
        crate::nn::GumbelConfig::new(self.temperature, self.epsilon, self.seed)?;
        self.model_config(1).validate()
    }

    pub fn model_config(&self, in_dim: usize) -> crate::nn::ModelConfig {
        crate::nn::ModelConfig {
            in_dim,
            embed_dim: self.embed_dim,
            heads: self.heads,
            layers: self.layers,
            mlp_hidden: self.mlp_hidden,
        }
    }

    pub fn gumbel(&self) -> crate::nn::GumbelConfig {
        crate::nn::GumbelConfig::new(self.temperature, self.epsilon, self.seed)
            .expect("validated config")
    }
}

/// The triple `(G, Gε, G*)` with its validity verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    pub input: Graph,
    pub overshoot: Graph,
    pub result: Graph,
    pub input_class: usize,
    pub result_class: usize,
    pub valid: bool,
    pub oracle_calls_used: u64,
    /// Relaxed adjacency ρ the result was read from.
    pub soft_edges: DMatrix<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_enums() {
        assert_eq!(
            "bernoulli".parse::<SampleMode>().unwrap(),
            SampleMode::Bernoulli
        );
        assert_eq!(
            "smart".parse::<OvershootStrategy>().unwrap(),
            OvershootStrategy::Smart
        );
        assert!("greedy".parse::<OvershootStrategy>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GistConfig::default().validate().is_ok());
        let bad = GistConfig {
            alpha: 1.2,
            ..GistConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad_heads = GistConfig {
            heads: 3,
            ..GistConfig::default()
        };
        assert!(bad_heads.validate().is_err());
    }
}
