//! The backtracking network: transformer-conv encoder over the overshoot
//! graph, an edge MLP producing soft adjacency, and a projector back to the
//! input feature space.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::gumbel::GumbelConfig;
use super::layers::{attention_mask, EdgeMlp, Linear, TransformerConv};
use crate::autodiff::{ParamSet, Tape, Var};
use crate::error::{GistError, Result};
use crate::graph::Graph;

pub const GIST_CHECKPOINT_KIND: &str = "gist";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub in_dim: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub mlp_hidden: usize,
}

impl ModelConfig {
    pub fn new(in_dim: usize, embed_dim: usize, heads: usize) -> Self {
        Self {
            in_dim,
            embed_dim,
            heads,
            layers: 2,
            mlp_hidden: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.embed_dim == 0 || self.layers == 0 || self.mlp_hidden == 0 {
            return Err(GistError::Input(format!(
                "degenerate model config {self:?}"
            )));
        }
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            return Err(GistError::Input(format!(
                "embed_dim {} is not divisible by {} heads",
                self.embed_dim, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GistModel {
    config: ModelConfig,
    params: ParamSet,
    convs: Vec<TransformerConv>,
    edge_mlp: EdgeMlp,
    projector: Linear,
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardVars {
    /// Reconstructed features, n×d.
    pub features: Var,
    /// Edge probabilities before the relaxation.
    pub probs: Var,
    /// Relaxed adjacency ρ.
    pub soft_adjacency: Var,
}

impl GistModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut convs = Vec::with_capacity(config.layers);
        let mut width = config.in_dim;
        for l in 0..config.layers {
            convs.push(TransformerConv::new(
                &mut params,
                &format!("conv{l}"),
                width,
                config.embed_dim,
                config.heads,
                &mut rng,
            ));
            width = config.embed_dim;
        }
        let edge_mlp = EdgeMlp::new(
            &mut params,
            "edge_mlp",
            config.embed_dim,
            config.mlp_hidden,
            &mut rng,
        );
        let projector = Linear::new(
            &mut params,
            "projector",
            config.embed_dim,
            config.in_dim,
            &mut rng,
        );
        Ok(Self {
            config,
            params,
            convs,
            edge_mlp,
            projector,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Runs the network on `overshoot`. `noise` is the Gumbel noise matrix
    /// (zeros for deterministic inference); `bound` are the parameter leaves
    /// from [`ParamSet::bind`].
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        overshoot: &Graph,
        noise: &DMatrix<f64>,
        gumbel: &GumbelConfig,
    ) -> Result<ForwardVars> {
        let n = overshoot.num_nodes();
        if overshoot.feature_dim() != self.config.in_dim {
            return Err(GistError::Shape(format!(
                "model expects {} input features, graph has {}",
                self.config.in_dim,
                overshoot.feature_dim()
            )));
        }
        if noise.shape() != (n, n) {
            return Err(GistError::Shape(format!(
                "noise matrix {:?} for a graph of {n} nodes",
                noise.shape()
            )));
        }
        let mask = attention_mask(overshoot.adjacency());
        let mut h = tape.leaf(overshoot.node_features().clone());
        let mut pre = h;
        for conv in &self.convs {
            pre = conv.forward(tape, bound, h, &mask).out;
            h = tape.relu(pre);
        }
        let probs = self
            .edge_mlp
            .edge_scores(tape, bound, h, overshoot.adjacency());
        let soft_adjacency =
            tape.gumbel_sigmoid(probs, noise, gumbel.temperature(), gumbel.epsilon());
        let features = self.projector.forward(tape, bound, pre);
        Ok(ForwardVars {
            features,
            probs,
            soft_adjacency,
        })
    }

    pub fn to_checkpoint(&self, rng_seed: u64) -> Checkpoint<ModelConfig> {
        Checkpoint::new(
            GIST_CHECKPOINT_KIND,
            rng_seed,
            self.config,
            self.params.to_flat(),
        )
    }

    pub fn from_checkpoint(ck: &Checkpoint<ModelConfig>) -> Result<Self> {
        let mut model = Self::new(ck.config, ck.rng_seed)?;
        model.params.load_flat(&ck.params)?;
        Ok(model)
    }
}
