//! Differentiable building blocks of the backtracking network.

use nalgebra::DMatrix;
use rand::Rng;

use crate::autodiff::{ParamSet, Tape, Var};

/// Affine map `x W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    weight: usize,
    bias: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            weight: params.add_glorot(format!("{name}.weight"), fan_in, fan_out, rng),
            bias: params.add_zeros(format!("{name}.bias"), 1, fan_out),
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Var {
        let h = tape.matmul(x, bound[self.weight]);
        tape.add_row(h, bound[self.bias])
    }
}

/// 1 on edges and on the diagonal: each node attends to its neighbors and
/// itself.
pub fn attention_mask(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adjacency.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j || adjacency[(i, j)] != 0.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// Multi-head graph transformer convolution.
///
/// For head `h`, node `i` attends over `N(i) ∪ {i}` with weights
/// `softmax_j(q_i·k_j / √d_h)` and aggregates the values `v_j`; heads are
/// concatenated and a skip projection of `x_i` is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformerConv {
    query: Linear,
    key: Linear,
    value: Linear,
    skip: Linear,
    pub heads: usize,
    pub out_dim: usize,
}

/// Output of [`TransformerConv::forward`] with the per-head attention matrices.
#[derive(Debug, Clone)]
pub struct ConvOutput {
    pub out: Var,
    pub attention: Vec<Var>,
}

impl TransformerConv {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(
            heads > 0 && out_dim % heads == 0,
            "output width {out_dim} must split evenly over {heads} heads"
        );
        Self {
            query: Linear::new(params, &format!("{name}.query"), in_dim, out_dim, rng),
            key: Linear::new(params, &format!("{name}.key"), in_dim, out_dim, rng),
            value: Linear::new(params, &format!("{name}.value"), in_dim, out_dim, rng),
            skip: Linear::new(params, &format!("{name}.skip"), in_dim, out_dim, rng),
            heads,
            out_dim,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        x: Var,
        mask: &DMatrix<f64>,
    ) -> ConvOutput {
        let head_dim = self.out_dim / self.heads;
        let q = self.query.forward(tape, bound, x);
        let k = self.key.forward(tape, bound, x);
        let v = self.value.forward(tape, bound, x);
        let mut outputs = Vec::with_capacity(self.heads);
        let mut attention = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice_cols(q, h * head_dim, head_dim);
            let kh = tape.slice_cols(k, h * head_dim, head_dim);
            let vh = tape.slice_cols(v, h * head_dim, head_dim);
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt);
            let scores = tape.scale(scores, 1.0 / (head_dim as f64).sqrt());
            let weights = tape.masked_softmax(scores, mask);
            outputs.push(tape.matmul(weights, vh));
            attention.push(weights);
        }
        let merged = if outputs.len() == 1 {
            outputs[0]
        } else {
            tape.concat_cols(&outputs)
        };
        let skip = self.skip.forward(tape, bound, x);
        ConvOutput {
            out: tape.add(merged, skip),
            attention,
        }
    }
}

/// Two-layer perceptron over node pairs `[x_i ‖ x_j ‖ a_ij]`, where `a_ij`
/// is the pair's entry in the adjacency the encoder ran on.
///
/// The first layer is split into source, destination and adjacency parts so
/// the hidden pre-activation of every pair is
/// `x_i W_src + x_j W_dst + a_ij w_adj + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeMlp {
    src: usize,
    dst: usize,
    adj: usize,
    hidden_bias: usize,
    out: Linear,
    pub hidden: usize,
}

impl EdgeMlp {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let limit = (6.0 / (2 * in_dim + hidden) as f64).sqrt();
        let mut half = |label: &str, rng: &mut dyn rand::RngCore| {
            let m = DMatrix::from_fn(in_dim, hidden, |_, _| rng.gen_range(-limit..limit));
            params.add(format!("{name}.{label}"), m)
        };
        let src = half("src", rng);
        let dst = half("dst", rng);
        let adj = {
            let m = DMatrix::from_fn(1, hidden, |_, _| rng.gen_range(-limit..limit));
            params.add(format!("{name}.adj"), m)
        };
        let hidden_bias = params.add_zeros(format!("{name}.hidden_bias"), 1, hidden);
        let out = Linear::new(params, &format!("{name}.out"), hidden, 1, rng);
        Self {
            src,
            dst,
            adj,
            hidden_bias,
            out,
            hidden,
        }
    }

    /// Symmetric n×n edge probabilities with a zero diagonal.
    pub fn edge_scores(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        x: Var,
        adjacency: &DMatrix<f64>,
    ) -> Var {
        let n = tape.value(x).nrows();
        let u = tape.matmul(x, bound[self.src]);
        let v = tape.matmul(x, bound[self.dst]);
        let pairs = tape.pair_sum(u, v);
        let flat = tape.leaf(DMatrix::from_fn(n * n, 1, |r, _| adjacency[(r / n, r % n)]));
        let adj = tape.matmul(flat, bound[self.adj]);
        let pairs = tape.add(pairs, adj);
        let pairs = tape.add_row(pairs, bound[self.hidden_bias]);
        let hidden = tape.relu(pairs);
        let logits = self.out.forward(tape, bound, hidden);
        let logits = tape.reshape(logits, n, n);
        let p = tape.sigmoid(logits);
        tape.symmetrize_zero_diag(p)
    }
}
