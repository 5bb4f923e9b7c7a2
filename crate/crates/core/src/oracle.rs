//! The black-box classifier: a three-layer GCN with mean pooling, trained
//! once and then frozen. Every [`Oracle::predict`] is counted.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamSet, RmsProp, Tape, Var};
use crate::error::{GistError, Result};
use crate::graph::{Dataset, Graph};
use crate::nn::{Checkpoint, Linear};
use crate::rng::{derive_rng, derive_seed};

pub const ORACLE_CHECKPOINT_KIND: &str = "oracle";

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub hidden: usize,
    pub layers: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Minimum validation-loss improvement that resets the patience counter.
    pub min_delta: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            layers: 3,
            lr: 0.01,
            epochs: 50,
            batch_size: 32,
            min_delta: 1e-4,
            patience: 5,
            seed: 0,
        }
    }
}

/// Architecture stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcnShape {
    pub in_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Gcn {
    shape: GcnShape,
    params: ParamSet,
    convs: Vec<Linear>,
    head: Linear,
}

impl Gcn {
    fn new(shape: GcnShape, seed: u64) -> Result<Self> {
        if shape.in_dim == 0 || shape.hidden == 0 || shape.layers == 0 || shape.num_classes == 0 {
            return Err(GistError::Input(format!("degenerate GCN shape {shape:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut width = shape.in_dim;
        let convs = (0..shape.layers)
            .map(|l| {
                let layer = Linear::new(
                    &mut params,
                    &format!("gcn{l}"),
                    width,
                    shape.hidden,
                    &mut rng,
                );
                width = shape.hidden;
                layer
            })
            .collect();
        let head = Linear::new(
            &mut params,
            "head",
            shape.hidden,
            shape.num_classes,
            &mut rng,
        );
        Ok(Self {
            shape,
            params,
            convs,
            head,
        })
    }

    fn forward(&self, tape: &mut Tape, bound: &[Var], g: &Graph) -> Result<Var> {
        if g.feature_dim() != self.shape.in_dim {
            return Err(GistError::Shape(format!(
                "oracle trained on {} features, graph has {}",
                self.shape.in_dim,
                g.feature_dim()
            )));
        }
        let prop = tape.leaf(propagation_matrix(g.adjacency()));
        let mut h = tape.leaf(g.node_features().clone());
        for conv in &self.convs {
            let z = conv.forward(tape, bound, h);
            let z = tape.matmul(prop, z);
            h = tape.relu(z);
        }
        let pooled = tape.mean_rows(h);
        Ok(self.head.forward(tape, bound, pooled))
    }

    fn logits(&self, g: &Graph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, g)?;
        Ok(tape.value(out).iter().copied().collect())
    }

    fn loss_and_grads(&self, g: &Graph) -> Result<(f64, Vec<DMatrix<f64>>)> {
        let label = g
            .label()
            .ok_or_else(|| GistError::Input("training graph without label".into()))?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let logits = self.forward(&mut tape, &bound, g)?;
        let loss = tape.softmax_cross_entropy(logits, label);
        let grads = tape.backward(loss);
        Ok((
            tape.scalar(loss),
            bound.iter().map(|v| grads.wrt(*v)).collect(),
        ))
    }

    fn mean_loss(&self, data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for g in &data.graphs {
            let label = g
                .label()
                .ok_or_else(|| GistError::Input("graph without label".into()))?;
            let logits = self.logits(g)?;
            total += cross_entropy(&logits, label);
        }
        Ok(total / data.len() as f64)
    }
}

/// `D̂^{-1/2}(A + I)D̂^{-1/2}`.
pub fn propagation_matrix(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adjacency.nrows();
    let a_hat = adjacency + DMatrix::<f64>::identity(n, n);
    let inv_sqrt: Vec<f64> = a_hat.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * a_hat[(i, j)] * inv_sqrt[j])
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    lse - logits[label]
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A trained, frozen classifier with an invocation counter.
///
/// Parameters are only reachable through `&self`, so nothing downstream can
/// modify them. The counter is atomic and may be shared across threads.
#[derive(Debug)]
pub struct Oracle {
    gcn: Gcn,
    seed: u64,
    calls: AtomicU64,
}

impl Oracle {
    /// Untrained oracle with Glorot weights, mainly for tests.
    pub fn init(shape: GcnShape, seed: u64) -> Result<Self> {
        Ok(Self::from_gcn(Gcn::new(shape, seed)?, seed))
    }

    fn from_gcn(gcn: Gcn, seed: u64) -> Self {
        Self {
            gcn,
            seed,
            calls: AtomicU64::new(0),
        }
    }

    pub fn shape(&self) -> GcnShape {
        self.gcn.shape
    }

    pub fn num_classes(&self) -> usize {
        self.gcn.shape.num_classes
    }

    pub fn params(&self) -> &ParamSet {
        &self.gcn.params
    }

    pub fn is_frozen(&self) -> bool {
        true
    }

    /// Predicted class: argmax of the logits, ties to the lowest class.
    /// Counts as one oracle call.
    pub fn predict(&self, g: &Graph) -> Result<usize> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(argmax(&self.gcn.logits(g)?))
    }

    /// Raw logits. Not counted: reserved for oracle diagnostics such as test
    /// accuracy, never for explainer decisions.
    pub fn logits(&self, g: &Graph) -> Result<Vec<f64>> {
        self.gcn.logits(g)
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Fraction of graphs whose argmax matches their label (uncounted).
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut hits = 0;
        for g in &data.graphs {
            if Some(argmax(&self.gcn.logits(g)?)) == g.label() {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Differentiable forward pass for gradient checks.
    pub fn forward_on_tape(&self, tape: &mut Tape, bound: &[Var], g: &Graph) -> Result<Var> {
        self.gcn.forward(tape, bound, g)
    }

    pub fn to_checkpoint(&self) -> Checkpoint<GcnShape> {
        Checkpoint::new(
            ORACLE_CHECKPOINT_KIND,
            self.seed,
            self.gcn.shape,
            self.gcn.params.to_flat(),
        )
    }

    /// Restores a frozen oracle with a fresh counter.
    pub fn from_checkpoint(ck: &Checkpoint<GcnShape>) -> Result<Self> {
        let mut gcn = Gcn::new(ck.config, ck.rng_seed)?;
        gcn.params.load_flat(&ck.params)?;
        Ok(Self::from_gcn(gcn, ck.rng_seed))
    }
}

/// Summary of an oracle training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

fn check_dims(train: &Dataset, val: Option<&Dataset>) -> Result<usize> {
    let d = train.feature_dim();
    let all = train
        .graphs
        .iter()
        .chain(val.into_iter().flat_map(|v| v.graphs.iter()));
    for g in all {
        if g.feature_dim() != d {
            return Err(GistError::Shape(format!(
                "inconsistent feature dims {} and {d}",
                g.feature_dim()
            )));
        }
        if g.label().is_none() {
            return Err(GistError::Input("training graph without label".into()));
        }
    }
    Ok(d)
}

/// Cross-entropy training with RMSprop and mini-batches. Validation loss is
/// tracked each epoch; training stops once it has failed to improve by
/// `min_delta` for `patience` epochs, and the best parameters are kept. With
/// no validation set the training loss is monitored instead.
pub fn train_oracle(
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &OracleConfig,
) -> Result<(Oracle, TrainLog)> {
    if train.is_empty() {
        return Err(GistError::Input("empty training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(GistError::Input("batch_size must be positive".into()));
    }
    let in_dim = check_dims(train, val)?;
    let shape = GcnShape {
        in_dim,
        hidden: cfg.hidden,
        layers: cfg.layers,
        num_classes: train.num_classes,
    };
    let init_seed = derive_seed(cfg.seed, 0);
    let mut gcn = Gcn::new(shape, init_seed)?;
    let mut opt = RmsProp::new(&gcn.params, cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog {
        epochs_run: 0,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
    };
    let mut best = (f64::INFINITY, gcn.params.clone());
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut derive_rng(cfg.seed, 1 + epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Vec<DMatrix<f64>> = gcn
                .params
                .values()
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect();
            for &i in batch {
                let (loss, grads) = gcn.loss_and_grads(&train.graphs[i])?;
                epoch_loss += loss;
                for (a, g) in acc.iter_mut().zip(grads) {
                    *a += g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for a in &mut acc {
                *a *= scale;
            }
            opt.step(&mut gcn.params, &acc);
        }
        log.train_loss.push(epoch_loss / train.len() as f64);
        let monitored = match val {
            Some(v) if !v.is_empty() => gcn.mean_loss(v)?,
            _ => gcn.mean_loss(train)?,
        };
        log.val_loss.push(monitored);
        log.epochs_run = epoch + 1;
        if monitored < best.0 - cfg.min_delta {
            best = (monitored, gcn.params.clone());
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    gcn.params = best.1;
    Ok((Oracle::from_gcn(gcn, init_seed), log))
}
