//! Learning the reverse transformation from `Gε` back toward `G`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::overshoot::{overshoot, smart_overshoot, Overshoot};
use super::{Counterfactual, GistConfig, OvershootStrategy, SampleMode, BCE_CLAMP};
use crate::autodiff::{Adam, Tape, Var};
use crate::error::{GistError, Result};
use crate::graph::{Dataset, Graph};
use crate::nn::{logistic_noise_matrix, GistModel};
use crate::oracle::Oracle;
use crate::rng::{derive_rng, derive_seed};
use crate::spectral::padded_spectrum;

/// Concrete output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub features: DMatrix<f64>,
    pub soft_adjacency: DMatrix<f64>,
    /// Binary symmetric adjacency with zero diagonal.
    pub adjacency: DMatrix<f64>,
}

impl ForwardOutput {
    pub fn to_graph(&self) -> Graph {
        Graph::new(self.features.clone(), self.adjacency.clone(), None)
            .expect("forward pass emits a symmetric binary adjacency")
    }
}

/// Runs the trained network on `ge` and reads off `G*`. In deterministic
/// mode no noise is drawn and pairs with ρ > 0.5 become edges; in Bernoulli
/// mode ρ is computed under Gumbel noise and each pair is drawn once.
pub fn gist_forward(
    ge: &Graph,
    model: &GistModel,
    cfg: &GistConfig,
    rng: &mut impl Rng,
) -> Result<ForwardOutput> {
    let n = ge.num_nodes();
    let noise = match cfg.mode {
        SampleMode::Deterministic => DMatrix::zeros(n, n),
        SampleMode::Bernoulli => logistic_noise_matrix(n, rng),
    };
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let out = model.forward(&mut tape, &bound, ge, &noise, &cfg.gumbel())?;
    let rho = tape.value(out.soft_adjacency).clone();
    let adjacency = read_edges(&rho, cfg.mode, rng);
    Ok(ForwardOutput {
        features: tape.value(out.features).clone(),
        soft_adjacency: rho,
        adjacency,
    })
}

/// Binary edge set from the relaxed adjacency: threshold at 0.5, or one
/// Bernoulli draw per unordered pair.
fn read_edges(rho: &DMatrix<f64>, mode: SampleMode, rng: &mut impl Rng) -> DMatrix<f64> {
    let n = rho.nrows();
    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let keep = match mode {
                SampleMode::Deterministic => rho[(i, j)] > 0.5,
                SampleMode::Bernoulli => rng.gen_bool(rho[(i, j)].clamp(0.0, 1.0)),
            };
            if keep {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
    }
    adjacency
}

/// Loss nodes recorded on the tape.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    /// `‖X* − Xε‖₁ + BCE(ρ, Aε)`.
    pub content: Var,
    /// `Σ|λ_i(L(G)) − λ_i(L(ρ))|` over the padded spectra.
    pub style: Var,
}

/// Records the training loss for the pair `(g, ge)` on `tape`:
/// `alpha·content + (1−alpha)·style`. The style term uses the Laplacian of
/// the relaxed adjacency ρ so it stays differentiable; both graphs are padded
/// to the larger size.
pub fn gist_loss(
    tape: &mut Tape,
    bound: &[Var],
    model: &GistModel,
    g: &Graph,
    ge: &Graph,
    noise: &DMatrix<f64>,
    cfg: &GistConfig,
) -> Result<LossParts> {
    let m = g.num_nodes().max(ge.num_nodes());
    let target = padded_spectrum(g, m, cfg.laplacian)?;
    style_and_content(tape, bound, model, ge, target.values(), noise, cfg)
}

fn style_and_content(
    tape: &mut Tape,
    bound: &[Var],
    model: &GistModel,
    ge: &Graph,
    target_spectrum: &[f64],
    noise: &DMatrix<f64>,
    cfg: &GistConfig,
) -> Result<LossParts> {
    let m = target_spectrum.len();
    if m < ge.num_nodes() {
        return Err(GistError::Size(format!(
            "target spectrum of length {m} for an overshoot graph of {} nodes",
            ge.num_nodes()
        )));
    }
    let out = model.forward(tape, bound, ge, noise, &cfg.gumbel())?;
    let l1 = tape.l1_to(out.features, ge.node_features());
    let bce = tape.bce_off_diagonal(out.soft_adjacency, ge.adjacency(), BCE_CLAMP.0, BCE_CLAMP.1);
    let content = tape.add(l1, bce);
    let rho = if m > ge.num_nodes() {
        tape.pad(out.soft_adjacency, m)
    } else {
        out.soft_adjacency
    };
    let lap = tape.laplacian(rho, cfg.laplacian);
    let eig = tape.eigvals(lap);
    let target = DMatrix::from_column_slice(m, 1, target_spectrum);
    let style = tape.l1_to(eig, &target);
    let a = tape.scale(content, cfg.alpha);
    let b = tape.scale(style, 1.0 - cfg.alpha);
    let total = tape.add(a, b);
    Ok(LossParts {
        total,
        content,
        style,
    })
}

/// Noise-free loss value, used for monitoring.
pub fn gist_loss_value(model: &GistModel, g: &Graph, ge: &Graph, cfg: &GistConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let n = ge.num_nodes();
    let parts = gist_loss(&mut tape, &bound, model, g, ge, &DMatrix::zeros(n, n), cfg)?;
    Ok(tape.scalar(parts.total))
}

/// One fixed `(G, Gε)` training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input_index: usize,
    pub overshoot_index: usize,
    /// Padded target spectrum of the input graph.
    target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Oracle calls spent forming the pairs.
    pub pairing_calls: u64,
}

fn pick_overshoot(
    g: &Graph,
    pool: &Dataset,
    oracle: &Oracle,
    cfg: &GistConfig,
    rng: &mut impl Rng,
) -> Result<Overshoot> {
    match cfg.overshoot {
        OvershootStrategy::Random => overshoot(g, pool, oracle, rng),
        OvershootStrategy::Smart => smart_overshoot(g, pool, oracle, cfg.alpha, cfg.laplacian),
    }
}

/// Builds the fixed training pairs: each training graph is overshot once
/// against the training set itself.
pub fn training_pairs(
    train: &Dataset,
    oracle: &Oracle,
    cfg: &GistConfig,
) -> Result<Vec<TrainingPair>> {
    train
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = derive_rng(derive_seed(cfg.seed, 1), i as u64);
            let o = pick_overshoot(g, train, oracle, cfg, &mut rng)?;
            let m = g.num_nodes().max(o.graph.num_nodes());
            Ok(TrainingPair {
                input_index: i,
                overshoot_index: o.index,
                target: padded_spectrum(g, m, cfg.laplacian)?.into_values(),
            })
        })
        .collect()
}

/// Trains one shared model over all fixed pairs of `train` with Adam and
/// gradient accumulation over `batch_size` pairs. The oracle is consulted
/// only while the pairs are formed.
pub fn train_gist(
    train: &Dataset,
    oracle: &Oracle,
    cfg: &GistConfig,
) -> Result<(GistModel, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(GistError::Input("empty training set".into()));
    }
    let before = oracle.call_count();
    let pairs = training_pairs(train, oracle, cfg)?;
    let pairing_calls = oracle.call_count() - before;
    let mut model = GistModel::new(
        cfg.model_config(train.feature_dim()),
        derive_seed(cfg.seed, 2),
    )?;
    let epoch_loss = fit(&mut model, train, &pairs, cfg, |_, _| {})?;
    Ok((
        model,
        TrainReport {
            epoch_loss,
            pairing_calls,
        },
    ))
}

/// Optimizes `model` in place over `pairs`; returns the mean loss per epoch.
/// `on_epoch` sees the model after every epoch.
pub fn fit<F>(
    model: &mut GistModel,
    data: &Dataset,
    pairs: &[TrainingPair],
    cfg: &GistConfig,
    mut on_epoch: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, &GistModel),
{
    let mut opt = Adam::new(model.params(), cfg.lr, cfg.weight_decay);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let epoch_seed = derive_seed(derive_seed(cfg.seed, 3), epoch as u64);
        order.shuffle(&mut derive_rng(epoch_seed, u64::MAX));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Vec<DMatrix<f64>> = model
                .params()
                .values()
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect();
            for &p in batch {
                let pair = &pairs[p];
                let ge = &data.graphs[pair.overshoot_index];
                let noise =
                    logistic_noise_matrix(ge.num_nodes(), &mut derive_rng(epoch_seed, p as u64));
                let mut tape = Tape::new();
                let bound = model.params().bind(&mut tape);
                let parts =
                    style_and_content(&mut tape, &bound, model, ge, &pair.target, &noise, cfg)?;
                total += tape.scalar(parts.total);
                let grads = tape.backward(parts.total);
                for (a, v) in acc.iter_mut().zip(&bound) {
                    *a += grads.wrt(*v);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for a in &mut acc {
                *a *= scale;
            }
            opt.step(model.params_mut(), &acc);
        }
        history.push(total / pairs.len().max(1) as f64);
        on_epoch(epoch, model);
    }
    Ok(history)
}

/// Overshoots `g` against `pool`, backtracks with the trained model and
/// checks the result with one more oracle call.
pub fn explain(
    model: &GistModel,
    g: &Graph,
    pool: &Dataset,
    oracle: &Oracle,
    cfg: &GistConfig,
    rng: &mut impl Rng,
) -> Result<Counterfactual> {
    let before = oracle.call_count();
    let o = pick_overshoot(g, pool, oracle, cfg, rng)?;
    let out = gist_forward(&o.graph, model, cfg, rng)?;
    let result = out.to_graph();
    let result_class = oracle.predict(&result)?;
    Ok(Counterfactual {
        input: g.clone(),
        overshoot: o.graph,
        result,
        input_class: o.input_class,
        result_class,
        valid: result_class != o.input_class,
        oracle_calls_used: oracle.call_count() - before,
        soft_edges: out.soft_adjacency,
    })
}
