//! Jumping past the decision boundary to a known graph of another class.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{GistError, Result};
use crate::graph::{Dataset, Graph, LaplacianKind};
use crate::oracle::Oracle;
use crate::spectral::frobenius_diff;

#[derive(Debug, Clone, PartialEq)]
pub struct Overshoot {
    pub graph: Graph,
    /// Position of the chosen graph in the pool.
    pub index: usize,
    /// Oracle class of the input.
    pub input_class: usize,
    pub oracle_class: usize,
    /// Candidates evaluated by the oracle (excluding the input itself).
    pub scanned: u64,
}

/// Shuffles the pool and returns the first graph the oracle assigns to a
/// class other than that of `g`. Costs `1 + scanned` oracle calls.
pub fn overshoot(
    g: &Graph,
    pool: &Dataset,
    oracle: &Oracle,
    rng: &mut impl Rng,
) -> Result<Overshoot> {
    let input_class = oracle.predict(g)?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    let mut scanned = 0;
    for idx in order {
        let cand = &pool.graphs[idx];
        scanned += 1;
        let class = oracle.predict(cand)?;
        if class != input_class {
            return Ok(Overshoot {
                graph: cand.clone(),
                index: idx,
                input_class,
                oracle_class: class,
                scanned,
            });
        }
    }
    Err(GistError::NoCounterfactualPool { class: input_class })
}

/// Among all differently classified pool graphs, returns the one minimizing
/// `(1−alpha)·‖L(candidate) − L(g)‖_F` after padding to a common size. Ties
/// go to the lowest pool index. Costs `1 + |pool|` oracle calls.
pub fn smart_overshoot(
    g: &Graph,
    pool: &Dataset,
    oracle: &Oracle,
    alpha: f64,
    kind: LaplacianKind,
) -> Result<Overshoot> {
    let input_class = oracle.predict(g)?;
    let mut best: Option<(f64, usize, usize)> = None;
    for (idx, cand) in pool.graphs.iter().enumerate() {
        let class = oracle.predict(cand)?;
        if class == input_class {
            continue;
        }
        let m = g.num_nodes().max(cand.num_nodes());
        let lg = g.pad_to(m)?.laplacian(kind);
        let lc = cand.pad_to(m)?.laplacian(kind);
        let score = (1.0 - alpha) * frobenius_diff(&lc, &lg)?;
        if best.map_or(true, |(s, _, _)| score < s) {
            best = Some((score, idx, class));
        }
    }
    let (_, index, oracle_class) =
        best.ok_or(GistError::NoCounterfactualPool { class: input_class })?;
    Ok(Overshoot {
        graph: pool.graphs[index].clone(),
        index,
        input_class,
        oracle_class,
        scanned: pool.len() as u64,
    })
}
