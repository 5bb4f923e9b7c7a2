//! Random edge-flip baseline.

use rand::Rng;

use super::Counterfactual;
use crate::error::{GistError, Result};
use crate::graph::Graph;
use crate::oracle::Oracle;

/// Default per-pair flip probability.
pub const IRAND_FLIP_PROB: f64 = 0.01;
/// Default number of attempts.
pub const IRAND_ROUNDS: usize = 3;

/// Up to `t` rounds, each flipping every node pair independently with
/// probability `p` (starting from `g`) and querying the oracle. Returns the
/// first class-changing perturbation, or the last attempt marked invalid.
pub fn irand_explain(
    g: &Graph,
    oracle: &Oracle,
    p: f64,
    t: usize,
    rng: &mut impl Rng,
) -> Result<Counterfactual> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GistError::Input(format!(
            "flip probability {p} outside (0,1)"
        )));
    }
    if t == 0 {
        return Err(GistError::Input("iRand needs at least one round".into()));
    }
    let before = oracle.call_count();
    let input_class = oracle.predict(g)?;
    let n = g.num_nodes();
    let mut last = None;
    for _ in 0..t {
        let mut a = g.adjacency().clone();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    let v = if a[(i, j)] != 0.0 { 0.0 } else { 1.0 };
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
        }
        let candidate = Graph::new(g.node_features().clone(), a, None)?;
        let class = oracle.predict(&candidate)?;
        let found = class != input_class;
        last = Some((candidate, class));
        if found {
            break;
        }
    }
    let (result, result_class) = last.expect("t ≥ 1");
    Ok(Counterfactual {
        input: g.clone(),
        overshoot: g.clone(),
        soft_edges: result.adjacency().clone(),
        result,
        input_class,
        result_class,
        valid: result_class != input_class,
        oracle_calls_used: oracle.call_count() - before,
    })
}
