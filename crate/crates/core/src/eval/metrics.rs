//! Per-instance counterfactual metrics.

use crate::error::{GistError, Result};
use crate::graph::Graph;
use crate::oracle::Oracle;

/// Feature rows closer than this in L1 count as unchanged.
pub const FEATURE_TOL: f64 = 1e-9;

/// `1[Φ(G) ≠ Φ(G*)]`. Costs two oracle calls.
pub fn validity(g: &Graph, gstar: &Graph, oracle: &Oracle) -> Result<u8> {
    Ok(validity_from_classes(
        oracle.predict(g)?,
        oracle.predict(gstar)?,
    ))
}

pub fn validity_from_classes(input_class: usize, result_class: usize) -> u8 {
    u8::from(input_class != result_class)
}

/// `χ(G) − 1[Φ(G*) = y]` with `χ(G) = 1[Φ(G) = y]`. Costs two oracle calls.
pub fn fidelity(g: &Graph, y: usize, gstar: &Graph, oracle: &Oracle) -> Result<i8> {
    Ok(fidelity_from_classes(
        oracle.predict(g)?,
        oracle.predict(gstar)?,
        y,
    ))
}

pub fn fidelity_from_classes(input_class: usize, result_class: usize, y: usize) -> i8 {
    i8::from(input_class == y) - i8::from(result_class == y)
}

/// Edit distance under positional node identity.
///
/// Node `i` of one graph is node `i` of the other. The cost is one per node
/// present in only one graph, one per node of the common prefix whose feature
/// row changed, and one per node pair that is an edge in exactly one graph.
/// Edges touching a node that only one graph has are counted too, as they
/// must be deleted along with the node.
pub fn ged(g: &Graph, h: &Graph) -> f64 {
    let (ng, nh) = (g.num_nodes(), h.num_nodes());
    let common = ng.min(nh);
    let mut cost = ng.abs_diff(nh);
    let same_dim = g.feature_dim() == h.feature_dim();
    for i in 0..common {
        let changed = !same_dim
            || (g.node_features().row(i) - h.node_features().row(i))
                .abs()
                .sum()
                > FEATURE_TOL;
        cost += usize::from(changed);
    }
    let edge =
        |a: &Graph, n: usize, i: usize, j: usize| i < n && j < n && a.adjacency()[(i, j)] != 0.0;
    let m = ng.max(nh);
    for i in 0..m {
        for j in i + 1..m {
            cost += usize::from(edge(g, ng, i, j) != edge(h, nh, i, j));
        }
    }
    cost as f64
}

/// `ged(G, G*) / (|V(G)| + |E(G)|)`.
pub fn sparsity(g: &Graph, gstar: &Graph) -> Result<f64> {
    let size = g.num_nodes() + g.num_edges();
    if size == 0 {
        return Err(GistError::Input("sparsity of an empty graph".into()));
    }
    Ok(ged(g, gstar) / size as f64)
}
