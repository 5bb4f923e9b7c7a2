//! Dense graph representation and Laplacian construction.
//!
//! Every graph in the pipeline is small (tens of nodes), so adjacency and
//! feature matrices are stored dense. Node identity is positional: node `i`
//! of one graph is compared against node `i` of another.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GistError, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Which Laplacian to build from an adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianKind {
    /// `D - A`
    Combinatorial,
    /// `D^{-1/2} (D - A) D^{-1/2}`, with zero-degree nodes contributing 0.
    #[default]
    Normalized,
}

impl std::str::FromStr for LaplacianKind {
    type Err = GistError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combinatorial" => Ok(Self::Combinatorial),
            "normalized" => Ok(Self::Normalized),
            other => Err(GistError::Input(format!(
                "unknown laplacian kind `{other}`"
            ))),
        }
    }
}

/// Node features `X` (n×d) plus a symmetric, zero-diagonal adjacency `A` (n×n).
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_features: DMatrix<f64>,
    adjacency: DMatrix<f64>,
    label: Option<usize>,
}

impl Graph {
    /// Builds a graph after checking the adjacency invariants.
    pub fn new(
        node_features: DMatrix<f64>,
        adjacency: DMatrix<f64>,
        label: Option<usize>,
    ) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(GistError::Shape(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        if node_features.nrows() != n {
            return Err(GistError::Shape(format!(
                "{} feature rows for {} nodes",
                node_features.nrows(),
                n
            )));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(GistError::Input(format!("self-loop on node {i}")));
            }
            for j in (i + 1)..n {
                let (a, b) = (adjacency[(i, j)], adjacency[(j, i)]);
                if !a.is_finite() || a < 0.0 {
                    return Err(GistError::Input(format!(
                        "adjacency entry ({i},{j}) = {a} is not a finite non-negative weight"
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(GistError::Input(format!(
                        "adjacency is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            node_features,
            adjacency,
            label,
        })
    }

    /// Builds a binary graph from an undirected edge list.
    pub fn from_edges(
        node_features: DMatrix<f64>,
        edges: &[(usize, usize)],
        label: Option<usize>,
    ) -> Result<Self> {
        let n = node_features.nrows();
        let mut adjacency = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(GistError::Input(format!(
                    "edge ({i},{j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(GistError::Input(format!("self-loop on node {i}")));
            }
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
        }
        Self::new(node_features, adjacency, label)
    }

    /// Edgeless graph with `n` nodes and `d` zero features.
    pub fn empty(n: usize, d: usize) -> Self {
        Self {
            node_features: DMatrix::zeros(n, d),
            adjacency: DMatrix::zeros(n, n),
            label: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.ncols()
    }

    pub fn node_features(&self) -> &DMatrix<f64> {
        &self.node_features
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    /// Undirected edges `(i, j)` with `i < j` and a nonzero weight, row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    pub fn degrees(&self) -> DVector<f64> {
        row_sums(&self.adjacency)
    }

    pub fn laplacian(&self, kind: LaplacianKind) -> DMatrix<f64> {
        laplacian_from_adjacency(&self.adjacency, kind)
    }

    /// Appends `m - n` isolated nodes with zero feature rows.
    pub fn pad_to(&self, m: usize) -> Result<Self> {
        let n = self.num_nodes();
        if m < n {
            return Err(GistError::Size(format!(
                "cannot pad a graph with {n} nodes down to {m}"
            )));
        }
        let d = self.feature_dim();
        let mut features = DMatrix::zeros(m, d);
        features
            .view_mut((0, 0), (n, d))
            .copy_from(&self.node_features);
        let mut adjacency = DMatrix::zeros(m, m);
        adjacency
            .view_mut((0, 0), (n, n))
            .copy_from(&self.adjacency);
        Ok(Self {
            node_features: features,
            adjacency,
            label: self.label,
        })
    }

    /// Breadth-first reachability from node 0 over nonzero adjacency entries.
    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && self.adjacency[(u, v)] != 0.0 {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == n
    }
}

/// A labelled collection of graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub num_classes: usize,
    pub graphs: Vec<Graph>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, num_classes: usize, graphs: Vec<Graph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(GistError::Input("dataset has no graphs".into()));
        }
        if num_classes == 0 {
            return Err(GistError::Input("num_classes must be positive".into()));
        }
        for (idx, g) in graphs.iter().enumerate() {
            if let Some(label) = g.label() {
                if label >= num_classes {
                    return Err(GistError::Label {
                        graph: idx,
                        label,
                        num_classes,
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            num_classes,
            graphs,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, Graph::feature_dim)
    }

    /// Sub-dataset made of the graphs at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let graphs = indices.iter().map(|&i| self.graphs[i].clone()).collect();
        Self::new(self.name.clone(), self.num_classes, graphs)
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

/// Diagonal degree matrix of `G`.
pub fn degree_matrix(g: &Graph) -> DMatrix<f64> {
    DMatrix::from_diagonal(&g.degrees())
}

pub fn laplacian(g: &Graph, kind: LaplacianKind) -> DMatrix<f64> {
    g.laplacian(kind)
}

/// Laplacian of an arbitrary symmetric non-negative weight matrix.
pub fn laplacian_from_adjacency(adjacency: &DMatrix<f64>, kind: LaplacianKind) -> DMatrix<f64> {
    let degrees = row_sums(adjacency);
    let combinatorial = DMatrix::from_diagonal(&degrees) - adjacency;
    match kind {
        LaplacianKind::Combinatorial => combinatorial,
        LaplacianKind::Normalized => {
            let inv_sqrt = degrees.map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
            let n = adjacency.nrows();
            DMatrix::from_fn(n, n, |i, j| {
                inv_sqrt[i] * combinatorial[(i, j)] * inv_sqrt[j]
            })
        }
    }
}
