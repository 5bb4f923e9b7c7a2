//! Seeded synthetic datasets.
//!
//! Every generator is a pure function of its [`GenSpec`]: labels are assigned
//! in balanced round-robin order and shuffled with the root seed, then each
//! graph is drawn from its own RNG stream derived from `(seed, index)`.

use std::collections::BTreeSet;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GistError, Result};
use crate::graph::{Dataset, Graph};
use crate::rng::derive_rng;

/// Number of one-hot degree buckets used for BA-shapes node features.
pub const DEGREE_BUCKETS: usize = 8;
/// Size of the Barabasi-Albert base graph in BA-shapes.
pub const BA_BASE_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    BaShapes,
    TreeCycle,
    ColorCount,
}

impl FromStr for Family {
    type Err = GistError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ba-shapes" => Ok(Self::BaShapes),
            "tree-cycle" => Ok(Self::TreeCycle),
            "color-count" => Ok(Self::ColorCount),
            other => Err(GistError::Input(format!(
                "unknown family `{other}` (expected ba-shapes, tree-cycle or color-count)"
            ))),
        }
    }
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BaShapes => "ba-shapes",
            Self::TreeCycle => "tree-cycle",
            Self::ColorCount => "color-count",
        }
    }
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub num_graphs: usize,
    /// Inclusive node-count range (tree-cycle, color-count).
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Inclusive motif-count range (BA-shapes).
    pub min_motifs: usize,
    pub max_motifs: usize,
    /// Number of classes (color-count only; the other families are binary).
    pub num_classes: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(family: Family, num_graphs: usize, seed: u64) -> Self {
        Self {
            family,
            num_graphs,
            min_nodes: 8,
            max_nodes: 20,
            min_motifs: 1,
            max_motifs: 2,
            num_classes: if family == Family::ColorCount { 4 } else { 2 },
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_graphs == 0 {
            return Err(GistError::Input("num_graphs must be positive".into()));
        }
        if self.min_nodes < 2 || self.min_nodes > self.max_nodes {
            return Err(GistError::Input(format!(
                "invalid node range {}..={}",
                self.min_nodes, self.max_nodes
            )));
        }
        if self.min_motifs == 0 || self.min_motifs > self.max_motifs {
            return Err(GistError::Input(format!(
                "invalid motif range {}..={}",
                self.min_motifs, self.max_motifs
            )));
        }
        if self.family == Family::ColorCount && self.num_classes < 3 {
            return Err(GistError::Input(
                "color-count needs at least 3 classes".into(),
            ));
        }
        Ok(())
    }

    fn classes(&self) -> usize {
        match self.family {
            Family::ColorCount => self.num_classes,
            _ => 2,
        }
    }
}

/// Dispatches on the spec's family.
pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    match spec.family {
        Family::BaShapes => gen_ba_shapes(spec),
        Family::TreeCycle => gen_tree_cycle(spec),
        Family::ColorCount => gen_color_count(spec),
    }
}

fn balanced_labels(spec: &GenSpec) -> Vec<usize> {
    let k = spec.classes();
    let mut labels: Vec<usize> = (0..spec.num_graphs).map(|i| i % k).collect();
    labels.shuffle(&mut derive_rng(spec.seed, u64::MAX));
    labels
}

fn build<F>(spec: &GenSpec, mut make: F) -> Result<Dataset>
where
    F: FnMut(usize, &mut ChaCha8Rng) -> Graph,
{
    spec.validate()?;
    let graphs = balanced_labels(spec)
        .into_iter()
        .enumerate()
        .map(|(i, label)| make(label, &mut derive_rng(spec.seed, i as u64)).with_label(Some(label)))
        .collect();
    Dataset::new(spec.family.name(), spec.classes(), graphs)
}

/// BA base graph with house (class 0) or 3×3 grid (class 1) motifs attached.
///
/// The base grows by preferential attachment from a single edge, one edge per
/// new node. Each motif hangs off its first node by one edge to a base node
/// chosen proportionally to degree. Features are one-hot degree buckets.
pub fn gen_ba_shapes(spec: &GenSpec) -> Result<Dataset> {
    build(spec, |label, rng| {
        let mut edges = barabasi_albert_tree(BA_BASE_NODES, rng);
        let mut n = BA_BASE_NODES;
        let motifs = rng.gen_range(spec.min_motifs..=spec.max_motifs);
        for _ in 0..motifs {
            let anchor = preferential_pick(&edges, BA_BASE_NODES, rng);
            let (size, motif_edges) = if label == 0 { house() } else { grid3() };
            edges.extend(motif_edges.iter().map(|&(a, b)| (a + n, b + n)));
            edges.push((anchor, n));
            n += size;
        }
        let degrees = degree_list(n, &edges);
        let features = DMatrix::from_fn(n, DEGREE_BUCKETS, |i, b| {
            let bucket = degrees[i].clamp(1, DEGREE_BUCKETS) - 1;
            if bucket == b {
                1.0
            } else {
                0.0
            }
        });
        Graph::from_edges(features, &edges, None).expect("generator emits valid edges")
    })
}

/// Class 0: uniform random labelled trees. Class 1: a tree plus 1–3 chords.
/// Features per node: `[degree, clustering coefficient]`.
pub fn gen_tree_cycle(spec: &GenSpec) -> Result<Dataset> {
    build(spec, |label, rng| {
        let n = rng.gen_range(spec.min_nodes..=spec.max_nodes);
        let mut edges = random_tree_edges(n, rng);
        if label == 1 {
            let chords = rng.gen_range(1..=3);
            add_random_chords(n, &mut edges, chords, rng);
        }
        let g = Graph::from_edges(DMatrix::zeros(n, 2), &edges, None)
            .expect("generator emits valid edges");
        let features = structural_features(&g);
        Graph::from_edges(features, &edges, None).expect("generator emits valid edges")
    })
}

/// Random connected graphs with three one-hot node colors; the label is the
/// number of nodes of color 0, capped at `num_classes − 1`.
pub fn gen_color_count(spec: &GenSpec) -> Result<Dataset> {
    let cap = spec.classes() - 1;
    build(spec, |label, rng| {
        let n = rng.gen_range(spec.min_nodes.max(cap + 2)..=spec.max_nodes.max(cap + 2));
        let mut edges = random_tree_edges(n, rng);
        add_random_chords(n, &mut edges, n / 4, rng);
        let targets = if label == cap {
            rng.gen_range(cap..=(cap + 2).min(n))
        } else {
            label
        };
        let mut colors: Vec<usize> = (0..n)
            .map(|i| if i < targets { 0 } else { rng.gen_range(1..3) })
            .collect();
        colors.shuffle(rng);
        let features = DMatrix::from_fn(n, 3, |i, c| if colors[i] == c { 1.0 } else { 0.0 });
        Graph::from_edges(features, &edges, None).expect("generator emits valid edges")
    })
}

/// Per-node `[degree, local clustering coefficient]`.
pub fn structural_features(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let a = g.adjacency();
    DMatrix::from_fn(n, 2, |i, c| {
        let nbrs: Vec<usize> = (0..n).filter(|&j| a[(i, j)] != 0.0).collect();
        let k = nbrs.len();
        if c == 0 {
            return k as f64;
        }
        if k < 2 {
            return 0.0;
        }
        let mut links = 0;
        for (x, &u) in nbrs.iter().enumerate() {
            for &v in &nbrs[x + 1..] {
                if a[(u, v)] != 0.0 {
                    links += 1;
                }
            }
        }
        2.0 * links as f64 / (k * (k - 1)) as f64
    })
}

fn degree_list(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut deg = vec![0; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    deg
}

fn preferential_pick(edges: &[(usize, usize)], limit: usize, rng: &mut ChaCha8Rng) -> usize {
    let deg = degree_list(
        limit,
        &edges
            .iter()
            .copied()
            .filter(|&(a, b)| a < limit && b < limit)
            .collect::<Vec<_>>(),
    );
    let total: usize = deg.iter().sum();
    if total == 0 {
        return rng.gen_range(0..limit);
    }
    let mut ticket = rng.gen_range(0..total);
    for (i, &d) in deg.iter().enumerate() {
        if ticket < d {
            return i;
        }
        ticket -= d;
    }
    limit - 1
}

/// Preferential-attachment tree on `n ≥ 2` nodes.
fn barabasi_albert_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = vec![(0, 1)];
    for v in 2..n {
        let u = preferential_pick(&edges, v, rng);
        edges.push((u, v));
    }
    edges
}

fn house() -> (usize, &'static [(usize, usize)]) {
    // square 0-1-2-3 with roof node 4 over the 0-1 side
    (5, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (1, 4)])
}

fn grid3() -> (usize, &'static [(usize, usize)]) {
    (
        9,
        &[
            (0, 1),
            (1, 2),
            (3, 4),
            (4, 5),
            (6, 7),
            (7, 8),
            (0, 3),
            (3, 6),
            (1, 4),
            (4, 7),
            (2, 5),
            (5, 8),
        ],
    )
}

/// Uniform random labelled tree via a random Prüfer sequence.
pub fn random_tree_edges(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = *leaves.iter().next().expect("a tree always has a leaf");
        leaves.remove(&leaf);
        edges.push((leaf.min(c), leaf.max(c)));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push((rest[0], rest[1]));
    edges
}

fn add_random_chords(n: usize, edges: &mut Vec<(usize, usize)>, count: usize, rng: &mut impl Rng) {
    let mut present: BTreeSet<(usize, usize)> =
        edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|e| !present.contains(e))
        .collect();
    candidates.shuffle(rng);
    for e in candidates.into_iter().take(count) {
        present.insert(e);
        edges.push(e);
    }
}

/// Random connected graph: a uniform tree plus up to `extra_edges` chords.
/// Features are a single column of ones.
pub fn random_connected_graph(n: usize, extra_edges: usize, rng: &mut impl Rng) -> Graph {
    let mut edges = random_tree_edges(n, rng);
    add_random_chords(n, &mut edges, extra_edges, rng);
    Graph::from_edges(DMatrix::from_element(n, 1, 1.0), &edges, None)
        .expect("generator emits valid edges")
}

/// Random graph where each pair is an edge with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(DMatrix::from_element(n, 1, 1.0), &edges, None)
        .expect("generator emits valid edges")
}

/// Circulant graph on `n` nodes connecting `i` to `i ± s` for each jump `s`.
pub fn circulant(n: usize, jumps: &[usize]) -> Graph {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for &s in jumps {
            let j = (i + s) % n;
            if j != i {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    Graph::new(DMatrix::from_element(n, 1, 1.0), a, None).expect("circulant is symmetric")
}

pub fn cycle(n: usize) -> Graph {
    circulant(n, &[1])
}
