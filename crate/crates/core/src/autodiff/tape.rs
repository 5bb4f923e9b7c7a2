//! Matrix-valued reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its dense value. [`Tape::backward`] walks the nodes in reverse and
//! accumulates the adjoint of every node, returning them as [`Gradients`].
//! Only the operations the explainer and the oracle need are provided.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;

use crate::graph::LaplacianKind;
use crate::spectral::eig_sym;

/// Consecutive eigenvalues closer than this are counted as degenerate in the
/// eigenvalue backward pass.
pub const DEGENERACY_GAP: f64 = 1e-8;

static DEGENERATE_EIGEN_BACKWARDS: AtomicU64 = AtomicU64::new(0);
static EIGEN_BACKWARDS: AtomicU64 = AtomicU64::new(0);

/// `(degenerate, total)` eigenvalue backward passes since process start.
pub fn eigen_degeneracy_counts() -> (u64, u64) {
    (
        DEGENERATE_EIGEN_BACKWARDS.load(Ordering::Relaxed),
        EIGEN_BACKWARDS.load(Ordering::Relaxed),
    )
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Transpose(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    MaskedSoftmax(Var),
    MeanRows(Var),
    Sum(Var),
    PairSum(Var, Var),
    Reshape(Var),
    SymmetrizeZeroDiag(Var),
    GumbelSigmoid {
        p: Var,
        temperature: f64,
        epsilon: f64,
    },
    Bce {
        pred: Var,
        target: DMatrix<f64>,
        lo: f64,
        hi: f64,
    },
    L1 {
        a: Var,
        target: DMatrix<f64>,
    },
    Laplacian {
        adj: Var,
        kind: LaplacianKind,
    },
    Pad(Var),
    Eigvals {
        a: Var,
        vectors: DMatrix<f64>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        target: usize,
        probs: DMatrix<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: DMatrix<f64>,
    op: Op,
}

/// Records one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node for one backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<DMatrix<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros if `v` did not
    /// influence the loss.
    pub fn wrt(&self, v: Var) -> DMatrix<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                DMatrix::zeros(r, c)
            }
        }
    }
}

/// Sigmoid kept strictly inside (0,1) where it would round to 0 or 1.
pub(crate) fn open_sigmoid(x: f64) -> f64 {
    sigmoid(x).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(slot: &mut Option<DMatrix<f64>>, delta: DMatrix<f64>) {
    match slot {
        Some(g) => *g += delta,
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: DMatrix<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &DMatrix<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[(0, 0)]
    }

    /// Input node: a parameter or a constant.
    pub fn leaf(&mut self, value: DMatrix<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).component_mul(self.value(b));
        self.push(v, Op::Mul(a, b))
    }

    /// Adds the 1×k row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!(b.nrows(), 1, "bias must be a single row");
        let mut v = self.value(a).clone();
        for mut row in v.row_iter_mut() {
            row += b;
        }
        self.push(v, Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    /// Columns `start..start+len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).columns(start, len).into_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).nrows();
        let cols: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut v = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let m = self.value(p);
            v.columns_mut(at, m.ncols()).copy_from(m);
            at += m.ncols();
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Row-wise softmax restricted to entries where `mask` is nonzero; masked
    /// out entries are 0. A row with no admissible entry is all zeros.
    pub fn masked_softmax(&mut self, a: Var, mask: &DMatrix<f64>) -> Var {
        let x = self.value(a);
        let mut v = DMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.nrows() {
            let max = (0..x.ncols())
                .filter(|&j| mask[(i, j)] != 0.0)
                .map(|j| x[(i, j)])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for j in 0..x.ncols() {
                if mask[(i, j)] != 0.0 {
                    let e = (x[(i, j)] - max).exp();
                    v[(i, j)] = e;
                    total += e;
                }
            }
            for j in 0..x.ncols() {
                v[(i, j)] /= total;
            }
        }
        self.push(v, Op::MaskedSoftmax(a))
    }

    /// 1×k row of column means.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let n = x.nrows().max(1) as f64;
        let v = DMatrix::from_fn(1, x.ncols(), |_, c| x.column(c).sum() / n);
        self.push(v, Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = DMatrix::from_element(1, 1, self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// For `u`, `v` of shape n×h, returns the n²×h matrix whose row `i·n + j`
    /// is `u_i + v_j`.
    pub fn pair_sum(&mut self, u: Var, v: Var) -> Var {
        let (a, b) = (self.value(u), self.value(v));
        let n = a.nrows();
        let h = a.ncols();
        let out = DMatrix::from_fn(n * n, h, |r, c| a[(r / n, c)] + b[(r % n, c)]);
        self.push(out, Op::PairSum(u, v))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.value(a);
        assert_eq!(
            x.len(),
            rows * cols,
            "reshape must preserve the element count"
        );
        let in_cols = x.ncols();
        let v = DMatrix::from_fn(rows, cols, |r, c| {
            let flat = r * cols + c;
            x[(flat / in_cols, flat % in_cols)]
        });
        self.push(v, Op::Reshape(a))
    }

    /// `(a + aᵀ)/2` with the diagonal set to zero.
    pub fn symmetrize_zero_diag(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let n = x.nrows();
        let v = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                0.5 * (x[(i, j)] + x[(j, i)])
            }
        });
        self.push(v, Op::SymmetrizeZeroDiag(a))
    }

    /// Binary-concrete relaxation
    /// `σ((ln(p+ε) − ln(1−p+ε) + Γ)/T)` with the noise `Γ` held constant.
    /// The diagonal is forced to zero.
    pub fn gumbel_sigmoid(
        &mut self,
        p: Var,
        noise: &DMatrix<f64>,
        temperature: f64,
        epsilon: f64,
    ) -> Var {
        let x = self.value(p);
        let n = x.nrows();
        let v = DMatrix::from_fn(n, x.ncols(), |i, j| {
            if i == j {
                return 0.0;
            }
            let pij = x[(i, j)];
            let logit = (pij + epsilon).ln() - (1.0 - pij + epsilon).ln();
            open_sigmoid((logit + noise[(i, j)]) / temperature)
        });
        self.push(
            v,
            Op::GumbelSigmoid {
                p,
                temperature,
                epsilon,
            },
        )
    }

    /// Mean binary cross-entropy over off-diagonal entries, with predictions
    /// clamped to `[lo, hi]`.
    pub fn bce_off_diagonal(&mut self, pred: Var, target: &DMatrix<f64>, lo: f64, hi: f64) -> Var {
        let x = self.value(pred);
        let n = x.nrows();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let q = x[(i, j)].clamp(lo, hi);
                    let t = target[(i, j)];
                    total -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
                }
            }
        }
        let count = (n * n.saturating_sub(1)).max(1) as f64;
        self.push(
            DMatrix::from_element(1, 1, total / count),
            Op::Bce {
                pred,
                target: target.clone(),
                lo,
                hi,
            },
        )
    }

    /// `Σ |a − target|`.
    pub fn l1_to(&mut self, a: Var, target: &DMatrix<f64>) -> Var {
        let total = (self.value(a) - target).abs().sum();
        self.push(
            DMatrix::from_element(1, 1, total),
            Op::L1 {
                a,
                target: target.clone(),
            },
        )
    }

    /// Laplacian of a symmetric weight matrix, same conventions as
    /// [`crate::graph::laplacian_from_adjacency`].
    pub fn laplacian(&mut self, adj: Var, kind: LaplacianKind) -> Var {
        let v = crate::graph::laplacian_from_adjacency(self.value(adj), kind);
        self.push(v, Op::Laplacian { adj, kind })
    }

    /// Embeds the n×n matrix `a` in the top-left corner of an m×m zero matrix.
    pub fn pad(&mut self, a: Var, m: usize) -> Var {
        let x = self.value(a);
        let (r, c) = x.shape();
        let mut v = DMatrix::zeros(m, m);
        v.view_mut((0, 0), (r, c)).copy_from(x);
        self.push(v, Op::Pad(a))
    }

    /// Ascending eigenvalues of a symmetric matrix as an n×1 column.
    pub fn eigvals(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let sym = (x + x.transpose()) * 0.5;
        let pair = eig_sym(&sym).expect("symmetrized input");
        let v = DMatrix::from_column_slice(pair.values.len(), 1, pair.values.values());
        self.push(
            v,
            Op::Eigvals {
                a,
                vectors: pair.vectors,
            },
        )
    }

    /// `−log softmax(logits)[target]` for a 1×C row of logits.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Var {
        let x = self.value(logits);
        let max = x.max();
        let exps = x.map(|v| (v - max).exp());
        let total = exps.sum();
        let probs = exps / total;
        let loss = -(probs[(0, target)].max(f64::MIN_POSITIVE)).ln();
        self.push(
            DMatrix::from_element(1, 1, loss),
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            },
        )
    }

    /// Reverse pass from the scalar node `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<DMatrix<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(DMatrix::from_element(1, 1, 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        }
    }

    fn propagate(&self, idx: usize, g: &DMatrix<f64>, grads: &mut [Option<DMatrix<f64>>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let da = g * self.value(*b).transpose();
                let db = self.value(*a).transpose() * g;
                accumulate(&mut grads[a.0], da);
                accumulate(&mut grads[b.0], db);
            }
            Op::Add(a, b) => {
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], -g);
            }
            Op::Mul(a, b) => {
                let da = g.component_mul(self.value(*b));
                let db = g.component_mul(self.value(*a));
                accumulate(&mut grads[a.0], da);
                accumulate(&mut grads[b.0], db);
            }
            Op::AddRow(a, bias) => {
                accumulate(&mut grads[a.0], g.clone());
                let db = DMatrix::from_fn(1, g.ncols(), |_, c| g.column(c).sum());
                accumulate(&mut grads[bias.0], db);
            }
            Op::Scale(a, s) => accumulate(&mut grads[a.0], g * *s),
            Op::Relu(a) => {
                let x = self.value(*a);
                let da = g.zip_map(x, |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                accumulate(&mut grads[a.0], da);
            }
            Op::Sigmoid(a) => {
                let da = g.zip_map(out, |gv, y| gv * y * (1.0 - y));
                accumulate(&mut grads[a.0], da);
            }
            Op::Transpose(a) => accumulate(&mut grads[a.0], g.transpose()),
            Op::SliceCols(a, start) => {
                let x = self.value(*a);
                let mut da = DMatrix::zeros(x.nrows(), x.ncols());
                da.columns_mut(*start, g.ncols()).copy_from(g);
                accumulate(&mut grads[a.0], da);
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for p in parts {
                    let w = self.value(*p).ncols();
                    accumulate(&mut grads[p.0], g.columns(at, w).into_owned());
                    at += w;
                }
            }
            Op::MaskedSoftmax(a) => {
                let mut da = DMatrix::zeros(out.nrows(), out.ncols());
                for i in 0..out.nrows() {
                    let dot: f64 = (0..out.ncols()).map(|j| g[(i, j)] * out[(i, j)]).sum();
                    for j in 0..out.ncols() {
                        da[(i, j)] = out[(i, j)] * (g[(i, j)] - dot);
                    }
                }
                accumulate(&mut grads[a.0], da);
            }
            Op::MeanRows(a) => {
                let x = self.value(*a);
                let n = x.nrows().max(1) as f64;
                let da = DMatrix::from_fn(x.nrows(), x.ncols(), |_, c| g[(0, c)] / n);
                accumulate(&mut grads[a.0], da);
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                accumulate(&mut grads[a.0], DMatrix::from_element(r, c, g[(0, 0)]));
            }
            Op::PairSum(u, v) => {
                let (n, h) = self.value(*u).shape();
                let mut du = DMatrix::zeros(n, h);
                let mut dv = DMatrix::zeros(n, h);
                for r in 0..n * n {
                    let (i, j) = (r / n, r % n);
                    for c in 0..h {
                        du[(i, c)] += g[(r, c)];
                        dv[(j, c)] += g[(r, c)];
                    }
                }
                accumulate(&mut grads[u.0], du);
                accumulate(&mut grads[v.0], dv);
            }
            Op::Reshape(a) => {
                let (rows, cols) = self.value(*a).shape();
                let out_cols = out.ncols();
                let da = DMatrix::from_fn(rows, cols, |r, c| {
                    let flat = r * cols + c;
                    g[(flat / out_cols, flat % out_cols)]
                });
                accumulate(&mut grads[a.0], da);
            }
            Op::SymmetrizeZeroDiag(a) => {
                let n = out.nrows();
                let da = DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        0.5 * (g[(i, j)] + g[(j, i)])
                    }
                });
                accumulate(&mut grads[a.0], da);
            }
            Op::GumbelSigmoid {
                p,
                temperature,
                epsilon,
            } => {
                let x = self.value(*p);
                let da = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
                    if i == j {
                        return 0.0;
                    }
                    let y = out[(i, j)];
                    let pij = x[(i, j)];
                    let dlogit = 1.0 / (pij + epsilon) + 1.0 / (1.0 - pij + epsilon);
                    g[(i, j)] * y * (1.0 - y) / temperature * dlogit
                });
                accumulate(&mut grads[p.0], da);
            }
            Op::Bce {
                pred,
                target,
                lo,
                hi,
            } => {
                let x = self.value(*pred);
                let n = x.nrows();
                let count = (n * n.saturating_sub(1)).max(1) as f64;
                let scale = g[(0, 0)] / count;
                let da = DMatrix::from_fn(n, x.ncols(), |i, j| {
                    let q = x[(i, j)];
                    if i == j || q <= *lo || q >= *hi {
                        return 0.0;
                    }
                    let t = target[(i, j)];
                    -scale * (t / q - (1.0 - t) / (1.0 - q))
                });
                accumulate(&mut grads[pred.0], da);
            }
            Op::L1 { a, target } => {
                let s = g[(0, 0)];
                let da = (self.value(*a) - target).map(|d| {
                    if d > 0.0 {
                        s
                    } else if d < 0.0 {
                        -s
                    } else {
                        0.0
                    }
                });
                accumulate(&mut grads[a.0], da);
            }
            Op::Laplacian { adj, kind } => {
                let a = self.value(*adj);
                let da = laplacian_backward(a, g, *kind);
                accumulate(&mut grads[adj.0], da);
            }
            Op::Pad(a) => {
                let (r, c) = self.value(*a).shape();
                accumulate(&mut grads[a.0], g.view((0, 0), (r, c)).into_owned());
            }
            Op::Eigvals { a, vectors } => {
                let n = vectors.nrows();
                EIGEN_BACKWARDS.fetch_add(1, Ordering::Relaxed);
                if out
                    .as_slice()
                    .windows(2)
                    .any(|w| (w[1] - w[0]).abs() < DEGENERACY_GAP)
                {
                    DEGENERATE_EIGEN_BACKWARDS.fetch_add(1, Ordering::Relaxed);
                }
                // Σ_i g_i u_i u_iᵀ
                let mut scaled = vectors.clone();
                for (k, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= g[(k, 0)];
                }
                let da = &scaled * vectors.transpose();
                let da = (&da + da.transpose()) * 0.5;
                debug_assert_eq!(da.nrows(), n);
                accumulate(&mut grads[a.0], da);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            } => {
                let mut da = probs * g[(0, 0)];
                da[(0, *target)] -= g[(0, 0)];
                accumulate(&mut grads[logits.0], da);
            }
        }
    }
}

/// Adjoint of a Laplacian with respect to its (independent) weight entries.
fn laplacian_backward(a: &DMatrix<f64>, g: &DMatrix<f64>, kind: LaplacianKind) -> DMatrix<f64> {
    let n = a.nrows();
    match kind {
        // L = diag(A·1) − A
        LaplacianKind::Combinatorial => DMatrix::from_fn(n, n, |i, j| g[(i, i)] - g[(i, j)]),
        // L_ij = [i = j, d_i > 0] − s_i A_ij s_j with s = d^{-1/2} (0 where d = 0)
        LaplacianKind::Normalized => {
            let d: Vec<f64> = a.row_iter().map(|r| r.sum()).collect();
            let s: Vec<f64> = d
                .iter()
                .map(|&x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 })
                .collect();
            let mut ds = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    let w = -g[(i, j)] * a[(i, j)];
                    ds[i] += w * s[j];
                    ds[j] += w * s[i];
                }
            }
            let dd: Vec<f64> = (0..n)
                .map(|i| {
                    if d[i] > 0.0 {
                        -0.5 * s[i].powi(3) * ds[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            DMatrix::from_fn(n, n, |i, j| -g[(i, j)] * s[i] * s[j] + dd[i])
        }
    }
}
