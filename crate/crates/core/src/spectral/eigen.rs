//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicit-shift QL iteration. Adapted from the EISPACK `tred2`/`tql2`
//! pair as laid out in JAMA.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GistError, Result};

/// Inputs whose asymmetry exceeds this are rejected.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Ascending eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts `values` ascending.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Size of the matrix the spectrum was computed from.
    pub fn source_size(&self) -> usize {
        self.values.len()
    }

    /// Prepends zeros so the spectrum has `m` entries, matching a graph padded
    /// with isolated nodes (the padded eigenvalues are all zero and sort first).
    pub fn pad_zeros(&self, m: usize) -> Self {
        let mut values = self.values.clone();
        values.extend(std::iter::repeat(0.0).take(m.saturating_sub(values.len())));
        Self::new(values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Eigenvalues with their orthonormal eigenvectors stored column-wise.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Spectrum,
    pub vectors: DMatrix<f64>,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back ascending. Each eigenvector is oriented so its first
/// entry of magnitude above 1e-12 is positive, which makes repeated runs
/// reproducible.
pub fn eig_sym(m: &DMatrix<f64>) -> Result<EigenPair> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(GistError::Shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(GistError::Shape(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    if n == 0 {
        return Ok(EigenPair {
            values: Spectrum::new(Vec::new()),
            vectors: DMatrix::zeros(0, 0),
        });
    }

    // Row-major working copy of the symmetrized input.
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect())
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |i, c| v[i][order[c]]);
    for mut col in vectors.column_iter_mut() {
        if let Some(&lead) = col.iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(EigenPair {
        values: Spectrum { values },
        vectors,
    })
}

/// Eigenvalues only.
pub fn eigvals_sym(m: &DMatrix<f64>) -> Result<Spectrum> {
    eig_sym(m).map(|p| p.values)
}

/// Householder reduction to tridiagonal form. On exit `d` holds the diagonal,
/// `e[1..]` the sub-diagonal, and `v` the accumulated orthogonal transform.
fn tridiagonalize(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1]);

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the symmetric tridiagonal matrix (`d`, `e`).
fn ql_implicit(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iterations >= 64 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_spectrum() {
        let p = eig_sym(&DMatrix::identity(3, 3)).unwrap();
        assert_close(p.values.values(), &[1.0, 1.0, 1.0], 1e-14);
    }

    #[test]
    fn k2_laplacian_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_close(eig_sym(&m).unwrap().values.values(), &[0.0, 2.0], 1e-14);
    }

    #[test]
    fn path3_laplacian_spectrum() {
        // characteristic polynomial: -λ(λ-1)(λ-3)
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_close(
            eig_sym(&m).unwrap().values.values(),
            &[0.0, 1.0, 3.0],
            1e-12,
        );
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(eig_sym(&m), Err(GistError::Shape(_))));
    }

    #[test]
    fn trivial_sizes() {
        assert!(eig_sym(&DMatrix::zeros(0, 0)).unwrap().values.is_empty());
        let p = eig_sym(&DMatrix::from_element(1, 1, -3.5)).unwrap();
        assert_eq!(p.values.values(), &[-3.5]);
        assert_eq!(p.vectors[(0, 0)], 1.0);
    }

    #[test]
    fn reconstruction_on_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(20, 20, |_, _| rng.gen_range(-1.0..1.0));
            let m = &a + a.transpose();
            let p = eig_sym(&m).unwrap();
            let lambda =
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(p.values.values().to_vec()));
            let v = &p.vectors;
            assert!((v * &lambda * v.transpose() - &m).abs().max() < 1e-7);
            assert!((v.transpose() * v - DMatrix::identity(20, 20)).abs().max() < 1e-8);
            assert!((&m * v - v * &lambda).abs().max() < 1e-7);
            assert!(p.values.values().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn deterministic_and_sign_normalized() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let a = eig_sym(&m).unwrap();
        let b = eig_sym(&m).unwrap();
        assert_eq!(a.vectors, b.vectors);
        for col in a.vectors.column_iter() {
            let lead = col.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*lead > 0.0);
        }
    }

    #[test]
    fn pad_zeros_sorts_in_front() {
        let s = Spectrum::new(vec![0.5, 2.0]).pad_zeros(4);
        assert_eq!(s.values(), &[0.0, 0.0, 0.5, 2.0]);
    }
}
