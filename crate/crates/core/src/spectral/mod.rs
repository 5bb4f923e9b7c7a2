//! Spectral "style" of a graph: Laplacian eigenvalues, distances between
//! spectra, and convex combinations of Laplacians.

mod eigen;
pub mod theorems;

pub use eigen::{eig_sym, eigvals_sym, EigenPair, Spectrum, SYMMETRY_TOL};
pub use theorems::{commuting_interpolation_error, verify_theorems, PairReport, TheoremReport};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GistError, Result};
use crate::graph::{Graph, LaplacianKind};

/// Weight `alpha` placed on the overshoot Laplacian in `alpha·Lε + (1−alpha)·L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationConfig {
    alpha: f64,
}

impl InterpolationConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(GistError::Input(format!("alpha {alpha} outside [0,1]")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Laplacian spectrum of `g`.
pub fn spectrum(g: &Graph, kind: LaplacianKind) -> Spectrum {
    eigvals_sym(&g.laplacian(kind)).expect("graph Laplacians are symmetric")
}

/// Spectrum of `g` after padding it with isolated nodes up to `m`.
pub fn padded_spectrum(g: &Graph, m: usize, kind: LaplacianKind) -> Result<Spectrum> {
    Ok(spectrum(&g.pad_to(m)?, kind))
}

/// Pads both graphs with isolated nodes to the larger size.
pub fn pad_pair(g: &Graph, h: &Graph) -> (Graph, Graph) {
    let m = g.num_nodes().max(h.num_nodes());
    (
        g.pad_to(m).expect("m is the maximum size"),
        h.pad_to(m).expect("m is the maximum size"),
    )
}

/// Sum of absolute differences between the ascending spectra of `g` and `h`,
/// after padding both graphs to the same size.
pub fn spectral_distance(g: &Graph, h: &Graph, kind: LaplacianKind) -> f64 {
    let (gp, hp) = pad_pair(g, h);
    l1_distance(&spectrum(&gp, kind), &spectrum(&hp, kind))
}

pub(crate) fn l1_distance(a: &Spectrum, b: &Spectrum) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .sum()
}

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GistError::Size(format!(
            "{what}: {:?} vs {:?} (pad the graphs first)",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `alpha·le + (1−alpha)·lg`.
pub fn combine_laplacians(
    lg: &DMatrix<f64>,
    le: &DMatrix<f64>,
    cfg: InterpolationConfig,
) -> Result<DMatrix<f64>> {
    same_shape(lg, le, "combine_laplacians")?;
    let a = cfg.alpha();
    Ok(le * a + lg * (1.0 - a))
}

/// Element-wise `alpha·se_i + (1−alpha)·sg_i` over ascending spectra.
pub fn interpolated_spectrum(
    sg: &Spectrum,
    se: &Spectrum,
    cfg: InterpolationConfig,
) -> Result<Spectrum> {
    if sg.len() != se.len() {
        return Err(GistError::Size(format!(
            "spectra of length {} and {} (pad with zeros first)",
            sg.len(),
            se.len()
        )));
    }
    let a = cfg.alpha();
    Ok(Spectrum::new(
        sg.values()
            .iter()
            .zip(se.values())
            .map(|(g, e)| a * e + (1.0 - a) * g)
            .collect(),
    ))
}

/// `λ2 − λ1`.
pub fn spectral_gap(s: &Spectrum) -> Result<f64> {
    match s.values() {
        [l1, l2, ..] => Ok(l2 - l1),
        _ => Err(GistError::Size(format!(
            "spectral gap needs at least two eigenvalues, got {}",
            s.len()
        ))),
    }
}

pub fn frobenius_diff(l1: &DMatrix<f64>, l2: &DMatrix<f64>) -> Result<f64> {
    same_shape(l1, l2, "frobenius_diff")?;
    Ok((l1 - l2).norm())
}

/// Weyl interval for the `k`-th (1-based) eigenvalue of `alpha·Lε + (1−alpha)·L`:
/// `[alpha·se_k + (1−alpha)·sg_1, alpha·se_k + (1−alpha)·sg_n]`.
pub fn weyl_interval(
    se: &Spectrum,
    sg: &Spectrum,
    cfg: InterpolationConfig,
    k: usize,
) -> Result<(f64, f64)> {
    if se.len() != sg.len() {
        return Err(GistError::Size(format!(
            "spectra of length {} and {}",
            se.len(),
            sg.len()
        )));
    }
    let n = se.len();
    if k == 0 || k > n {
        return Err(GistError::Index { index: k, len: n });
    }
    let a = cfg.alpha();
    let base = a * se.values()[k - 1];
    let (lo, hi) = (sg.values()[0], sg.values()[n - 1]);
    Ok((base + (1.0 - a) * lo, base + (1.0 - a) * hi))
}
