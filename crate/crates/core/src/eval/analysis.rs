//! Experiment drivers: the α sweep, per-pair spectra, and theorem checks on
//! dataset pairs.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cv::{fold_gist_config, fold_oracle, fold_split, instance_seed, CvConfig};
use super::metrics::{ged, validity_from_classes};
use crate::error::{GistError, Result};
use crate::explainer::{explain, train_gist, GistConfig};
use crate::graph::{Dataset, Graph, LaplacianKind};
use crate::rng::derive_rng;
use crate::spectral::{
    combine_laplacians, eigvals_sym, frobenius_diff, interpolated_spectrum, l1_distance,
    padded_spectrum, spectral_gap, verify_theorems, InterpolationConfig, Spectrum, TheoremReport,
};

/// Average ranks (1-based), ties sharing the mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub mean_ged_input: f64,
    pub mean_ged_overshoot: f64,
    pub validity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Spearman correlation of α with mean GED(G, G*).
    pub spearman_input: f64,
    /// Spearman correlation of α with mean GED(G*, Gε).
    pub spearman_overshoot: f64,
}

/// Trains one model per α on the first fold's training split, with the
/// oracle, seeds and overshoot draws held fixed, and explains the test split.
pub fn sweep_alpha(data: &Dataset, alphas: &[f64], cfg: &CvConfig) -> Result<SweepOutcome> {
    if alphas.is_empty() {
        return Err(GistError::Input("empty alpha grid".into()));
    }
    let split = fold_split(data.len(), 0, cfg)?;
    let oracle = fold_oracle(data, &split, cfg)?;
    let pool = data.subset(&split.train)?;
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let gcfg = GistConfig {
                alpha,
                ..fold_gist_config(cfg, 0)
            };
            let (model, _) = train_gist(&pool, &oracle, &gcfg)?;
            let (mut gi, mut ge, mut valid) = (0.0, 0.0, 0.0);
            for &idx in &split.test {
                let mut rng = derive_rng(instance_seed(cfg, 0, idx), 0);
                let cf = explain(&model, &data.graphs[idx], &pool, &oracle, &gcfg, &mut rng)?;
                gi += ged(&cf.input, &cf.result);
                ge += ged(&cf.result, &cf.overshoot);
                valid += f64::from(validity_from_classes(cf.input_class, cf.result_class));
            }
            let n = split.test.len() as f64;
            Ok(SweepRow {
                alpha,
                mean_ged_input: gi / n,
                mean_ged_overshoot: ge / n,
                validity: valid / n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let gi: Vec<f64> = rows.iter().map(|r| r.mean_ged_input).collect();
    let ge: Vec<f64> = rows.iter().map(|r| r.mean_ged_overshoot).collect();
    Ok(SweepOutcome {
        spearman_input: spearman(&a, &gi),
        spearman_overshoot: spearman(&a, &ge),
        rows,
    })
}

/// Spectra of one explained pair, all padded to `size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraRow {
    pub pair: usize,
    pub instance: usize,
    pub size: usize,
    pub input: Vec<f64>,
    pub overshoot: Vec<f64>,
    pub result: Vec<f64>,
    /// `alpha·λ(Gε) + (1−alpha)·λ(G)` element-wise.
    pub optimal: Vec<f64>,
    /// Eigenvalues of `alpha·L(Gε) + (1−alpha)·L(G)`.
    pub combined: Vec<f64>,
    /// Mean per-eigenvalue `|λ_i(G*) − optimal_i|`.
    pub alignment_error: f64,
    pub gap_input: f64,
    pub gap_overshoot: f64,
    pub gap_result: f64,
    pub lambda1_result: f64,
    pub lambda2_result: f64,
    pub result_connected: bool,
    /// `‖L(Gε) − L(G*)‖_F`.
    pub frobenius_result: f64,
    /// `(1−alpha)·‖L(Gε) − L(G)‖_F`.
    pub frobenius_expected: f64,
    /// `|frobenius_result − frobenius_expected| / ‖L(Gε) − L(G)‖_F`.
    pub frobenius_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraOutcome {
    pub alpha: f64,
    pub laplacian: LaplacianKind,
    pub rows: Vec<SpectraRow>,
    pub mean_alignment_error: f64,
    pub mean_frobenius_relative_error: f64,
}

fn pair_row(
    pair: usize,
    instance: usize,
    g: &Graph,
    ge: &Graph,
    gstar: &Graph,
    alpha: f64,
    kind: LaplacianKind,
) -> Result<SpectraRow> {
    let m = g.num_nodes().max(ge.num_nodes()).max(gstar.num_nodes());
    let icfg = InterpolationConfig::new(alpha)?;
    let (sg, se, ss) = (
        padded_spectrum(g, m, kind)?,
        padded_spectrum(ge, m, kind)?,
        padded_spectrum(gstar, m, kind)?,
    );
    let optimal = interpolated_spectrum(&sg, &se, icfg)?;
    let (lg, le, ls) = (
        g.pad_to(m)?.laplacian(kind),
        ge.pad_to(m)?.laplacian(kind),
        gstar.pad_to(m)?.laplacian(kind),
    );
    let combined = eigvals_sym(&combine_laplacians(&lg, &le, icfg)?)?;
    let base = frobenius_diff(&le, &lg)?;
    let frobenius_result = frobenius_diff(&le, &ls)?;
    let frobenius_expected = (1.0 - alpha) * base;
    let rs = spectral_gap(&ss)?;
    let unpadded = crate::spectral::spectrum(gstar, kind);
    let vals = unpadded.values();
    Ok(SpectraRow {
        pair,
        instance,
        size: m,
        alignment_error: l1_distance(&ss, &optimal) / m as f64,
        gap_input: spectral_gap(&sg)?,
        gap_overshoot: spectral_gap(&se)?,
        gap_result: rs,
        lambda1_result: vals.first().copied().unwrap_or(0.0),
        lambda2_result: vals.get(1).copied().unwrap_or(0.0),
        result_connected: gstar.is_connected(),
        frobenius_result,
        frobenius_expected,
        frobenius_relative_error: if base > 0.0 {
            (frobenius_result - frobenius_expected).abs() / base
        } else {
            0.0
        },
        input: sg.into_values(),
        overshoot: se.into_values(),
        result: ss.into_values(),
        optimal: optimal.into_values(),
        combined: combined.into_values(),
    })
}

/// Trains GIST at `cfg.gist.alpha` on the first fold and reports the spectra
/// of the first `k_pairs` explained test graphs (all of them when `None`).
pub fn spectra_analysis(
    data: &Dataset,
    k_pairs: Option<usize>,
    cfg: &CvConfig,
) -> Result<SpectraOutcome> {
    let split = fold_split(data.len(), 0, cfg)?;
    let oracle = fold_oracle(data, &split, cfg)?;
    let pool = data.subset(&split.train)?;
    let gcfg = fold_gist_config(cfg, 0);
    let (model, _) = train_gist(&pool, &oracle, &gcfg)?;
    let take = k_pairs.unwrap_or(split.test.len()).min(split.test.len());
    let rows = split.test[..take]
        .iter()
        .enumerate()
        .map(|(pair, &idx)| {
            let mut rng = derive_rng(instance_seed(cfg, 0, idx), 0);
            let g = &data.graphs[idx];
            let cf = explain(&model, g, &pool, &oracle, &gcfg, &mut rng)?;
            pair_row(
                pair,
                idx,
                g,
                &cf.overshoot,
                &cf.result,
                gcfg.alpha,
                gcfg.laplacian,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len().max(1) as f64;
    Ok(SpectraOutcome {
        alpha: gcfg.alpha,
        laplacian: gcfg.laplacian,
        mean_alignment_error: rows.iter().map(|r| r.alignment_error).sum::<f64>() / n,
        mean_frobenius_relative_error: rows.iter().map(|r| r.frobenius_relative_error).sum::<f64>()
            / n,
        rows,
    })
}

/// Pairs every graph with a seeded random graph of a different label.
pub fn label_pairs(data: &Dataset, seed: u64) -> Vec<(Graph, Graph)> {
    let mut rng = derive_rng(seed, 0);
    data.graphs
        .iter()
        .filter_map(|g| {
            let others: Vec<&Graph> = data
                .graphs
                .iter()
                .filter(|h| h.label() != g.label())
                .collect();
            others.choose(&mut rng).map(|h| (g.clone(), (*h).clone()))
        })
        .collect()
}

/// Theorem checks on the label pairs of `data`.
pub fn verify_dataset(data: &Dataset, alpha: f64, seed: u64) -> Result<TheoremReport> {
    verify_theorems(&label_pairs(data, seed), InterpolationConfig::new(alpha)?)
}

/// Mean per-eigenvalue distance of two spectra of equal length.
pub fn mean_eigen_error(a: &Spectrum, b: &Spectrum) -> f64 {
    l1_distance(a, b) / a.len().max(1) as f64
}
