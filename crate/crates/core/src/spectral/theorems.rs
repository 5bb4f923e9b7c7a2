//! Executable checks of the interpolation properties of combined Laplacians
//! `L* = alpha·Lε + (1−alpha)·L` over (combinatorial) graph Laplacians.
//!
//! Provable properties (connectivity, Weyl containment, the Frobenius
//! identity, the lower spectral-gap bound, and linear interpolation of
//! eigenvalues for commuting pairs) are reported as pass/fail. The upper
//! spectral-gap bound does not hold for non-commuting Laplacians, so its
//! violations are only counted.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    combine_laplacians, eig_sym, eigvals_sym, frobenius_diff, interpolated_spectrum, pad_pair,
    spectral_gap, weyl_interval, InterpolationConfig, Spectrum,
};
use crate::error::Result;
use crate::graph::{Graph, LaplacianKind};

/// Tolerance for eigenvalue-level comparisons.
pub const EIG_TOL: f64 = 1e-8;
/// Tolerance for the Frobenius identity, which is pure linearity.
pub const FROBENIUS_TOL: f64 = 1e-10;
/// Two Laplacians are treated as commuting when `‖LL' − L'L‖_max` is below this.
pub const COMMUTE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: usize,
    pub size: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `None` when either graph is disconnected, so the premise does not hold.
    pub connectivity_ok: Option<bool>,
    pub weyl_violations: usize,
    pub frobenius_error: f64,
    pub frobenius_ok: bool,
    pub gap_input: f64,
    pub gap_overshoot: f64,
    pub gap_combined: f64,
    pub gap_lower_ok: bool,
    pub gap_upper_ok: bool,
    pub commuting: bool,
    /// Error of the shared-eigenbasis interpolation; only for commuting pairs.
    pub commuting_error: Option<f64>,
    pub commuting_ok: Option<bool>,
    /// Max error between the combined spectrum and the element-wise
    /// interpolation of the two sorted spectra.
    pub sorted_interpolation_error: f64,
}

impl PairReport {
    /// True when every provable check that applies to this pair passed.
    pub fn provable_ok(&self) -> bool {
        self.connectivity_ok.unwrap_or(true)
            && self.weyl_violations == 0
            && self.frobenius_ok
            && self.gap_lower_ok
            && self.commuting_ok.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub alpha: f64,
    pub laplacian: LaplacianKind,
    pub pairs: Vec<PairReport>,
    pub connectivity_violations: usize,
    pub weyl_violations: usize,
    pub frobenius_violations: usize,
    pub gap_lower_violations: usize,
    pub gap_upper_violations: usize,
    pub commuting_violations: usize,
}

impl TheoremReport {
    pub fn provable_ok(&self) -> bool {
        self.connectivity_violations == 0
            && self.weyl_violations == 0
            && self.frobenius_violations == 0
            && self.gap_lower_violations == 0
            && self.commuting_violations == 0
    }

    /// One CSV row per pair per check: `pair,check,passed,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pair", "check", "passed", "value"])?;
        for p in &self.pairs {
            let pair = p.pair.to_string();
            let mut row = |check: &str, passed: Option<bool>, value: f64| {
                let passed = passed.map_or("n/a".to_string(), |b| b.to_string());
                w.write_record([pair.as_str(), check, passed.as_str(), &value.to_string()])
            };
            row("connectivity", p.connectivity_ok, p.lambda2)?;
            row(
                "weyl",
                Some(p.weyl_violations == 0),
                p.weyl_violations as f64,
            )?;
            row("frobenius", Some(p.frobenius_ok), p.frobenius_error)?;
            row("gap_lower", Some(p.gap_lower_ok), p.gap_combined)?;
            row("gap_upper", Some(p.gap_upper_ok), p.gap_combined)?;
            row(
                "commuting_interpolation",
                p.commuting_ok,
                p.commuting_error.unwrap_or(f64::NAN),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn commutator_max(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * b - b * a).abs().max()
}

/// For commuting `lg`, `le`: builds a joint eigenbasis, interpolates the
/// eigenvalues paired through it, and returns the max deviation from the
/// eigenvalues of `alpha·le + (1−alpha)·lg`. Returns `None` if the two
/// matrices do not commute.
pub fn commuting_interpolation_error(
    lg: &DMatrix<f64>,
    le: &DMatrix<f64>,
    cfg: InterpolationConfig,
) -> Result<Option<f64>> {
    if commutator_max(lg, le) > COMMUTE_TOL {
        return Ok(None);
    }
    // A generic combination separates the joint eigenspaces; on each of them
    // both matrices act as scalars.
    let mixing = std::f64::consts::PI / 3.0;
    let basis = eig_sym(&(lg + le * mixing))?.vectors;
    let a = cfg.alpha();
    let paired: Vec<f64> = basis
        .column_iter()
        .map(|u| {
            let ge = (u.transpose() * le * u)[(0, 0)];
            let gg = (u.transpose() * lg * u)[(0, 0)];
            a * ge + (1.0 - a) * gg
        })
        .collect();
    let paired = Spectrum::new(paired);
    let direct = eigvals_sym(&combine_laplacians(lg, le, cfg)?)?;
    Ok(Some(max_abs_diff(&direct, &paired)))
}

fn max_abs_diff(a: &Spectrum, b: &Spectrum) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_pair(idx: usize, g: &Graph, ge: &Graph, cfg: InterpolationConfig) -> Result<PairReport> {
    let connected = g.is_connected() && ge.is_connected();
    let (g, ge) = pad_pair(g, ge);
    let kind = LaplacianKind::Combinatorial;
    let lg = g.laplacian(kind);
    let le = ge.laplacian(kind);
    let star = combine_laplacians(&lg, &le, cfg)?;
    let sg = eigvals_sym(&lg)?;
    let se = eigvals_sym(&le)?;
    let ss = eigvals_sym(&star)?;
    let n = ss.len();

    let (lambda1, lambda2) = match ss.values() {
        [a, b, ..] => (*a, *b),
        [a] => (*a, f64::NAN),
        [] => (f64::NAN, f64::NAN),
    };
    let connectivity_ok =
        (connected && n >= 2).then(|| lambda1.abs() < EIG_TOL && lambda2 > EIG_TOL);

    let mut weyl_violations = 0;
    for k in 1..=n {
        let (lo, hi) = weyl_interval(&se, &sg, cfg, k)?;
        let v = ss.values()[k - 1];
        if v < lo - EIG_TOL || v > hi + EIG_TOL {
            weyl_violations += 1;
        }
    }

    let measured = frobenius_diff(&le, &star)?;
    let expected = (1.0 - cfg.alpha()) * frobenius_diff(&le, &lg)?;
    let frobenius_error = (measured - expected).abs();

    let (gap_input, gap_overshoot, gap_combined) = if n >= 2 {
        (spectral_gap(&sg)?, spectral_gap(&se)?, spectral_gap(&ss)?)
    } else {
        (0.0, 0.0, 0.0)
    };
    let gap_lower_ok = gap_combined >= gap_input.min(gap_overshoot) - EIG_TOL;
    let gap_upper_ok = gap_combined <= gap_input.max(gap_overshoot) + EIG_TOL;

    let commuting_error = commuting_interpolation_error(&lg, &le, cfg)?;
    let sorted_interpolation_error = max_abs_diff(&ss, &interpolated_spectrum(&sg, &se, cfg)?);

    Ok(PairReport {
        pair: idx,
        size: n,
        lambda1,
        lambda2,
        connectivity_ok,
        weyl_violations,
        frobenius_error,
        frobenius_ok: frobenius_error <= FROBENIUS_TOL,
        gap_input,
        gap_overshoot,
        gap_combined,
        gap_lower_ok,
        gap_upper_ok,
        commuting: commuting_error.is_some(),
        commuting_ok: commuting_error.map(|e| e < EIG_TOL),
        commuting_error,
        sorted_interpolation_error,
    })
}

/// Runs every check on each `(G, Gε)` pair. Pairs of different sizes are
/// padded with isolated nodes first.
pub fn verify_theorems(
    pairs: &[(Graph, Graph)],
    cfg: InterpolationConfig,
) -> Result<TheoremReport> {
    let reports = pairs
        .iter()
        .enumerate()
        .map(|(i, (g, ge))| check_pair(i, g, ge, cfg))
        .collect::<Result<Vec<_>>>()?;
    let count = |f: &dyn Fn(&PairReport) -> bool| reports.iter().filter(|p| f(p)).count();
    Ok(TheoremReport {
        alpha: cfg.alpha(),
        laplacian: LaplacianKind::Combinatorial,
        connectivity_violations: count(&|p| p.connectivity_ok == Some(false)),
        weyl_violations: count(&|p| p.weyl_violations > 0),
        frobenius_violations: count(&|p| !p.frobenius_ok),
        gap_lower_violations: count(&|p| !p.gap_lower_ok),
        gap_upper_violations: count(&|p| !p.gap_upper_ok),
        commuting_violations: count(&|p| p.commuting_ok == Some(false)),
        pairs: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{circulant, cycle, random_connected_graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(a: f64) -> InterpolationConfig {
        InterpolationConfig::new(a).unwrap()
    }

    #[test]
    fn identical_pair_passes_everything() {
        let g = circulant(7, &[1, 2]);
        for &a in &[0.0, 0.4, 1.0] {
            let r = verify_theorems(&[(g.clone(), g.clone())], cfg(a)).unwrap();
            assert!(r.provable_ok());
            assert_eq!(r.gap_upper_violations, 0);
            assert_eq!(r.pairs[0].connectivity_ok, Some(true));
            assert!(r.pairs[0].commuting);
        }
    }

    #[test]
    fn random_connected_pairs_satisfy_provable_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<_> = (0..200)
            .map(|_| {
                (
                    random_connected_graph(8, 3, &mut rng),
                    random_connected_graph(8, 5, &mut rng),
                )
            })
            .collect();
        let r = verify_theorems(&pairs, cfg(0.9)).unwrap();
        assert_eq!(r.connectivity_violations, 0);
        assert_eq!(r.weyl_violations, 0);
        assert_eq!(r.frobenius_violations, 0);
        assert_eq!(r.gap_lower_violations, 0);
        assert!(r.provable_ok());
    }

    #[test]
    fn commuting_circulants_interpolate_in_joint_basis() {
        let lg = cycle(10).laplacian(LaplacianKind::Combinatorial);
        let le = circulant(10, &[1, 3]).laplacian(LaplacianKind::Combinatorial);
        let err = commuting_interpolation_error(&lg, &le, cfg(0.5))
            .unwrap()
            .unwrap();
        assert!(err < EIG_TOL, "{err}");
    }

    #[test]
    fn non_commuting_pairs_are_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lg = random_connected_graph(6, 2, &mut rng).laplacian(LaplacianKind::Combinatorial);
        let le = random_connected_graph(6, 2, &mut rng).laplacian(LaplacianKind::Combinatorial);
        if commutator_max(&lg, &le) > COMMUTE_TOL {
            assert!(commuting_interpolation_error(&lg, &le, cfg(0.5))
                .unwrap()
                .is_none());
        }
    }

    #[test]
    fn disconnected_pair_skips_connectivity() {
        let g = Graph::empty(4, 1);
        let r = verify_theorems(&[(g.clone(), cycle(4))], cfg(0.5)).unwrap();
        assert_eq!(r.pairs[0].connectivity_ok, None);
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let g = cycle(5);
        let r = verify_theorems(&[(g.clone(), g.clone()), (g.clone(), g)], cfg(0.5)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 6);
    }
}
