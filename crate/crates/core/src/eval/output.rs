//! Files written by the experiment commands. Every file starts with the run
//! metadata; CSV rows never contain wall-clock values, so reruns with the same
//! seed reproduce them byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::analysis::{SpectraOutcome, SweepOutcome};
use super::cv::CvOutcome;
use super::report::{write_rows_csv, Metadata, MetricReport, Stat};
use crate::error::Result;
use crate::spectral::TheoremReport;

pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const COUNTERFACTUALS_FILE: &str = "counterfactuals.json";

pub fn fold_csv_name(fold: usize) -> String {
    format!("fold_{fold}.csv")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationFiles {
    pub fold_csvs: Vec<PathBuf>,
    pub aggregate: PathBuf,
    pub counterfactuals: PathBuf,
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    oracle_accuracy: f64,
    explainers: BTreeMap<String, BTreeMap<String, Stat>>,
}

#[derive(Serialize)]
struct Aggregate<'a> {
    metadata: serde_json::Value,
    mean_oracle_accuracy: f64,
    /// Explainer name, then table column name.
    explainers: BTreeMap<String, BTreeMap<String, Stat>>,
    folds: Vec<FoldSummary>,
    gist_train_loss: Vec<&'a [f64]>,
}

fn by_explainer(reports: &[&MetricReport]) -> BTreeMap<String, BTreeMap<String, Stat>> {
    reports
        .iter()
        .map(|r| (r.explainer.clone(), r.aggregate()))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes one CSV per fold (rows of every explainer), the aggregate JSON and
/// the counterfactual export into `dir`, creating it if needed.
pub fn write_evaluation(
    outcome: &CvOutcome,
    metadata: &Metadata,
    dir: &Path,
) -> Result<EvaluationFiles> {
    fs::create_dir_all(dir)?;
    let mut fold_csvs = Vec::with_capacity(outcome.folds.len());
    for f in &outcome.folds {
        let path = dir.join(fold_csv_name(f.fold));
        let rows: Vec<_> = f.gist.rows.iter().chain(&f.irand.rows).cloned().collect();
        let meta = metadata.clone().with("fold", f.fold)?;
        let mut buf = Vec::new();
        write_rows_csv(&mut buf, &meta, &rows)?;
        fs::write(&path, buf)?;
        fold_csvs.push(path);
    }

    let (gist, irand) = (outcome.pooled_gist(), outcome.pooled_irand());
    let aggregate = Aggregate {
        metadata: metadata.to_json(),
        mean_oracle_accuracy: outcome.mean_oracle_accuracy(),
        explainers: by_explainer(&[&gist, &irand]),
        folds: outcome
            .folds
            .iter()
            .map(|f| FoldSummary {
                fold: f.fold,
                oracle_accuracy: f.oracle_accuracy,
                explainers: by_explainer(&[&f.gist, &f.irand]),
            })
            .collect(),
        gist_train_loss: outcome
            .folds
            .iter()
            .map(|f| f.gist_train_loss.as_slice())
            .collect(),
    };
    let aggregate_path = dir.join(AGGREGATE_FILE);
    write_json(&aggregate_path, &aggregate)?;

    let records: Vec<_> = outcome
        .folds
        .iter()
        .flat_map(|f| &f.counterfactuals)
        .collect();
    let counterfactuals = dir.join(COUNTERFACTUALS_FILE);
    write_json(
        &counterfactuals,
        &serde_json::json!({ "metadata": metadata.to_json(), "counterfactuals": records }),
    )?;
    Ok(EvaluationFiles {
        fold_csvs,
        aggregate: aggregate_path,
        counterfactuals,
    })
}

/// One row per α.
pub fn write_sweep_csv<W: Write>(
    mut out: W,
    metadata: &Metadata,
    sweep: &SweepOutcome,
) -> Result<()> {
    metadata.write_header(&mut out)?;
    writeln!(out, "# spearman_alpha_ged_input: {}", sweep.spearman_input)?;
    writeln!(
        out,
        "# spearman_alpha_ged_overshoot: {}",
        sweep.spearman_overshoot
    )?;
    let mut w = csv::Writer::from_writer(out);
    for r in &sweep.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SpectraLine {
    pair: usize,
    instance: usize,
    index: usize,
    input: f64,
    overshoot: f64,
    result: f64,
    optimal: f64,
    combined: f64,
    gap_input: f64,
    gap_overshoot: f64,
    gap_result: f64,
    lambda1_result: f64,
    lambda2_result: f64,
    result_connected: bool,
    frobenius_result: f64,
    frobenius_expected: f64,
    frobenius_relative_error: f64,
    alignment_error: f64,
}

/// Long format: one row per pair and eigenvalue index, with the per-pair
/// scalars repeated on each row.
pub fn write_spectra_csv<W: Write>(
    mut out: W,
    metadata: &Metadata,
    spectra: &SpectraOutcome,
) -> Result<()> {
    metadata.write_header(&mut out)?;
    writeln!(
        out,
        "# mean_alignment_error: {}",
        spectra.mean_alignment_error
    )?;
    writeln!(
        out,
        "# mean_frobenius_relative_error: {}",
        spectra.mean_frobenius_relative_error
    )?;
    let mut w = csv::Writer::from_writer(out);
    for r in &spectra.rows {
        for index in 0..r.size {
            w.serialize(SpectraLine {
                pair: r.pair,
                instance: r.instance,
                index,
                input: r.input[index],
                overshoot: r.overshoot[index],
                result: r.result[index],
                optimal: r.optimal[index],
                combined: r.combined[index],
                gap_input: r.gap_input,
                gap_overshoot: r.gap_overshoot,
                gap_result: r.gap_result,
                lambda1_result: r.lambda1_result,
                lambda2_result: r.lambda2_result,
                result_connected: r.result_connected,
                frobenius_result: r.frobenius_result,
                frobenius_expected: r.frobenius_expected,
                frobenius_relative_error: r.frobenius_relative_error,
                alignment_error: r.alignment_error,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_theorem_csv<W: Write>(
    mut out: W,
    metadata: &Metadata,
    report: &TheoremReport,
) -> Result<()> {
    metadata.write_header(&mut out)?;
    report.write_csv(out)
}

pub fn write_theorem_json(path: &Path, metadata: &Metadata, report: &TheoremReport) -> Result<()> {
    write_json(
        path,
        &serde_json::json!({
            "metadata": metadata.to_json(),
            "provable_ok": report.provable_ok(),
            "report": report,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{SpectraRow, SweepRow};
    use crate::graph::LaplacianKind;

    fn meta() -> Metadata {
        Metadata::new().with("seed", 3).unwrap()
    }

    #[test]
    fn sweep_csv_has_one_row_per_alpha() {
        let sweep = SweepOutcome {
            rows: [0.1, 0.5, 0.9]
                .iter()
                .map(|&alpha| SweepRow {
                    alpha,
                    mean_ged_input: alpha * 10.0,
                    mean_ged_overshoot: 1.0 - alpha,
                    validity: 1.0,
                })
                .collect(),
            spearman_input: 1.0,
            spearman_overshoot: -1.0,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &meta(), &sweep).unwrap();
        assert!(!buf.contains(&b'\r'));
        let rows: Vec<SweepRow> = crate::eval::csv_reader(buf.as_slice())
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .unwrap();
        assert_eq!(rows, sweep.rows);
    }

    #[test]
    fn spectra_csv_is_long_format() {
        let row = SpectraRow {
            pair: 0,
            instance: 4,
            size: 2,
            input: vec![0.0, 2.0],
            overshoot: vec![0.0, 1.0],
            result: vec![0.0, 1.1],
            optimal: vec![0.0, 1.1],
            combined: vec![0.0, 1.1],
            alignment_error: 0.0,
            gap_input: 2.0,
            gap_overshoot: 1.0,
            gap_result: 1.1,
            lambda1_result: 0.0,
            lambda2_result: 1.1,
            result_connected: true,
            frobenius_result: 0.1,
            frobenius_expected: 0.1,
            frobenius_relative_error: 0.0,
        };
        let spectra = SpectraOutcome {
            alpha: 0.9,
            laplacian: LaplacianKind::Normalized,
            rows: vec![row],
            mean_alignment_error: 0.0,
            mean_frobenius_relative_error: 0.0,
        };
        let mut buf = Vec::new();
        write_spectra_csv(&mut buf, &meta(), &spectra).unwrap();
        let mut rdr = crate::eval::csv_reader(buf.as_slice());
        let records: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), 2);
        assert_eq!(&records[1][2], "1");
        assert_eq!(&records[1][6], "1.1");
    }
}
