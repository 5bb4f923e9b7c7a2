//! Per-instance rows, aggregates and the file formats they are written in.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::explainer::Counterfactual;
use crate::graph::Graph;

/// Column names of the aggregate tables.
pub const GED: &str = "GED";
pub const ORACLE_CALLS: &str = "Oracle Calls";
pub const VALIDITY: &str = "Validity";
pub const SPARSITY: &str = "Sparsity";
pub const FIDELITY: &str = "Fidelity";
pub const RUNTIME_MS: &str = "Runtime (ms)";

/// One explained test instance. Runtime is kept out of the CSV so reruns
/// produce identical files; it only enters the aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub fold: usize,
    pub explainer: String,
    /// Index of the input graph in the dataset.
    pub instance: usize,
    pub label: usize,
    pub input_class: usize,
    pub result_class: usize,
    pub validity: u8,
    pub fidelity: i8,
    pub ged: f64,
    pub ged_to_overshoot: f64,
    pub sparsity: f64,
    pub oracle_calls: u64,
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation; zeros for an empty slice.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Rows of one explainer on one fold (or pooled over folds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fold: Option<usize>,
    pub explainer: String,
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match name {
                GED => r.ged,
                ORACLE_CALLS => r.oracle_calls as f64,
                VALIDITY => f64::from(r.validity),
                SPARSITY => r.sparsity,
                FIDELITY => f64::from(r.fidelity),
                RUNTIME_MS => r.runtime_ms,
                other => panic!("unknown metric column `{other}`"),
            })
            .collect()
    }

    pub fn aggregate(&self) -> BTreeMap<String, Stat> {
        [GED, ORACLE_CALLS, VALIDITY, SPARSITY, FIDELITY, RUNTIME_MS]
            .into_iter()
            .map(|c| (c.to_string(), Stat::of(&self.column(c))))
            .collect()
    }

    pub fn mean(&self, name: &str) -> f64 {
        Stat::of(&self.column(name)).mean
    }

    /// Concatenates the rows of several reports.
    pub fn pooled(explainer: &str, reports: &[&MetricReport]) -> Self {
        Self {
            fold: None,
            explainer: explainer.to_string(),
            rows: reports
                .iter()
                .flat_map(|r| r.rows.iter().cloned())
                .collect(),
        }
    }
}

/// Resolved settings embedded in every emitted file: `# key: value` lines
/// at the top of a CSV, a `metadata` object in JSON.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata(Vec<(String, serde_json::Value)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        self.0.push((key.to_string(), serde_json::to_value(value)?));
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<&serde_json::Value> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(self.0.iter().cloned().collect())
    }

    pub fn write_header<W: Write>(&self, out: &mut W) -> Result<()> {
        for (k, v) in &self.0 {
            match v {
                serde_json::Value::String(s) => writeln!(out, "# {k}: {s}")?,
                other => writeln!(out, "# {k}: {other}")?,
            }
        }
        Ok(())
    }
}

/// Writes the metadata header, then the rows as CSV.
pub fn write_rows_csv<W: Write>(mut out: W, metadata: &Metadata, rows: &[MetricRow]) -> Result<()> {
    metadata.write_header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "fold",
            "explainer",
            "instance",
            "label",
            "input_class",
            "result_class",
            "validity",
            "fidelity",
            "ged",
            "ged_to_overshoot",
            "sparsity",
            "oracle_calls",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reader for the CSV files written here (skips `#` metadata lines).
pub fn csv_reader<R: std::io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub num_nodes: usize,
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
}

impl From<&Graph> for GraphRecord {
    fn from(g: &Graph) -> Self {
        Self {
            num_nodes: g.num_nodes(),
            features: g
                .node_features()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            edges: g.edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }
}

/// Export form of a counterfactual with its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub input: GraphRecord,
    pub overshoot: GraphRecord,
    pub result: GraphRecord,
    pub valid: bool,
    pub metrics: MetricRow,
    pub alpha: f64,
    pub seed: u64,
}

impl CounterfactualRecord {
    pub fn new(cf: &Counterfactual, metrics: MetricRow, alpha: f64, seed: u64) -> Self {
        Self {
            input: (&cf.input).into(),
            overshoot: (&cf.overshoot).into(),
            result: (&cf.result).into(),
            valid: cf.valid,
            metrics,
            alpha,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(validity: u8, fidelity: i8) -> MetricRow {
        MetricRow {
            fold: 0,
            explainer: "GIST".into(),
            instance: 0,
            label: 0,
            input_class: 0,
            result_class: 1,
            validity,
            fidelity,
            ged: 2.0,
            ged_to_overshoot: 1.0,
            sparsity: 0.1,
            oracle_calls: 4,
            runtime_ms: 1.5,
        }
    }

    #[test]
    fn aggregate_validity_is_row_mean() {
        let report = MetricReport {
            fold: Some(0),
            explainer: "GIST".into(),
            rows: vec![row(1, 1), row(0, 0), row(1, -1)],
        };
        let agg = report.aggregate();
        assert_eq!(agg[VALIDITY].mean, 2.0 / 3.0);
        assert_eq!(agg[FIDELITY].mean, 0.0);
        assert_eq!(
            agg[ORACLE_CALLS],
            Stat {
                mean: 4.0,
                std: 0.0
            }
        );
    }

    #[test]
    fn csv_round_trip_skips_metadata_and_runtime() {
        let mut buf = Vec::new();
        let meta = Metadata::new()
            .with("seed", 7)
            .unwrap()
            .with("dataset", "d.json")
            .unwrap();
        write_rows_csv(&mut buf, &meta, &[row(1, 1), row(0, 0)]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed: 7\n# dataset: d.json\n"));
        assert!(!text.contains("runtime"));
        let mut rdr = csv_reader(buf.as_slice());
        let rows: Vec<MetricRow> = rdr
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].validity, 1);
        assert_eq!(rows[0].runtime_ms, 0.0);
    }
}
