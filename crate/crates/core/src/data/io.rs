//! Dataset JSON files.
//!
//! ```json
//! {"name": "...", "num_classes": 2,
//!  "graphs": [{"features": [[0.0, 1.0]], "edges": [[0, 1]], "label": 0}]}
//! ```
//!
//! Undirected edges are listed once; the loader symmetrizes them. An optional
//! `metadata` object records how the file was produced and is ignored on load.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GistError, Result};
use crate::graph::{Dataset, Graph};

#[derive(Debug, Serialize, Deserialize)]
struct DatasetFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<serde_json::Value>,
    name: String,
    num_classes: usize,
    graphs: Vec<GraphRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    features: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    label: usize,
}

fn to_record(idx: usize, g: &Graph) -> Result<GraphRecord> {
    let label = g
        .label()
        .ok_or_else(|| GistError::Input(format!("graph {idx} has no label")))?;
    let a = g.adjacency();
    let mut edges = Vec::new();
    for (i, j) in g.edges() {
        if a[(i, j)] != 1.0 {
            return Err(GistError::Input(format!(
                "graph {idx} has non-binary weight {} on ({i},{j})",
                a[(i, j)]
            )));
        }
        edges.push([i, j]);
    }
    let features = g
        .node_features()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    Ok(GraphRecord {
        features,
        edges,
        label,
    })
}

fn from_record(idx: usize, rec: GraphRecord, num_classes: usize, dim: usize) -> Result<Graph> {
    let n = rec.features.len();
    if let Some(bad) = rec.features.iter().find(|r| r.len() != dim) {
        return Err(GistError::Shape(format!(
            "graph {idx}: feature row of length {} (expected {dim})",
            bad.len()
        )));
    }
    if rec.label >= num_classes {
        return Err(GistError::Label {
            graph: idx,
            label: rec.label,
            num_classes,
        });
    }
    let mut seen = BTreeSet::new();
    for &[i, j] in &rec.edges {
        let reason = if i >= n || j >= n {
            Some(format!("edge ({i},{j}) references a node outside 0..{n}"))
        } else if i == j {
            Some(format!("self-loop on node {i}"))
        } else if !seen.insert((i.min(j), i.max(j))) {
            Some(format!("edge ({i},{j}) listed more than once"))
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(GistError::EdgeList { graph: idx, reason });
        }
    }
    let features = DMatrix::from_fn(n, dim, |r, c| rec.features[r][c]);
    let edges: Vec<(usize, usize)> = seen.into_iter().collect();
    Graph::from_edges(features, &edges, Some(rec.label))
}

fn to_file(dataset: &Dataset, metadata: Option<serde_json::Value>) -> Result<DatasetFile> {
    Ok(DatasetFile {
        metadata,
        name: dataset.name.clone(),
        num_classes: dataset.num_classes,
        graphs: dataset
            .graphs
            .iter()
            .enumerate()
            .map(|(i, g)| to_record(i, g))
            .collect::<Result<_>>()?,
    })
}

/// Serializes a dataset to its canonical JSON text.
pub fn dataset_to_json(dataset: &Dataset) -> Result<String> {
    Ok(serde_json::to_string(&to_file(dataset, None)?)?)
}

pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    let file: DatasetFile = serde_json::from_str(text)?;
    let dim = file
        .graphs
        .first()
        .and_then(|g| g.features.first())
        .map_or(0, Vec::len);
    let num_classes = file.num_classes;
    let graphs = file
        .graphs
        .into_iter()
        .enumerate()
        .map(|(i, rec)| from_record(i, rec, num_classes, dim))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(file.name, num_classes, graphs)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut text = dataset_to_json(dataset)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Like [`save_dataset`], with a leading `metadata` object.
pub fn save_dataset_with_metadata(
    dataset: &Dataset,
    metadata: serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut text = serde_json::to_string(&to_file(dataset, Some(metadata))?)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    dataset_from_json(&fs::read_to_string(path)?)
}

/// SHA-256 of the canonical JSON serialization, hex encoded. Sensitive to
/// graph order.
pub fn dataset_hash(dataset: &Dataset) -> Result<String> {
    let text = dataset_to_json(dataset)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Family, GenSpec};

    #[test]
    fn round_trip_is_lossless() {
        for family in [Family::BaShapes, Family::TreeCycle, Family::ColorCount] {
            let d = generate(&GenSpec::new(family, 40, 3)).unwrap();
            let back = dataset_from_json(&dataset_to_json(&d).unwrap()).unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn round_trip_through_file() {
        let d = generate(&GenSpec::new(Family::TreeCycle, 10, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        save_dataset(&d, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), d);
    }

    #[test]
    fn metadata_is_ignored_on_load() {
        let d = generate(&GenSpec::new(Family::ColorCount, 12, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        save_dataset_with_metadata(&d, serde_json::json!({"seed": 2}), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"metadata":{"seed":2},"#));
        assert_eq!(load_dataset(&path).unwrap(), d);
    }

    #[test]
    fn single_listed_edge_is_symmetrized() {
        let text = r#"{"name":"t","num_classes":2,"graphs":[
            {"features":[[1.0],[2.0],[3.0]],"edges":[[0,1],[2,1]],"label":1}]}"#;
        let d = dataset_from_json(text).unwrap();
        let a = d.graphs[0].adjacency();
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 0)], 1.0);
        assert_eq!(a[(1, 2)], 1.0);
        assert_eq!(a[(2, 1)], 1.0);
    }

    #[test]
    fn distinct_error_kinds() {
        let bad_label = r#"{"name":"t","num_classes":2,"graphs":[
            {"features":[[1.0],[2.0]],"edges":[[0,1]],"label":2}]}"#;
        assert!(matches!(
            dataset_from_json(bad_label),
            Err(GistError::Label { label: 2, .. })
        ));
        let both_ways = r#"{"name":"t","num_classes":2,"graphs":[
            {"features":[[1.0],[2.0]],"edges":[[0,1],[1,0]],"label":0}]}"#;
        assert!(matches!(
            dataset_from_json(both_ways),
            Err(GistError::EdgeList { .. })
        ));
        let out_of_range = r#"{"name":"t","num_classes":2,"graphs":[
            {"features":[[1.0],[2.0]],"edges":[[0,5]],"label":0}]}"#;
        assert!(matches!(
            dataset_from_json(out_of_range),
            Err(GistError::EdgeList { .. })
        ));
        assert!(matches!(
            dataset_from_json("{not json"),
            Err(GistError::Json(_))
        ));
    }

    #[test]
    fn hash_is_stable_and_order_sensitive() {
        let d = generate(&GenSpec::new(Family::TreeCycle, 10, 1)).unwrap();
        let h1 = dataset_hash(&d).unwrap();
        assert_eq!(h1, dataset_hash(&d).unwrap());
        assert_eq!(h1.len(), 64);
        let mut swapped = d.clone();
        swapped.graphs.swap(0, 1);
        assert_ne!(h1, dataset_hash(&swapped).unwrap());
    }
}
