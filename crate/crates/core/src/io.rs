//! JSON interchange for graphs and dual hypergraphs.
//!
//! Graph files:
//!
//! ```json
//! {"num_nodes": 3,
//!  "node_features": [[1.0], [2.0], [3.0]],
//!  "edges": [[0, 1], [1, 2]],
//!  "edge_features": [[0.5], [1.5]],
//!  "label": 1}
//! ```
//!
//! `edge_features` may be omitted for featureless edges and `label` is
//! optional. `node_feature_dim` and `edge_feature_dim` may be given to keep
//! the feature width when there are no rows to carry it; the writer always
//! emits them.
//!
//! Dual hypergraph files use `num_dual_nodes`, `dual_node_features`,
//! `num_hyperedges`, `hyperedge_features` and `hyperedges` (a list of
//! `[dual_node, hyperedge]` pairs).
//!
//! Floats are written in shortest round-trip form, so `read(write(g))`
//! reproduces every bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dht::DualHypergraph;
use crate::graph::Graph;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    num_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_feature_dim: Option<usize>,
    node_features: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_feature_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualJson {
    num_dual_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dual_node_feature_dim: Option<usize>,
    dual_node_features: Vec<Vec<f64>>,
    num_hyperedges: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hyperedge_feature_dim: Option<usize>,
    hyperedge_features: Vec<Vec<f64>>,
    hyperedges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
}

/// Either document kind, as detected by [`read_json_document`].
#[derive(Debug, Clone)]
pub enum JsonDocument {
    Graph(Graph),
    Dual(DualHypergraph),
}

fn rows_to_tensor(what: &str, rows: &[Vec<f64>], declared: Option<usize>) -> Result<Tensor> {
    let cols = declared.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    Tensor::from_rows(rows, cols)
        .map_err(|e| Error::Invalid(format!("{what}: {e}")))
}

fn parse_error(path: &str, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn graph_to_json(g: &Graph) -> String {
    let doc = GraphJson {
        num_nodes: g.num_nodes(),
        node_feature_dim: Some(g.node_dim()),
        node_features: g.node_features().to_rows(),
        edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
        edge_feature_dim: Some(g.edge_dim()),
        edge_features: Some(g.edge_features().to_rows()),
        label: g.label(),
    };
    serde_json::to_string(&doc).expect("graph documents always serialize")
}

/// Parses a graph document; `source` names the input in error messages.
pub fn graph_from_json(text: &str, source: &str) -> Result<Graph> {
    let doc: GraphJson = serde_json::from_str(text).map_err(|e| parse_error(source, e))?;
    graph_from_doc(doc)
}

fn graph_from_doc(doc: GraphJson) -> Result<Graph> {
    let x = rows_to_tensor("node_features", &doc.node_features, doc.node_feature_dim)?;
    let m = doc.edges.len();
    let e = match &doc.edge_features {
        Some(rows) => rows_to_tensor("edge_features", rows, doc.edge_feature_dim)?,
        None => match doc.edge_feature_dim {
            None | Some(0) => Tensor::zeros(m, 0),
            Some(d) if m == 0 => Tensor::zeros(0, d),
            Some(d) => {
                return Err(Error::Invalid(format!(
                    "edge_features missing but edge_feature_dim is {d}"
                )))
            }
        },
    };
    let edges = doc.edges.iter().map(|&[u, v]| (u, v)).collect();
    Ok(Graph::new(doc.num_nodes, x, edges, e)?.with_label(doc.label))
}

pub fn dual_to_json(h: &DualHypergraph) -> String {
    let doc = DualJson {
        num_dual_nodes: h.num_dual_nodes(),
        dual_node_feature_dim: Some(h.dual_node_features().cols()),
        dual_node_features: h.dual_node_features().to_rows(),
        num_hyperedges: h.num_hyperedges(),
        hyperedge_feature_dim: Some(h.hyperedge_features().cols()),
        hyperedge_features: h.hyperedge_features().to_rows(),
        hyperedges: h.hyperedges().iter().map(|&(d, e)| [d, e]).collect(),
        label: h.label(),
    };
    serde_json::to_string(&doc).expect("dual documents always serialize")
}

pub fn dual_from_json(text: &str, source: &str) -> Result<DualHypergraph> {
    let doc: DualJson = serde_json::from_str(text).map_err(|e| parse_error(source, e))?;
    dual_from_doc(doc)
}

fn dual_from_doc(doc: DualJson) -> Result<DualHypergraph> {
    let e = rows_to_tensor("dual_node_features", &doc.dual_node_features, doc.dual_node_feature_dim)?;
    let x = rows_to_tensor("hyperedge_features", &doc.hyperedge_features, doc.hyperedge_feature_dim)?;
    let pairs = doc.hyperedges.iter().map(|&[d, h]| (d, h)).collect();
    Ok(DualHypergraph::new(doc.num_dual_nodes, e, pairs, doc.num_hyperedges, x)?.with_label(doc.label))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn read_graph_json(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    graph_from_json(&read_text(path)?, &path.display().to_string())
}

pub fn write_graph_json(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &graph_to_json(g))
}

pub fn read_dual_json(path: impl AsRef<Path>) -> Result<DualHypergraph> {
    let path = path.as_ref();
    dual_from_json(&read_text(path)?, &path.display().to_string())
}

pub fn write_dual_json(h: &DualHypergraph, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &dual_to_json(h))
}

/// Reads a graph or a dual hypergraph, telling them apart by their keys.
pub fn read_json_document(path: impl AsRef<Path>) -> Result<JsonDocument> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| parse_error(&source, e))?;
    if value.get("num_dual_nodes").is_some() {
        Ok(JsonDocument::Dual(dual_from_json(&text, &source)?))
    } else {
        Ok(JsonDocument::Graph(graph_from_json(&text, &source)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_clustered_edge_colors, gen_erdos_renyi_paired};
    use crate::dht::dht;
    use crate::graph::GraphError;

    #[test]
    fn round_trip_generated_graphs() {
        for g in [
            gen_clustered_edge_colors(40, 3, 3, 2).unwrap(),
            gen_erdos_renyi_paired(30, 60, 4).unwrap().with_label(Some(3)),
        ] {
            let back = graph_from_json(&graph_to_json(&g), "mem").unwrap();
            assert!(back.bit_eq(&g));
            assert_eq!(back.label(), g.label());
        }
    }

    #[test]
    fn awkward_floats_survive() {
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 5e-324, -0.0];
        let x = Tensor::new(vals.len(), 1, vals.to_vec()).unwrap();
        let g = Graph::new(vals.len(), x, vec![], Tensor::zeros(0, 0)).unwrap();
        let back = graph_from_json(&graph_to_json(&g), "mem").unwrap();
        assert!(back.bit_eq(&g));
    }

    #[test]
    fn self_loop_is_a_graph_error() {
        let text = r#"{"num_nodes": 2, "node_features": [[0], [1]], "edges": [[0, 0]], "edge_features": [[1]]}"#;
        let err = graph_from_json(text, "loop.json").unwrap_err();
        assert!(matches!(err, Error::Graph(GraphError::SelfLoop { edge: 0, node: 0 })));
    }

    #[test]
    fn missing_edge_features_means_featureless() {
        let text = r#"{"num_nodes": 2, "node_features": [[0], [1]], "edges": [[0, 1]], "edge_feature_dim": 0}"#;
        let g = graph_from_json(text, "f.json").unwrap();
        assert_eq!(g.edge_features().shape(), (1, 0));
        let text = r#"{"num_nodes": 2, "node_features": [[0], [1]], "edges": [[0, 1]]}"#;
        assert_eq!(graph_from_json(text, "f.json").unwrap().edge_dim(), 0);
        let text = r#"{"num_nodes": 2, "node_features": [[0], [1]], "edges": [[0, 1]], "edge_feature_dim": 2}"#;
        assert!(graph_from_json(text, "f.json").is_err());
    }

    #[test]
    fn parse_errors_carry_position() {
        let text = "{\"num_nodes\": 2,\n \"node_features\": [[0], [1]],\n \"edges\": [[0, 1]; }";
        match graph_from_json(text, "bad.json").unwrap_err() {
            Error::Parse { path, line, .. } => {
                assert_eq!(path, "bad.json");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = r#"{"num_nodes": 2, "node_features": [[0, 1], [1]], "edges": []}"#;
        assert!(matches!(graph_from_json(text, "r.json"), Err(Error::Invalid(_))));
    }

    #[test]
    fn empty_graph_keeps_widths() {
        let g = Graph::new(0, Tensor::zeros(0, 4), vec![], Tensor::zeros(0, 2)).unwrap();
        let back = graph_from_json(&graph_to_json(&g), "mem").unwrap();
        assert_eq!(back.node_dim(), 4);
        assert_eq!(back.edge_dim(), 2);
    }

    #[test]
    fn files_and_detection() {
        let dir = tempfile::tempdir().unwrap();
        let g = gen_erdos_renyi_paired(10, 12, 1).unwrap();
        let gp = dir.path().join("g.json");
        let hp = dir.path().join("h.json");
        write_graph_json(&g, &gp).unwrap();
        write_dual_json(&dht(&g), &hp).unwrap();
        assert!(read_graph_json(&gp).unwrap().bit_eq(&g));
        assert_eq!(read_dual_json(&hp).unwrap(), dht(&g));
        assert!(matches!(read_json_document(&gp).unwrap(), JsonDocument::Graph(_)));
        assert!(matches!(read_json_document(&hp).unwrap(), JsonDocument::Dual(_)));
        assert!(matches!(
            read_graph_json(dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }
}
