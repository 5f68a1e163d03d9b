//! Sparse graph triplets: node features, an undirected edge list and edge
//! features.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {edge} has endpoint {endpoint} but the graph has {num_nodes} nodes")]
    EndpointOutOfRange {
        edge: usize,
        endpoint: usize,
        num_nodes: usize,
    },
    #[error("edge {edge} is a self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("edges {first} and {second} both connect {{{u}, {v}}}")]
    DuplicateEdge {
        first: usize,
        second: usize,
        u: usize,
        v: usize,
    },
    #[error("{what} has {got} rows, expected {expected}")]
    FeatureShape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("dual hypergraph structure: {0}")]
    Structure(String),
}

/// An undirected simple graph `(X, L, E)`.
///
/// Construction validates every invariant, so a `Graph` value is always
/// well formed: endpoints in range, no self-loops, no duplicate `{u, v}`,
/// `X` with one row per node and `E` with one row per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    node_features: Tensor,
    edges: Vec<(usize, usize)>,
    edge_features: Tensor,
    label: Option<usize>,
}

/// Checks the graph invariants on raw parts.
pub fn validate(
    num_nodes: usize,
    node_features: &Tensor,
    edges: &[(usize, usize)],
    edge_features: &Tensor,
) -> Result<(), GraphError> {
    if node_features.rows() != num_nodes {
        return Err(GraphError::FeatureShape {
            what: "node_features",
            expected: num_nodes,
            got: node_features.rows(),
        });
    }
    if edge_features.rows() != edges.len() {
        return Err(GraphError::FeatureShape {
            what: "edge_features",
            expected: edges.len(),
            got: edge_features.rows(),
        });
    }
    let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
    for (i, &(u, v)) in edges.iter().enumerate() {
        for endpoint in [u, v] {
            if endpoint >= num_nodes {
                return Err(GraphError::EndpointOutOfRange {
                    edge: i,
                    endpoint,
                    num_nodes,
                });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop { edge: i, node: u });
        }
        let key = (u.min(v), u.max(v));
        if let Some(&first) = seen.get(&key) {
            return Err(GraphError::DuplicateEdge {
                first,
                second: i,
                u: key.0,
                v: key.1,
            });
        }
        seen.insert(key, i);
    }
    Ok(())
}

impl Graph {
    pub fn new(
        num_nodes: usize,
        node_features: Tensor,
        edges: Vec<(usize, usize)>,
        edge_features: Tensor,
    ) -> Result<Self, GraphError> {
        validate(num_nodes, &node_features, &edges, &edge_features)?;
        Ok(Self {
            num_nodes,
            node_features,
            edges,
            edge_features,
            label: None,
        })
    }

    /// Graph whose node and edge features are all zero-width.
    pub fn featureless(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let m = edges.len();
        Self::new(num_nodes, Tensor::zeros(num_nodes, 0), edges, Tensor::zeros(m, 0))
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    /// Re-runs validation. Always `Ok` for values built through [`Graph::new`].
    pub fn validate(&self) -> Result<(), GraphError> {
        validate(
            self.num_nodes,
            &self.node_features,
            &self.edges,
            &self.edge_features,
        )
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_features(&self) -> &Tensor {
        &self.node_features
    }

    pub fn edge_features(&self) -> &Tensor {
        &self.edge_features
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn node_dim(&self) -> usize {
        self.node_features.cols()
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_features.cols()
    }

    pub fn replace_edge_features(&self, edge_features: Tensor) -> Result<Self, GraphError> {
        let g = Self::new(
            self.num_nodes,
            self.node_features.clone(),
            self.edges.clone(),
            edge_features,
        )?;
        Ok(g.with_label(self.label))
    }

    pub fn replace_node_features(&self, node_features: Tensor) -> Result<Self, GraphError> {
        let g = Self::new(
            self.num_nodes,
            node_features,
            self.edges.clone(),
            self.edge_features.clone(),
        )?;
        Ok(g.with_label(self.label))
    }

    /// Keeps the listed edges (in the given order) and every node.
    pub fn edge_subgraph(&self, kept: &[usize]) -> Graph {
        Graph {
            num_nodes: self.num_nodes,
            node_features: self.node_features.clone(),
            edges: kept.iter().map(|&i| self.edges[i]).collect(),
            edge_features: self.edge_features.select_rows(kept),
            label: self.label,
        }
    }

    /// Number of incident edges per node.
    pub fn node_degrees(&self) -> Vec<usize> {
        degrees(self.num_nodes, &self.edges)
    }

    pub fn to_dense_incidence(&self) -> DenseIncidence {
        let mut m = Tensor::zeros(self.num_nodes, self.edges.len());
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            m.set(u, e, 1.0);
            m.set(v, e, 1.0);
        }
        DenseIncidence { matrix: m }
    }

    /// Bit-exact equality, including features and edge order.
    pub fn bit_eq(&self, other: &Graph) -> bool {
        self.num_nodes == other.num_nodes
            && self.edges == other.edges
            && self.label == other.label
            && self.node_features.bit_eq(&other.node_features)
            && self.edge_features.bit_eq(&other.edge_features)
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`, and reorders
    /// edges so that new edge `j` is old edge `edge_order[j]`.
    pub fn permuted(&self, perm: &[usize], edge_order: &[usize]) -> Graph {
        let mut inv = vec![0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        Graph {
            num_nodes: self.num_nodes,
            node_features: self.node_features.select_rows(&inv),
            edges: edge_order
                .iter()
                .map(|&e| {
                    let (u, v) = self.edges[e];
                    (perm[u], perm[v])
                })
                .collect(),
            edge_features: self.edge_features.select_rows(edge_order),
            label: self.label,
        }
    }
}

pub(crate) fn degrees(num_nodes: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut deg = vec![0usize; num_nodes];
    for &(u, v) in edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    deg
}

/// Binary `n x m` incidence matrix. Only used as a test oracle; all learning
/// paths work on sparse lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIncidence {
    pub matrix: Tensor,
}

impl DenseIncidence {
    pub fn column_sums(&self) -> Vec<f64> {
        let m = &self.matrix;
        (0..m.cols())
            .map(|c| (0..m.rows()).map(|r| m.get(r, c)).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let m = &self.matrix;
        (0..m.rows()).map(|r| m.row(r).iter().sum()).collect()
    }

    pub fn transpose(&self) -> DenseIncidence {
        DenseIncidence {
            matrix: self.matrix.transpose(),
        }
    }
}

/// Index arrays shared by every layer that runs on one graph structure.
///
/// Built once per structure in O(n + m). Messages are listed per directed
/// half-edge: for edge `e = (u, v)` message `2e` goes `u -> v` and `2e + 1`
/// goes `v -> u`. The dual hyperedge list follows the positional layout of
/// [`crate::dht::dht`]: pairs `2e` and `2e + 1` belong to dual node `e`.
#[derive(Debug, Clone)]
pub struct Topology {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub edges: Arc<[(usize, usize)]>,
    pub degree: Vec<usize>,
    /// Source node of each directed message.
    pub msg_src: Arc<[usize]>,
    /// Target node of each directed message.
    pub msg_dst: Arc<[usize]>,
    /// Edge carrying each directed message.
    pub msg_edge: Arc<[usize]>,
    /// `1 / sqrt((deg_u + 1)(deg_v + 1))` per message.
    pub msg_norm: Tensor,
    /// `1 / (deg_v + 1)` per node.
    pub self_norm: Tensor,
    /// Dual node of each hyperedge-list pair.
    pub pair_dual: Arc<[usize]>,
    /// Hyperedge (original node) of each hyperedge-list pair.
    pub pair_hyperedge: Arc<[usize]>,
}

impl Topology {
    pub fn new(num_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let m = edges.len();
        let degree = degrees(num_nodes, edges);
        let mut msg_src = Vec::with_capacity(2 * m);
        let mut msg_dst = Vec::with_capacity(2 * m);
        let mut msg_edge = Vec::with_capacity(2 * m);
        let mut msg_norm = Vec::with_capacity(2 * m);
        let mut pair_hyperedge = Vec::with_capacity(2 * m);
        let mut pair_dual = Vec::with_capacity(2 * m);
        for (e, &(u, v)) in edges.iter().enumerate() {
            let norm = 1.0 / (((degree[u] + 1) * (degree[v] + 1)) as f64).sqrt();
            msg_src.extend([u, v]);
            msg_dst.extend([v, u]);
            msg_edge.extend([e, e]);
            msg_norm.extend([norm, norm]);
            pair_dual.extend([e, e]);
            pair_hyperedge.extend([u, v]);
        }
        let self_norm: Vec<f64> = degree.iter().map(|&d| 1.0 / (d + 1) as f64).collect();
        Self {
            num_nodes,
            num_edges: m,
            edges: edges.into(),
            degree,
            msg_src: msg_src.into(),
            msg_dst: msg_dst.into(),
            msg_edge: msg_edge.into(),
            msg_norm: Tensor::column(&msg_norm),
            self_norm: Tensor::column(&self_norm),
            pair_dual: pair_dual.into(),
            pair_hyperedge: pair_hyperedge.into(),
        }
    }

    pub fn of(g: &Graph) -> Self {
        Self::new(g.num_nodes(), g.edges())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::featureless(3, vec![(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn validate_accepts_single_edge() {
        let g = Graph::new(
            2,
            Tensor::zeros(2, 1),
            vec![(0, 1)],
            Tensor::zeros(1, 3),
        )
        .unwrap();
        assert!(g.validate().is_ok());
    }

    #[test]
    fn validate_error_variants() {
        assert_eq!(
            Graph::featureless(2, vec![(0, 0)]).unwrap_err(),
            GraphError::SelfLoop { edge: 0, node: 0 }
        );
        assert_eq!(
            Graph::featureless(2, vec![(0, 1), (1, 0)]).unwrap_err(),
            GraphError::DuplicateEdge {
                first: 0,
                second: 1,
                u: 0,
                v: 1
            }
        );
        assert_eq!(
            Graph::featureless(2, vec![(0, 2)]).unwrap_err(),
            GraphError::EndpointOutOfRange {
                edge: 0,
                endpoint: 2,
                num_nodes: 2
            }
        );
        assert!(matches!(
            Graph::new(2, Tensor::zeros(3, 1), vec![], Tensor::zeros(0, 1)),
            Err(GraphError::FeatureShape { what: "node_features", .. })
        ));
        assert!(matches!(
            Graph::new(2, Tensor::zeros(2, 1), vec![(0, 1)], Tensor::zeros(2, 1)),
            Err(GraphError::FeatureShape { what: "edge_features", .. })
        ));
    }

    #[test]
    fn dense_incidence_examples() {
        let m = path3().to_dense_incidence();
        assert_eq!(
            m.matrix,
            Tensor::from_nested(&[[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        );
        let single = Graph::featureless(2, vec![(0, 1)]).unwrap();
        assert_eq!(
            single.to_dense_incidence().matrix,
            Tensor::from_nested(&[[1.0], [1.0]])
        );
        let empty = Graph::featureless(4, vec![]).unwrap();
        assert_eq!(empty.to_dense_incidence().matrix.shape(), (4, 0));
    }

    #[test]
    fn degree_examples() {
        assert_eq!(path3().node_degrees(), vec![1, 2, 1]);
        let star = Graph::featureless(5, (1..5).map(|i| (0, i)).collect()).unwrap();
        assert_eq!(star.node_degrees()[0], 4);
        let isolated = Graph::featureless(3, vec![(0, 1)]).unwrap();
        assert_eq!(isolated.node_degrees()[2], 0);
    }

    #[test]
    fn topology_layout() {
        let t = Topology::of(&path3());
        assert_eq!(&*t.pair_dual, &[0, 0, 1, 1]);
        assert_eq!(&*t.pair_hyperedge, &[0, 1, 1, 2]);
        assert_eq!(&*t.msg_src, &[0, 1, 1, 2]);
        assert_eq!(&*t.msg_dst, &[1, 0, 2, 1]);
        let n01 = 1.0 / 6f64.sqrt();
        assert!((t.msg_norm.get(0, 0) - n01).abs() < 1e-15);
        assert_eq!(t.self_norm.data(), &[0.5, 1.0 / 3.0, 0.5]);
    }
}
