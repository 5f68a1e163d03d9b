//! Dual hypergraph transformation and the line-graph baseline.
//!
//! The dual of `G = (X, M, E)` is `G* = (E, Mᵀ, X)`: every edge becomes a
//! node and every node becomes a hyperedge. On sparse lists this is a pure
//! reshape of the edge list into a hyperedge list of `(dual node, hyperedge)`
//! pairs, where pairs `2i` and `2i + 1` both belong to dual node `i`:
//!
//! ```text
//! L  = [(u0, v0), (u1, v1), ...]
//! L* = [(0, u0), (0, v0), (1, u1), (1, v1), ...]
//! ```
//!
//! Because the layout is positional, the inverse needs no search and
//! preserves edge order, so `dht_inverse(dht(g)) == g` bit for bit.

use crate::graph::{DenseIncidence, Graph, GraphError};
use crate::tensor::Tensor;

/// A 2-regular hypergraph produced by [`dht`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualHypergraph {
    num_dual_nodes: usize,
    dual_node_features: Tensor,
    hyperedges: Vec<(usize, usize)>,
    num_hyperedges: usize,
    hyperedge_features: Tensor,
    label: Option<usize>,
}

impl DualHypergraph {
    /// Builds a hypergraph from parts, checking index bounds and feature
    /// shapes. Regularity is not checked here; see [`Self::is_two_regular`].
    pub fn new(
        num_dual_nodes: usize,
        dual_node_features: Tensor,
        hyperedges: Vec<(usize, usize)>,
        num_hyperedges: usize,
        hyperedge_features: Tensor,
    ) -> Result<Self, GraphError> {
        if dual_node_features.rows() != num_dual_nodes {
            return Err(GraphError::FeatureShape {
                what: "dual_node_features",
                expected: num_dual_nodes,
                got: dual_node_features.rows(),
            });
        }
        if hyperedge_features.rows() != num_hyperedges {
            return Err(GraphError::FeatureShape {
                what: "hyperedge_features",
                expected: num_hyperedges,
                got: hyperedge_features.rows(),
            });
        }
        for (p, &(d, h)) in hyperedges.iter().enumerate() {
            if d >= num_dual_nodes || h >= num_hyperedges {
                return Err(GraphError::Structure(format!(
                    "pair {p} = ({d}, {h}) out of range for {num_dual_nodes} dual nodes and {num_hyperedges} hyperedges"
                )));
            }
        }
        Ok(Self {
            num_dual_nodes,
            dual_node_features,
            hyperedges,
            num_hyperedges,
            hyperedge_features,
            label: None,
        })
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn num_dual_nodes(&self) -> usize {
        self.num_dual_nodes
    }

    pub fn num_hyperedges(&self) -> usize {
        self.num_hyperedges
    }

    pub fn dual_node_features(&self) -> &Tensor {
        &self.dual_node_features
    }

    pub fn hyperedge_features(&self) -> &Tensor {
        &self.hyperedge_features
    }

    /// The hyperedge list `L*` as `(dual node, hyperedge)` pairs.
    pub fn hyperedges(&self) -> &[(usize, usize)] {
        &self.hyperedges
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// Every dual node appears in exactly two pairs.
    pub fn is_two_regular(&self) -> bool {
        let mut count = vec![0usize; self.num_dual_nodes];
        for &(d, _) in &self.hyperedges {
            count[d] += 1;
        }
        count.iter().all(|&c| c == 2)
    }

    /// Dense `m x n` incidence between dual nodes and hyperedges.
    pub fn to_dense_incidence(&self) -> DenseIncidence {
        let mut m = Tensor::zeros(self.num_dual_nodes, self.num_hyperedges);
        for &(d, h) in &self.hyperedges {
            m.set(d, h, 1.0);
        }
        DenseIncidence { matrix: m }
    }
}

/// Reshapes a graph into its dual hypergraph. Runs in O(m) plus the
/// feature copies.
pub fn dht(g: &Graph) -> DualHypergraph {
    let mut hyperedges = Vec::with_capacity(2 * g.num_edges());
    for (i, &(u, v)) in g.edges().iter().enumerate() {
        hyperedges.push((i, u));
        hyperedges.push((i, v));
    }
    DualHypergraph {
        num_dual_nodes: g.num_edges(),
        dual_node_features: g.edge_features().clone(),
        hyperedges,
        num_hyperedges: g.num_nodes(),
        hyperedge_features: g.node_features().clone(),
        label: g.label(),
    }
}

/// Recovers the graph from a dual hypergraph in the positional layout
/// produced by [`dht`].
pub fn dht_inverse(h: &DualHypergraph) -> Result<Graph, GraphError> {
    let pairs = h.hyperedges();
    if pairs.len() != 2 * h.num_dual_nodes {
        return Err(GraphError::Structure(format!(
            "{} pairs for {} dual nodes; a dual hypergraph has exactly two per dual node",
            pairs.len(),
            h.num_dual_nodes
        )));
    }
    let mut edges = Vec::with_capacity(h.num_dual_nodes);
    for (i, chunk) in pairs.chunks_exact(2).enumerate() {
        let ((d0, u), (d1, v)) = (chunk[0], chunk[1]);
        if d0 != i || d1 != i {
            return Err(GraphError::Structure(format!(
                "pairs {} and {} belong to dual nodes {d0} and {d1}, expected {i}",
                2 * i,
                2 * i + 1
            )));
        }
        edges.push((u, v));
    }
    Graph::new(
        h.num_hyperedges,
        h.hyperedge_features.clone(),
        edges,
        h.dual_node_features.clone(),
    )
    .map(|g| g.with_label(h.label))
}

/// The line graph of `g`: one node per edge, two nodes adjacent iff the
/// edges share an endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGraph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub node_features: Tensor,
}

/// Builds the line graph by enumerating, for every node, all pairs of its
/// incident edges. Costs `Σ_v deg(v)²`. In a simple graph two distinct edges
/// share at most one endpoint, so no pair is produced twice.
pub fn line_graph(g: &Graph) -> LineGraph {
    let n = g.num_nodes();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        incident[u].push(e);
        incident[v].push(e);
    }
    let total: usize = incident
        .iter()
        .map(|l| l.len() * l.len().saturating_sub(1) / 2)
        .sum();
    let mut edges = Vec::with_capacity(total);
    for list in &incident {
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    LineGraph {
        num_nodes: g.num_edges(),
        edges,
        node_features: g.edge_features().clone(),
    }
}

/// `Σ_v C(deg_v, 2)`: the line graph's edge count without building it.
pub fn line_graph_edge_count(g: &Graph) -> usize {
    g.node_degrees()
        .iter()
        .map(|&d| d * d.saturating_sub(1) / 2)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(
            3,
            Tensor::from_nested(&[[1.0], [2.0], [3.0]]),
            vec![(0, 1), (1, 2)],
            Tensor::from_nested(&[[10.0, 11.0], [12.0, 13.0]]),
        )
        .unwrap()
    }

    #[test]
    fn reshape_layout() {
        let h = dht(&path3());
        assert_eq!(h.hyperedges(), &[(0, 0), (0, 1), (1, 1), (1, 2)]);
        assert_eq!(h.num_dual_nodes(), 2);
        assert_eq!(h.num_hyperedges(), 3);
        assert!(h.is_two_regular());
    }

    #[test]
    fn empty_graph_swaps_features() {
        let g = Graph::new(3, Tensor::filled(3, 2, 1.0), vec![], Tensor::zeros(0, 4)).unwrap();
        let h = dht(&g);
        assert!(h.hyperedges().is_empty());
        assert_eq!(h.dual_node_features().shape(), (0, 4));
        assert_eq!(h.hyperedge_features(), g.node_features());
    }

    #[test]
    fn single_edge_features() {
        let g = Graph::new(
            2,
            Tensor::from_nested(&[[1.0, 2.0], [3.0, 4.0]]),
            vec![(0, 1)],
            Tensor::from_nested(&[[7.0]]),
        )
        .unwrap();
        let h = dht(&g);
        assert_eq!(h.dual_node_features().data(), &[7.0]);
        assert_eq!(h.hyperedge_features(), g.node_features());
    }

    #[test]
    fn inverse_round_trip_and_hand_built() {
        let g = path3();
        assert!(dht_inverse(&dht(&g)).unwrap().bit_eq(&g));

        let h = DualHypergraph::new(
            1,
            Tensor::zeros(1, 0),
            vec![(0, 0), (0, 1)],
            2,
            Tensor::zeros(2, 0),
        )
        .unwrap();
        assert_eq!(dht_inverse(&h).unwrap().edges(), &[(0, 1)]);
    }

    #[test]
    fn inverse_rejects_three_incidences() {
        let h = DualHypergraph::new(
            1,
            Tensor::zeros(1, 0),
            vec![(0, 0), (0, 1), (0, 2)],
            3,
            Tensor::zeros(3, 0),
        )
        .unwrap();
        assert!(!h.is_two_regular());
        assert!(matches!(dht_inverse(&h), Err(GraphError::Structure(_))));
    }

    #[test]
    fn inverse_rejects_non_positional_layout() {
        let h = DualHypergraph::new(
            2,
            Tensor::zeros(2, 0),
            vec![(0, 0), (1, 1), (0, 1), (1, 2)],
            3,
            Tensor::zeros(3, 0),
        )
        .unwrap();
        assert!(h.is_two_regular());
        assert!(matches!(dht_inverse(&h), Err(GraphError::Structure(_))));
    }

    #[test]
    fn incidence_is_transposed() {
        let g = path3();
        assert_eq!(
            dht(&g).to_dense_incidence(),
            g.to_dense_incidence().transpose()
        );
    }

    #[test]
    fn line_graph_examples() {
        let star = Graph::featureless(5, (1..5).map(|i| (0, i)).collect()).unwrap();
        assert_eq!(line_graph(&star).edges.len(), 6);
        assert_eq!(line_graph_edge_count(&star), 6);
        assert_eq!(line_graph(&path3()).edges, vec![(0, 1)]);
        let single = Graph::featureless(2, vec![(0, 1)]).unwrap();
        assert!(line_graph(&single).edges.is_empty());
    }

    #[test]
    fn line_graph_matches_pairwise_definition() {
        let g = Graph::featureless(5, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4)]).unwrap();
        let mut got = line_graph(&g).edges;
        got.sort();
        let mut want = Vec::new();
        let e = g.edges();
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                let (a, b) = e[i];
                let (c, d) = e[j];
                if a == c || a == d || b == c || b == d {
                    want.push((i, j));
                }
            }
        }
        assert_eq!(got, want);
    }
}
