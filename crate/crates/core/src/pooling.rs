//! Edge pooling: cluster pooling on the dual hypergraph and score-based
//! edge drop.
//!
//! Cluster pooling coarsens edges with a row-stochastic assignment `C`
//! (`m x m_pool`):
//!
//! ```text
//! E_pool = Cᵀ E'        M_pool = M C        (unpool: E ≈ C E_pool)
//! ```
//!
//! Edge drop scores every dual node, keeps the top `k` and maps the pruned
//! dual back to a graph. Nodes are never removed. Kept edge features are
//! gated by their scores so the score function receives gradient.

use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{Reduce, Tape, Var};
use crate::dht::{dht, dht_inverse, DualHypergraph};
use crate::graph::{Graph, Topology};
use crate::layers::{gcn_forward_weighted, EhgnnLayer, GcnLayer};
use crate::optim::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic `m x m_pool` soft assignment of edges to clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    c: Tensor,
}

impl ClusterAssignment {
    pub fn new(c: Tensor) -> Result<Self> {
        if c.cols() == 0 {
            return Err(Error::Invalid("assignment needs at least one cluster".into()));
        }
        for r in 0..c.rows() {
            let s: f64 = c.row(r).iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL || c.row(r).iter().any(|&v| v < 0.0) {
                return Err(Error::Invalid(format!(
                    "assignment row {r} is not a probability vector (sum {s})"
                )));
            }
        }
        Ok(Self { c })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            c: Tensor::identity(m),
        }
    }

    /// Every edge in one of `m_pool` clusters, given by `cluster[e]`.
    pub fn hard(cluster: &[usize], m_pool: usize) -> Result<Self> {
        let mut c = Tensor::zeros(cluster.len(), m_pool);
        for (e, &k) in cluster.iter().enumerate() {
            if k >= m_pool {
                return Err(Error::Invalid(format!("edge {e} assigned to cluster {k} >= {m_pool}")));
            }
            c.set(e, k, 1.0);
        }
        Ok(Self { c })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.c
    }

    pub fn num_clusters(&self) -> usize {
        self.c.cols()
    }

    /// Argmax cluster per edge.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.c.argmax_rows()
    }
}

/// Output of [`make_assignment`]. `over_complete` flags `m_pool > m`.
#[derive(Debug, Clone)]
pub struct AssignmentResult {
    pub assignment: ClusterAssignment,
    pub over_complete: bool,
}

/// `C = row_softmax(E' W)` with a learnable `W` (`d' x m_pool`).
#[derive(Debug, Clone)]
pub struct AssignmentGenerator {
    pub weight: ParamId,
    pub d_in: usize,
    pub m_pool: usize,
}

impl AssignmentGenerator {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        m_pool: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            weight: store.add_glorot(format!("{name}.weight"), d_in, m_pool, rng),
            d_in,
            m_pool,
        }
    }

    pub fn assign(&self, tape: &mut Tape, store: &ParamStore, e_repr: Var) -> Result<Var> {
        crate::layers::check_width("assignment", self.d_in, tape.shape(e_repr).1)?;
        let w = tape.param(store, self.weight);
        let logits = tape.matmul(e_repr, w)?;
        Ok(tape.row_softmax(logits))
    }
}

pub fn make_assignment(
    generator: &AssignmentGenerator,
    store: &ParamStore,
    e_repr: &Tensor,
) -> Result<AssignmentResult> {
    if e_repr.rows() == 0 {
        return Err(Error::Invalid("cannot assign an empty edge set".into()));
    }
    if generator.m_pool == 0 {
        return Err(Error::Invalid("m_pool must be at least 1".into()));
    }
    let mut tape = Tape::new();
    let e = tape.constant(e_repr.clone());
    let c = generator.assign(&mut tape, store, e)?;
    let over_complete = generator.m_pool > e_repr.rows();
    if over_complete {
        log::warn!(
            "over-complete clustering: {} clusters for {} edges",
            generator.m_pool,
            e_repr.rows()
        );
    }
    Ok(AssignmentResult {
        assignment: ClusterAssignment::new(tape.value(c).clone())?,
        over_complete,
    })
}

/// Graph after cluster pooling. Node features are untouched.
#[derive(Debug, Clone)]
pub struct ClusteredGraph {
    pub node_features: Tensor,
    /// `m_pool x d'`.
    pub edge_features: Tensor,
    /// Soft incidence `M C`, `n x m_pool`.
    pub incidence: Tensor,
}

/// Tape-level cluster pooling. Returns `(Cᵀ E', M C)`.
pub fn hypercluster_vars(tape: &mut Tape, topo: &Topology, e_repr: Var, c: Var) -> Result<(Var, Var)> {
    let ct = tape.transpose(c);
    let pooled = tape.matmul(ct, e_repr)?;
    let per_pair = tape.gather(c, &topo.pair_dual)?;
    let incidence = tape.scatter(per_pair, &topo.pair_hyperedge, topo.num_nodes, Reduce::Sum)?;
    Ok((pooled, incidence))
}

/// Tape-level unpooling: every edge receives its soft cluster mixture `C E_pool`.
pub fn unpool_vars(tape: &mut Tape, c: Var, pooled: Var) -> Result<Var> {
    Ok(tape.matmul(c, pooled)?)
}

pub fn hypercluster(g: &Graph, e_repr: &Tensor, c: &ClusterAssignment) -> Result<ClusteredGraph> {
    if e_repr.rows() != g.num_edges() || c.matrix().rows() != g.num_edges() {
        return Err(Error::Invalid(format!(
            "hypercluster: {} edges, {} edge rows, {} assignment rows",
            g.num_edges(),
            e_repr.rows(),
            c.matrix().rows()
        )));
    }
    let topo = Topology::of(g);
    let mut tape = Tape::new();
    let e = tape.constant(e_repr.clone());
    let cv = tape.constant(c.matrix().clone());
    let (pooled, incidence) = hypercluster_vars(&mut tape, &topo, e, cv)?;
    Ok(ClusteredGraph {
        node_features: g.node_features().clone(),
        edge_features: tape.value(pooled).clone(),
        incidence: tape.value(incidence).clone(),
    })
}

pub fn hypercluster_unpool(
    g: &Graph,
    pooled: &ClusteredGraph,
    c: &ClusterAssignment,
) -> Result<Tensor> {
    if c.matrix().rows() != g.num_edges() || c.num_clusters() != pooled.edge_features.rows() {
        return Err(Error::Invalid(format!(
            "unpool: assignment {:?} against {} edges and {} pooled rows",
            c.matrix().shape(),
            g.num_edges(),
            pooled.edge_features.rows()
        )));
    }
    Ok(c.matrix().matmul(&pooled.edge_features)?)
}

/// Per-dual-node scores in (−1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    z: Tensor,
}

impl ScoreVector {
    pub fn new(z: Tensor) -> Result<Self> {
        if z.cols() != 1 {
            return Err(Error::Invalid(format!("scores must be a column, got {:?}", z.shape())));
        }
        if let Some(i) = z.data().iter().position(|v| !(v.abs() < 1.0)) {
            return Err(Error::Invalid(format!("score {i} = {} outside (-1, 1)", z.data()[i])));
        }
        Ok(Self { z })
    }

    pub fn from_slice(z: &[f64]) -> Result<Self> {
        Self::new(Tensor::column(z))
    }

    pub fn values(&self) -> &[f64] {
        self.z.data()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.rows() == 0
    }
}

/// `Z = tanh(edge layer with one output channel)`.
#[derive(Debug, Clone)]
pub struct ScoreLayer {
    pub layer: EhgnnLayer,
}

impl ScoreLayer {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, rng: &mut impl Rng) -> Self {
        Self {
            layer: EhgnnLayer::new(store, name, d_in, 1, rng),
        }
    }

    pub fn score(&self, tape: &mut Tape, store: &ParamStore, topo: &Topology, e: Var) -> Result<Var> {
        let pre = self.layer.forward(tape, store, topo, e)?;
        Ok(tape.tanh(pre))
    }
}

pub fn hyperdrop_score(
    layer: &ScoreLayer,
    store: &ParamStore,
    g: &Graph,
    e_repr: &Tensor,
) -> Result<ScoreVector> {
    if e_repr.rows() != g.num_edges() {
        return Err(Error::Invalid(format!(
            "score: {} edge rows for {} edges",
            e_repr.rows(),
            g.num_edges()
        )));
    }
    let topo = Topology::of(g);
    let mut tape = Tape::new();
    let e = tape.constant(e_repr.clone());
    let z = layer.score(&mut tape, store, &topo, e)?;
    ScoreVector::new(tape.value(z).clone())
}

/// Number of edges kept out of `m`: `max(1, ceil(keep_ratio · m))`, capped at `m`.
pub fn keep_count(m: usize, keep_ratio: f64) -> Result<usize> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::KeepRatio(keep_ratio));
    }
    Ok(((keep_ratio * m as f64).ceil() as usize).clamp(1, m.max(1)))
}

/// Indices of the `k` largest scores, ties to the smaller index, sorted
/// ascending.
pub fn topk_select(z: &[f64], keep_ratio: f64) -> Result<Vec<usize>> {
    if z.is_empty() {
        return Err(Error::Invalid("top-k selection needs at least one score".into()));
    }
    let k = keep_count(z.len(), keep_ratio)?;
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

/// Graph after edge drop. `scores` holds `Z_idx` (`k x 1`).
#[derive(Debug, Clone)]
pub struct DroppedGraph {
    pub graph: Graph,
    pub kept: Vec<usize>,
    pub scores: Tensor,
}

/// Keeps the top-scored dual nodes and their pairs, gating features by score.
pub fn node_drop_dual(h: &DualHypergraph, z: &ScoreVector, keep_ratio: f64) -> Result<(DualHypergraph, Vec<usize>)> {
    if z.len() != h.num_dual_nodes() {
        return Err(Error::Invalid(format!(
            "{} scores for {} dual nodes",
            z.len(),
            h.num_dual_nodes()
        )));
    }
    let kept = topk_select(z.values(), keep_ratio)?;
    let mut new_index = vec![usize::MAX; h.num_dual_nodes()];
    for (j, &i) in kept.iter().enumerate() {
        new_index[i] = j;
    }
    let mut features = h.dual_node_features().select_rows(&kept);
    for (j, &i) in kept.iter().enumerate() {
        let s = z.values()[i];
        features.row_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    let pairs = h
        .hyperedges()
        .iter()
        .filter(|(d, _)| new_index[*d] != usize::MAX)
        .map(|&(d, e)| (new_index[d], e))
        .collect();
    let dual = DualHypergraph::new(
        kept.len(),
        features,
        pairs,
        h.num_hyperedges(),
        h.hyperedge_features().clone(),
    )?
    .with_label(h.label());
    Ok((dual, kept))
}

/// Edge drop on plain tensors: `e_repr` replaces `g`'s edge features.
pub fn hyperdrop(g: &Graph, e_repr: &Tensor, z: &ScoreVector, keep_ratio: f64) -> Result<DroppedGraph> {
    let with_repr = g.replace_edge_features(e_repr.clone())?;
    let (dual, kept) = node_drop_dual(&dht(&with_repr), z, keep_ratio)?;
    let graph = dht_inverse(&dual)?;
    let scores = z.tensor().select_rows(&kept);
    Ok(DroppedGraph { graph, kept, scores })
}

/// Tape-level edge drop. Returns the pooled topology, gated kept edge
/// features `E'_idx ⊙ Z_idx` and the kept scores `Z_idx`.
pub fn hyperdrop_vars(
    tape: &mut Tape,
    topo: &Topology,
    e_repr: Var,
    z: Var,
    kept: &[usize],
) -> Result<(Topology, Var, Var)> {
    let idx: Arc<[usize]> = kept.into();
    let e_kept = tape.gather(e_repr, &idx)?;
    let z_kept = tape.gather(z, &idx)?;
    let gated = tape.row_scale(e_kept, z_kept)?;
    let edges: Vec<(usize, usize)> = kept.iter().map(|&i| topo.edges[i]).collect();
    Ok((Topology::new(topo.num_nodes, &edges), gated, z_kept))
}

/// GCN on the pooled edge set with each neighbor term scaled by its edge score.
pub fn gcn_with_edge_weights(layer: &GcnLayer, store: &ParamStore, pooled: &DroppedGraph) -> Result<Tensor> {
    gcn_forward_weighted(layer, store, &pooled.graph, Some(&pooled.scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::gcn_forward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path3(e: Tensor) -> Graph {
        Graph::new(3, Tensor::from_nested(&[[1.0], [2.0], [3.0]]), vec![(0, 1), (1, 2)], e).unwrap()
    }

    #[test]
    fn single_cluster_is_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let gen = AssignmentGenerator::new(&mut store, "assign", 2, 1, &mut rng);
        let e = Tensor::from_nested(&[[1.0, 2.0], [-3.0, 0.5], [0.0, 0.0]]);
        let res = make_assignment(&gen, &store, &e).unwrap();
        assert_eq!(res.assignment.matrix().data(), &[1.0, 1.0, 1.0]);
        assert!(!res.over_complete);
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let gen = AssignmentGenerator::new(&mut store, "assign", 2, 4, &mut rng);
        *store.value_mut(gen.weight) = Tensor::zeros(2, 4);
        let e = Tensor::from_nested(&[[1.0, 2.0], [-3.0, 0.5]]);
        let res = make_assignment(&gen, &store, &e).unwrap();
        assert!(res.assignment.matrix().data().iter().all(|&v| v == 0.25));
        assert!(res.over_complete);
    }

    #[test]
    fn separated_logits_give_near_hard_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let gen = AssignmentGenerator::new(&mut store, "assign", 1, 2, &mut rng);
        *store.value_mut(gen.weight) = Tensor::from_nested(&[[10.0, -10.0]]);
        let res = make_assignment(&gen, &store, &Tensor::scalar(1.0)).unwrap();
        let row = res.assignment.matrix().row(0);
        assert!((row[0] - 1.0).abs() < 1e-4 && row[1].abs() < 1e-4);
    }

    #[test]
    fn identity_assignment_is_identity() {
        let g = path3(Tensor::from_nested(&[[1.0, 2.0], [3.0, 4.0]]));
        let c = ClusterAssignment::identity(2);
        let pooled = hypercluster(&g, g.edge_features(), &c).unwrap();
        assert_eq!(&pooled.edge_features, g.edge_features());
        assert_eq!(pooled.incidence, g.to_dense_incidence().matrix);
        let back = hypercluster_unpool(&g, &pooled, &c).unwrap();
        assert_eq!(&back, g.edge_features());
    }

    #[test]
    fn hard_single_cluster_sums() {
        let g = path3(Tensor::from_nested(&[[1.0, 2.0], [1.0, 2.0]]));
        let c = ClusterAssignment::hard(&[0, 0], 1).unwrap();
        let pooled = hypercluster(&g, g.edge_features(), &c).unwrap();
        assert_eq!(pooled.edge_features.data(), &[2.0, 4.0]);
        assert_eq!(pooled.incidence.data(), &[1.0, 2.0, 1.0]);
        let back = hypercluster_unpool(&g, &pooled, &c).unwrap();
        assert_eq!(back.to_rows(), vec![vec![2.0, 4.0], vec![2.0, 4.0]]);
    }

    #[test]
    fn soft_unpool_mixture() {
        let g = Graph::new(2, Tensor::zeros(2, 0), vec![(0, 1)], Tensor::zeros(1, 1)).unwrap();
        let c = ClusterAssignment::new(Tensor::from_nested(&[[0.5, 0.5]])).unwrap();
        let pooled = ClusteredGraph {
            node_features: Tensor::zeros(2, 0),
            edge_features: Tensor::from_nested(&[[2.0], [4.0]]),
            incidence: Tensor::zeros(2, 2),
        };
        assert_eq!(hypercluster_unpool(&g, &pooled, &c).unwrap().data(), &[3.0]);
    }

    #[test]
    fn assignment_must_be_row_stochastic() {
        assert!(ClusterAssignment::new(Tensor::from_nested(&[[0.5, 0.6]])).is_err());
        assert!(ClusterAssignment::new(Tensor::zeros(2, 0)).is_err());
    }

    #[test]
    fn scores_from_zero_weights_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let layer = ScoreLayer::new(&mut store, "score", 2, &mut rng);
        *store.value_mut(layer.layer.weight) = Tensor::zeros(2, 1);
        let g = path3(Tensor::from_nested(&[[1.0, 2.0], [3.0, 4.0]]));
        let z = hyperdrop_score(&layer, &store, &g, g.edge_features()).unwrap();
        assert_eq!(z.values(), &[0.0, 0.0]);
    }

    #[test]
    fn single_edge_score_is_tanh_one() {
        // single edge: pre-activation = 2 e W + b = 2 * 1 * 0.5 = 1
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let layer = ScoreLayer::new(&mut store, "score", 1, &mut rng);
        *store.value_mut(layer.layer.weight) = Tensor::scalar(0.5);
        let g = Graph::new(2, Tensor::zeros(2, 0), vec![(0, 1)], Tensor::scalar(1.0)).unwrap();
        let z = hyperdrop_score(&layer, &store, &g, g.edge_features()).unwrap();
        assert!((z.values()[0] - 1f64.tanh()).abs() < 1e-15);
        assert!((z.values()[0] - 0.7616).abs() < 1e-4);
    }

    #[test]
    fn topk_examples() {
        assert_eq!(topk_select(&[0.9, -0.2, 0.5, 0.5], 0.5).unwrap(), vec![0, 2]);
        assert_eq!(topk_select(&[0.1, 0.3, 0.2], 1.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(topk_select(&[0.1, 0.3, 0.2], 0.34).unwrap(), vec![1, 2]);
        assert_eq!(topk_select(&[0.1, 0.3, 0.2], 0.01).unwrap(), vec![1]);
        assert!(matches!(topk_select(&[0.1], 0.0), Err(Error::KeepRatio(_))));
        assert!(matches!(topk_select(&[0.1], 1.5), Err(Error::KeepRatio(_))));
        assert!(topk_select(&[], 0.5).is_err());
    }

    #[test]
    fn drop_keeps_all_with_ratio_one() {
        let g = path3(Tensor::from_nested(&[[1.0], [2.0]]));
        let z = ScoreVector::from_slice(&[0.5, -0.25]).unwrap();
        let pooled = hyperdrop(&g, g.edge_features(), &z, 1.0).unwrap();
        assert_eq!(pooled.kept, vec![0, 1]);
        assert_eq!(pooled.graph.edges(), g.edges());
        assert_eq!(pooled.graph.edge_features().data(), &[0.5, -0.5]);
    }

    #[test]
    fn triangle_drop_keeps_top_two_and_all_nodes() {
        let g = Graph::new(
            3,
            Tensor::from_nested(&[[1.0], [2.0], [3.0]]),
            vec![(0, 1), (1, 2), (2, 0)],
            Tensor::from_nested(&[[1.0], [1.0], [1.0]]),
        )
        .unwrap();
        let z = ScoreVector::from_slice(&[0.9, 0.8, -0.5]).unwrap();
        let pooled = hyperdrop(&g, g.edge_features(), &z, 2.0 / 3.0).unwrap();
        assert_eq!(pooled.kept, vec![0, 1]);
        assert_eq!(pooled.graph.num_nodes(), 3);
        assert!(pooled.graph.node_features().bit_eq(g.node_features()));
    }

    #[test]
    fn dropping_an_edge_can_isolate_a_node() {
        let g = path3(Tensor::from_nested(&[[1.0], [2.0]]));
        let z = ScoreVector::from_slice(&[0.5, -0.5]).unwrap();
        let pooled = hyperdrop(&g, g.edge_features(), &z, 0.5).unwrap();
        assert_eq!(pooled.graph.edges(), &[(0, 1)]);
        assert_eq!(pooled.graph.num_nodes(), 3);
        assert_eq!(pooled.graph.node_degrees()[2], 0);
    }

    fn weighted_fixture() -> (ParamStore, GcnLayer, Graph) {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let layer = GcnLayer::new(&mut store, "gcn", 1, 1, &mut rng);
        *store.value_mut(layer.weight) = Tensor::identity(1);
        let g = Graph::new(2, Tensor::from_nested(&[[2.0], [4.0]]), vec![(0, 1)], Tensor::scalar(1.0))
            .unwrap();
        (store, layer, g)
    }

    #[test]
    fn unit_weights_match_plain_gcn() {
        let (store, layer, g) = weighted_fixture();
        let pooled = DroppedGraph {
            graph: g.clone(),
            kept: vec![0],
            scores: Tensor::column(&[1.0]),
        };
        let a = gcn_with_edge_weights(&layer, &store, &pooled).unwrap();
        assert_eq!(a, gcn_forward(&layer, &store, &g).unwrap());
    }

    #[test]
    fn zero_weight_leaves_self_terms() {
        let (store, layer, g) = weighted_fixture();
        let pooled = DroppedGraph {
            graph: g,
            kept: vec![0],
            scores: Tensor::column(&[0.0]),
        };
        let out = gcn_with_edge_weights(&layer, &store, &pooled).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn half_weight_hand_example() {
        let (store, layer, g) = weighted_fixture();
        let pooled = DroppedGraph {
            graph: g,
            kept: vec![0],
            scores: Tensor::column(&[0.5]),
        };
        let out = gcn_with_edge_weights(&layer, &store, &pooled).unwrap();
        assert!((out.get(0, 0) - 2.0).abs() < 1e-15);
    }
}
