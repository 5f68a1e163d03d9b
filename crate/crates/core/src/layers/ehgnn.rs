use rand::Rng;

use crate::autodiff::{Reduce, Tape, Var};
use crate::graph::{Graph, Topology};
use crate::optim::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::Result;

use super::check_width;

/// Edge layer: node message passing run on the dual hypergraph.
///
/// Two mean stages over the hyperedge list `L*`, then a shared linear map:
///
/// ```text
/// h_j   = mean { e_i : (i, j) ∈ L* }          // hyperedge j = node j of g
/// a_i   = mean { h_j : (i, j) ∈ L* }          // the two endpoints of edge i
/// e'_i  = (a_i + e_i) W + b
/// ```
///
/// Both stages are scatters over the `2m` pairs, so a forward pass is O(m).
#[derive(Debug, Clone)]
pub struct EhgnnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl EhgnnLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            weight: store.add_glorot(format!("{name}.weight"), d_in, d_out, rng),
            bias: store.add_zeros(format!("{name}.bias"), 1, d_out),
            d_in,
            d_out,
        }
    }

    /// Mean-of-means aggregation without the linear map; `m x d_in`.
    pub fn aggregate(tape: &mut Tape, topo: &Topology, e: Var) -> Result<Var> {
        let per_pair = tape.gather(e, &topo.pair_dual)?;
        let hyper = tape.scatter(per_pair, &topo.pair_hyperedge, topo.num_nodes, Reduce::Mean)?;
        let back = tape.gather(hyper, &topo.pair_hyperedge)?;
        Ok(tape.scatter(back, &topo.pair_dual, topo.num_edges, Reduce::Mean)?)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        topo: &Topology,
        e: Var,
    ) -> Result<Var> {
        let (rows, cols) = tape.shape(e);
        check_width("ehgnn", self.d_in, cols)?;
        check_width("ehgnn rows", topo.num_edges, rows)?;
        let agg = Self::aggregate(tape, topo, e)?;
        let with_self = tape.add(agg, e)?;
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let out = tape.matmul(with_self, w)?;
        Ok(tape.add_bias(out, b)?)
    }
}

/// One edge-layer pass over `g`'s edge features; returns `m x d_out`.
pub fn ehgnn_forward(layer: &EhgnnLayer, store: &ParamStore, g: &Graph) -> Result<Tensor> {
    let topo = Topology::of(g);
    let mut tape = Tape::new();
    let e = tape.constant(g.edge_features().clone());
    let out = layer.forward(&mut tape, store, &topo, e)?;
    Ok(tape.value(out).clone())
}
