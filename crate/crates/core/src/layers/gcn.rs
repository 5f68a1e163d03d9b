use rand::Rng;

use crate::autodiff::{Reduce, Tape, Var};
use crate::graph::{Graph, Topology};
use crate::optim::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::Result;

use super::check_width;

/// Graph convolution with self-loop-augmented symmetric normalization:
///
/// ```text
/// x'_v = Σ_{u ∈ N(v) ∪ {v}} w_uv / sqrt((deg_u + 1)(deg_v + 1)) · x_u W + b
/// ```
///
/// `w_uv` is an optional per-edge scalar (1 when absent, always 1 for the
/// self term). Degrees count edges of the structure passed in, ignoring the
/// weights.
#[derive(Debug, Clone)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl GcnLayer {
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

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        topo: &Topology,
        x: Var,
        edge_weight: Option<Var>,
    ) -> Result<Var> {
        check_width("gcn", self.d_in, tape.shape(x).1)?;
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;

        let self_norm = tape.constant(topo.self_norm.clone());
        let self_term = tape.row_scale(xw, self_norm)?;

        let msgs = tape.gather(xw, &topo.msg_src)?;
        let norm = tape.constant(topo.msg_norm.clone());
        let mut msgs = tape.row_scale(msgs, norm)?;
        if let Some(ew) = edge_weight {
            let per_msg = tape.gather(ew, &topo.msg_edge)?;
            msgs = tape.row_scale(msgs, per_msg)?;
        }
        let agg = tape.scatter(msgs, &topo.msg_dst, topo.num_nodes, Reduce::Sum)?;
        let out = tape.add(self_term, agg)?;
        Ok(tape.add_bias(out, b)?)
    }
}

/// One GCN pass over `g`'s node features.
pub fn gcn_forward(layer: &GcnLayer, store: &ParamStore, g: &Graph) -> Result<Tensor> {
    gcn_forward_weighted(layer, store, g, None)
}

pub fn gcn_forward_weighted(
    layer: &GcnLayer,
    store: &ParamStore,
    g: &Graph,
    edge_weight: Option<&Tensor>,
) -> Result<Tensor> {
    let topo = Topology::of(g);
    let mut tape = Tape::new();
    let x = tape.constant(g.node_features().clone());
    let ew = edge_weight.map(|w| tape.constant(w.clone()));
    let out = layer.forward(&mut tape, store, &topo, x, ew)?;
    Ok(tape.value(out).clone())
}
