//! Edge-aware node layers that read edge features but never emit edge
//! representations.
//!
//! - EGCN: `x'_v = Σ_{u ∈ N(v) ∪ {v}} n_uv (x_u + e_uv P) W + b`, with `P` a
//!   learned edge embedding into node width and `e_vv = 0`.
//! - MPNN (edge-conditioned): `x'_v = x_v W + Σ_{u ∈ N(v)} x_u Θ(e_uv) + b`,
//!   where `Θ(e) = tanh(e A + c)` reshaped to `d_in x d_out`.
//! - R-GCN: `x'_v = x_v W + Σ_r Σ_{u ∈ N_r(v)} x_u W_r / |N_r(v)| + b`, with
//!   relations read from one-hot edge features.
//! - EGNN: `x'_v = Σ_{u ∈ N(v) ∪ {v}} g_uv x_u W + b`, where the scalar gate
//!   `g` comes from an edge layer on the dual and `g_vv = 1`.

use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{Reduce, Tape, Var};
use crate::graph::{Graph, Topology};
use crate::optim::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::{Error, Result};

use super::{check_width, EhgnnLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Egcn,
    Mpnn,
    Rgcn,
    Egnn,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Egcn => "egcn",
            Self::Mpnn => "mpnn",
            Self::Rgcn => "rgcn",
            Self::Egnn => "egnn",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "egcn" => Ok(Self::Egcn),
            "mpnn" => Ok(Self::Mpnn),
            "rgcn" | "r-gcn" => Ok(Self::Rgcn),
            "egnn" => Ok(Self::Egnn),
            other => Err(Error::Invalid(format!("unknown baseline layer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Weights {
    Egcn {
        weight: ParamId,
        edge_embed: ParamId,
    },
    Mpnn {
        weight: ParamId,
        edge_weight: ParamId,
        edge_bias: ParamId,
    },
    Rgcn {
        weight: ParamId,
        relations: Vec<ParamId>,
    },
    Egnn {
        weight: ParamId,
        gate: EhgnnLayer,
    },
}

#[derive(Debug, Clone)]
pub struct BaselineLayer {
    pub kind: BaselineKind,
    pub d_in: usize,
    pub d_out: usize,
    pub d_edge: usize,
    bias: ParamId,
    weights: Weights,
}

impl BaselineLayer {
    /// For R-GCN, `d_edge` is the number of relation types.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        kind: BaselineKind,
        d_in: usize,
        d_out: usize,
        d_edge: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.add_glorot(format!("{name}.weight"), d_in, d_out, rng);
        let weights = match kind {
            BaselineKind::Egcn => Weights::Egcn {
                weight,
                edge_embed: store.add_glorot(format!("{name}.edge_embed"), d_edge, d_in, rng),
            },
            BaselineKind::Mpnn => Weights::Mpnn {
                weight,
                edge_weight: store.add_glorot(
                    format!("{name}.edge_mlp.weight"),
                    d_edge,
                    d_in * d_out,
                    rng,
                ),
                edge_bias: store.add_zeros(format!("{name}.edge_mlp.bias"), 1, d_in * d_out),
            },
            BaselineKind::Rgcn => Weights::Rgcn {
                weight,
                relations: (0..d_edge)
                    .map(|r| store.add_glorot(format!("{name}.relation{r}"), d_in, d_out, rng))
                    .collect(),
            },
            BaselineKind::Egnn => Weights::Egnn {
                weight,
                gate: EhgnnLayer::new(store, &format!("{name}.gate"), d_edge, 1, rng),
            },
        };
        Self {
            kind,
            d_in,
            d_out,
            d_edge,
            bias: store.add_zeros(format!("{name}.bias"), 1, d_out),
            weights,
        }
    }

    /// Main weight `W` (the self/neighbor transform).
    pub fn weight(&self) -> ParamId {
        match &self.weights {
            Weights::Egcn { weight, .. }
            | Weights::Mpnn { weight, .. }
            | Weights::Rgcn { weight, .. }
            | Weights::Egnn { weight, .. } => *weight,
        }
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    /// Per-relation weights (R-GCN only).
    pub fn relation_weights(&self) -> &[ParamId] {
        match &self.weights {
            Weights::Rgcn { relations, .. } => relations,
            _ => &[],
        }
    }

    /// `(A, c)` of the MPNN edge network.
    pub fn edge_network(&self) -> Option<(ParamId, ParamId)> {
        match &self.weights {
            Weights::Mpnn {
                edge_weight,
                edge_bias,
                ..
            } => Some((*edge_weight, *edge_bias)),
            _ => None,
        }
    }

    pub fn gate_layer(&self) -> Option<&EhgnnLayer> {
        match &self.weights {
            Weights::Egnn { gate, .. } => Some(gate),
            _ => None,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        topo: &Topology,
        x: Var,
        e: Var,
    ) -> Result<Var> {
        check_width(self.kind.name(), self.d_in, tape.shape(x).1)?;
        check_width("baseline edge features", self.d_edge, tape.shape(e).1)?;
        let out = match &self.weights {
            Weights::Egcn { weight, edge_embed } => {
                let p = tape.param(store, *edge_embed);
                let e_emb = tape.matmul(e, p)?;
                let src = tape.gather(x, &topo.msg_src)?;
                let edge_part = tape.gather(e_emb, &topo.msg_edge)?;
                let msgs = tape.add(src, edge_part)?;
                let norm = tape.constant(topo.msg_norm.clone());
                let msgs = tape.row_scale(msgs, norm)?;
                let agg = tape.scatter(msgs, &topo.msg_dst, topo.num_nodes, Reduce::Sum)?;
                let self_norm = tape.constant(topo.self_norm.clone());
                let self_term = tape.row_scale(x, self_norm)?;
                let h = tape.add(self_term, agg)?;
                let w = tape.param(store, *weight);
                tape.matmul(h, w)?
            }
            Weights::Mpnn {
                weight,
                edge_weight,
                edge_bias,
            } => {
                let a = tape.param(store, *edge_weight);
                let c = tape.param(store, *edge_bias);
                let theta = tape.matmul(e, a)?;
                let theta = tape.add_bias(theta, c)?;
                let theta = tape.tanh(theta);
                let theta_msg = tape.gather(theta, &topo.msg_edge)?;
                let src = tape.gather(x, &topo.msg_src)?;
                let msgs = tape.vec_mat(src, theta_msg, self.d_out)?;
                let agg = tape.scatter(msgs, &topo.msg_dst, topo.num_nodes, Reduce::Sum)?;
                let w = tape.param(store, *weight);
                let self_term = tape.matmul(x, w)?;
                tape.add(self_term, agg)?
            }
            Weights::Rgcn { weight, relations } => {
                let types = relation_types(tape.value(e))?;
                let w = tape.param(store, *weight);
                let mut out = tape.matmul(x, w)?;
                for (r, wr) in relations.iter().enumerate() {
                    let (src, dst): (Vec<usize>, Vec<usize>) = topo
                        .msg_edge
                        .iter()
                        .enumerate()
                        .filter(|&(_, &edge)| types[edge] == r)
                        .map(|(k, _)| (topo.msg_src[k], topo.msg_dst[k]))
                        .unzip();
                    if src.is_empty() {
                        continue;
                    }
                    let (src, dst): (Arc<[usize]>, Arc<[usize]>) = (src.into(), dst.into());
                    let wr = tape.param(store, *wr);
                    let xr = tape.matmul(x, wr)?;
                    let msgs = tape.gather(xr, &src)?;
                    let agg = tape.scatter(msgs, &dst, topo.num_nodes, Reduce::Mean)?;
                    out = tape.add(out, agg)?;
                }
                out
            }
            Weights::Egnn { weight, gate } => {
                let g = gate.forward(tape, store, topo, e)?;
                let per_msg = tape.gather(g, &topo.msg_edge)?;
                let src = tape.gather(x, &topo.msg_src)?;
                let msgs = tape.row_scale(src, per_msg)?;
                let agg = tape.scatter(msgs, &topo.msg_dst, topo.num_nodes, Reduce::Sum)?;
                let h = tape.add(x, agg)?;
                let w = tape.param(store, *weight);
                tape.matmul(h, w)?
            }
        };
        let b = tape.param(store, self.bias);
        Ok(tape.add_bias(out, b)?)
    }
}

/// Relation index per edge; every row must be exactly one 1 and zeros.
fn relation_types(e: &Tensor) -> Result<Vec<usize>> {
    (0..e.rows())
        .map(|r| {
            let row = e.row(r);
            let ones: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(i, _)| i)
                .collect();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones.len() != 1 || zeros + 1 != row.len() {
                return Err(Error::Encoding {
                    edge: r,
                    detail: format!("{row:?}"),
                });
            }
            Ok(ones[0])
        })
        .collect()
}

/// One baseline pass over `g`; returns updated node features `n x d_out`.
pub fn baseline_forward(layer: &BaselineLayer, store: &ParamStore, g: &Graph) -> Result<Tensor> {
    let topo = Topology::of(g);
    let mut tape = Tape::new();
    let x = tape.constant(g.node_features().clone());
    let e = tape.constant(g.edge_features().clone());
    let out = layer.forward(&mut tape, store, &topo, x, e)?;
    Ok(tape.value(out).clone())
}
