use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::{Reduce, Tape, Var};
use crate::graph::{Graph, Topology};
use crate::layers::{BaselineKind, BaselineLayer, EhgnnLayer, GcnLayer};
use crate::optim::ParamStore;
use crate::pooling::{unpool_vars, AssignmentGenerator};
use crate::tasks::metrics::{evaluate_outputs, Metrics, TargetKind};
use crate::tasks::training::{fit, EpochReport, History, TrainConfig};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Node autoencoder learning rate.
pub const LR_NODE: f64 = 5e-3;
/// Edge autoencoder learning rate.
pub const LR_EDGE: f64 = 1e-3;

/// How the cluster assignment is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStrategy {
    /// `row_softmax(H W)` with a learned `W`.
    Learned,
    /// Identity; only valid at ratio 1.
    Fixed,
}

impl std::str::FromStr for AssignmentStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(Self::Learned),
            "fixed" | "identity" => Ok(Self::Fixed),
            other => Err(Error::Invalid(format!("unknown assignment strategy {other:?}"))),
        }
    }
}

/// Layer family of the edge autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeEncoder {
    /// Edge layers on the dual hypergraph, clustering edges.
    Ehgnn,
    /// Node-centric EGCN layers clustering nodes at the same ratio; an edge
    /// is read off as the mean of its two endpoints.
    Egcn,
}

impl std::str::FromStr for EdgeEncoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ehgnn" => Ok(Self::Ehgnn),
            "egcn" => Ok(Self::Egcn),
            other => Err(Error::Invalid(format!("unknown edge encoder {other:?}"))),
        }
    }
}

/// How unpooling reads the assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decode {
    /// `C · E_pool`.
    Soft,
    /// One-hot argmax rows of `C`: each edge stores a single cluster index.
    /// Gradients pass to the soft `C` unchanged (straight-through).
    Hard,
}

impl std::str::FromStr for Decode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            other => Err(Error::Invalid(format!("unknown decode mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionConfig {
    pub hidden: usize,
    /// Width of the pooled representation.
    pub latent: usize,
    pub edge_ratio: f64,
    /// `None` disables the node autoencoder.
    pub node_ratio: Option<f64>,
    pub target: TargetKind,
    pub strategy: AssignmentStrategy,
    pub encoder: EdgeEncoder,
    /// Unpooling used by the training loss and the per-epoch metrics.
    pub train_decode: Decode,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            latent: 32,
            edge_ratio: 0.25,
            node_ratio: None,
            target: TargetKind::Continuous,
            strategy: AssignmentStrategy::Learned,
            encoder: EdgeEncoder::Ehgnn,
            train_decode: Decode::Soft,
        }
    }
}

#[derive(Debug, Clone)]
enum EdgeNet {
    Ehgnn {
        enc: [EhgnnLayer; 2],
        dec: [EhgnnLayer; 3],
    },
    Egcn {
        enc: [BaselineLayer; 2],
        dec: [BaselineLayer; 3],
    },
}

#[derive(Debug, Clone)]
struct NodeNet {
    enc: [GcnLayer; 2],
    assign: Option<AssignmentGenerator>,
    dec: [GcnLayer; 3],
    n_pool: usize,
}

/// Node and edge autoencoders:
/// `DEC(unpool(pool(ENC(·))))` with two encoder layers and three decoder
/// layers each. The two halves are independent and trained with their own
/// learning rates.
#[derive(Debug, Clone)]
pub struct ReconstructionModel {
    pub config: ReconstructionConfig,
    pub node_dim: usize,
    pub edge_dim: usize,
    /// Cluster count of the pooled code.
    pub m_pool: usize,
    edge_net: EdgeNet,
    edge_assign: Option<AssignmentGenerator>,
    pub edge_store: ParamStore,
    node_net: Option<NodeNet>,
    pub node_store: ParamStore,
}

fn pool_size(ratio: f64, count: usize) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Invalid(format!("pooling ratio {ratio} is outside (0, 1]")));
    }
    Ok(((ratio * count as f64).ceil() as usize).max(1))
}

/// Checks that `dataset` is non-empty with one feature schema.
pub fn check_dataset(dataset: &[Graph]) -> Result<(usize, usize)> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Dataset("dataset is empty".into()))?;
    let dims = (first.node_dim(), first.edge_dim());
    for (i, g) in dataset.iter().enumerate() {
        if (g.node_dim(), g.edge_dim()) != dims {
            return Err(Error::Dataset(format!(
                "graph {i} has feature widths ({}, {}), graph 0 has {dims:?}",
                g.node_dim(),
                g.edge_dim()
            )));
        }
    }
    Ok(dims)
}

fn one_hot_argmax(c: &Tensor) -> Tensor {
    let mut hard = Tensor::zeros(c.rows(), c.cols());
    for (r, k) in c.argmax_rows().into_iter().enumerate() {
        hard.set(r, k, 1.0);
    }
    hard
}

/// `(Cᵀ H, C)` for a learned or identity assignment.
fn pool(
    tape: &mut Tape,
    store: &ParamStore,
    assign: Option<&AssignmentGenerator>,
    h: Var,
) -> Result<(Var, Var)> {
    let c = match assign {
        Some(gen) => gen.assign(tape, store, h)?,
        None => tape.constant(Tensor::identity(tape.shape(h).0)),
    };
    let ct = tape.transpose(c);
    Ok((tape.matmul(ct, h)?, c))
}

fn unpool(tape: &mut Tape, c: Var, pooled: Var, decode: Decode) -> Result<Var> {
    let c = match decode {
        Decode::Soft => c,
        Decode::Hard => {
            let v = tape.value(c);
            let shift = one_hot_argmax(v).zip_map(v, "straight_through", |h, s| h - s)?;
            let shift = tape.constant(shift);
            tape.add(c, shift)?
        }
    };
    unpool_vars(tape, c, pooled)
}

/// Per-edge mean of the two endpoint rows of `x`.
fn endpoint_mean(tape: &mut Tape, topo: &Topology, x: Var) -> Result<Var> {
    let per_pair = tape.gather(x, &topo.pair_hyperedge)?;
    Ok(tape.scatter(per_pair, &topo.pair_dual, topo.num_edges, Reduce::Mean)?)
}

fn target_loss(tape: &mut Tape, kind: TargetKind, out: Var, target: &Tensor) -> Result<Var> {
    match kind {
        TargetKind::Continuous => Ok(tape.mse(out, target)?),
        TargetKind::Categorical => Ok(tape.softmax_cross_entropy(out, &target.argmax_rows())?),
    }
}

/// Pooled edge representation and the assignment produced for one graph.
#[derive(Debug, Clone)]
pub struct EdgeCode {
    pub pooled: Tensor,
    pub assignment: Tensor,
}

impl ReconstructionModel {
    /// Builds a model for `dataset`'s feature schema. The edge pool size is
    /// `max(1, ceil(edge_ratio · max m))` over the dataset.
    pub fn new(config: ReconstructionConfig, dataset: &[Graph], seed: u64) -> Result<Self> {
        let (node_dim, edge_dim) = check_dataset(dataset)?;
        if config.hidden == 0 || config.latent == 0 {
            return Err(Error::Invalid("hidden and latent widths must be positive".into()));
        }
        let max_m = dataset.iter().map(Graph::num_edges).max().unwrap_or(0);
        let max_n = dataset.iter().map(Graph::num_nodes).max().unwrap_or(0);
        // the node-centric baseline clusters nodes, then reads edges off
        // endpoint pairs
        let m_pool = match config.encoder {
            EdgeEncoder::Ehgnn => pool_size(config.edge_ratio, max_m)?,
            EdgeEncoder::Egcn => pool_size(config.edge_ratio, max_n)?,
        };
        if config.strategy == AssignmentStrategy::Fixed {
            if config.edge_ratio != 1.0 {
                return Err(Error::Invalid("the identity assignment needs edge_ratio = 1".into()));
            }
            if dataset.iter().any(|g| g.num_edges() != max_m) {
                return Err(Error::Invalid(
                    "the identity assignment needs equal edge counts".into(),
                ));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, z) = (config.hidden, config.latent);
        let mut edge_store = ParamStore::new();
        let s = &mut edge_store;
        let edge_net = match config.encoder {
            EdgeEncoder::Ehgnn => EdgeNet::Ehgnn {
                enc: [
                    EhgnnLayer::new(s, "edge.enc0", edge_dim, h, &mut rng),
                    EhgnnLayer::new(s, "edge.enc1", h, z, &mut rng),
                ],
                dec: [
                    EhgnnLayer::new(s, "edge.dec0", z, h, &mut rng),
                    EhgnnLayer::new(s, "edge.dec1", h, h, &mut rng),
                    EhgnnLayer::new(s, "edge.dec2", h, edge_dim, &mut rng),
                ],
            },
            EdgeEncoder::Egcn => {
                let layer = |s: &mut ParamStore, name: &str, d_in, d_out, d_edge, rng: &mut ChaCha8Rng| {
                    BaselineLayer::new(s, name, BaselineKind::Egcn, d_in, d_out, d_edge, rng)
                };
                EdgeNet::Egcn {
                    enc: [
                        layer(s, "edge.enc0", node_dim, h, edge_dim, &mut rng),
                        layer(s, "edge.enc1", h, z, edge_dim, &mut rng),
                    ],
                    dec: [
                        layer(s, "edge.dec0", z, h, z, &mut rng),
                        layer(s, "edge.dec1", h, h, z, &mut rng),
                        layer(s, "edge.dec2", h, edge_dim, z, &mut rng),
                    ],
                }
            }
        };
        let edge_assign = (config.strategy == AssignmentStrategy::Learned)
            .then(|| AssignmentGenerator::new(&mut edge_store, "edge.assign", z, m_pool, &mut rng));
        if config.encoder == EdgeEncoder::Ehgnn && m_pool > max_m {
            log::warn!("over-complete edge clustering: {m_pool} clusters for {max_m} edges");
        }

        let mut node_store = ParamStore::new();
        let node_net = match config.node_ratio {
            None => None,
            Some(ratio) => {
                let n_pool = pool_size(ratio, max_n)?;
                let s = &mut node_store;
                Some(NodeNet {
                    enc: [
                        GcnLayer::new(s, "node.enc0", node_dim, h, &mut rng),
                        GcnLayer::new(s, "node.enc1", h, z, &mut rng),
                    ],
                    assign: (config.strategy == AssignmentStrategy::Learned)
                        .then(|| AssignmentGenerator::new(s, "node.assign", z, n_pool, &mut rng)),
                    dec: [
                        GcnLayer::new(s, "node.dec0", z, h, &mut rng),
                        GcnLayer::new(s, "node.dec1", h, h, &mut rng),
                        GcnLayer::new(s, "node.dec2", h, node_dim, &mut rng),
                    ],
                    n_pool,
                })
            }
        };
        Ok(Self {
            config,
            node_dim,
            edge_dim,
            m_pool,
            edge_net,
            edge_assign,
            edge_store,
            node_net,
            node_store,
        })
    }

    pub fn has_node_autoencoder(&self) -> bool {
        self.node_net.is_some()
    }

    pub fn n_pool(&self) -> Option<usize> {
        self.node_net.as_ref().map(|n| n.n_pool)
    }

    fn edge_encode(&self, tape: &mut Tape, store: &ParamStore, topo: &Topology, g: &Graph) -> Result<(Var, Var)> {
        let e = tape.constant(g.edge_features().clone());
        let h = match &self.edge_net {
            EdgeNet::Ehgnn { enc, .. } => {
                let h = enc[0].forward(tape, store, topo, e)?;
                let h = tape.relu(h);
                let h = enc[1].forward(tape, store, topo, h)?;
                tape.relu(h)
            }
            EdgeNet::Egcn { enc, .. } => {
                let x = tape.constant(g.node_features().clone());
                let n = enc[0].forward(tape, store, topo, x, e)?;
                let n = tape.relu(n);
                let n = enc[1].forward(tape, store, topo, n, e)?;
                tape.relu(n)
            }
        };
        pool(tape, store, self.edge_assign.as_ref(), h)
    }

    fn edge_decode(&self, tape: &mut Tape, store: &ParamStore, topo: &Topology, u: Var) -> Result<Var> {
        match &self.edge_net {
            EdgeNet::Ehgnn { dec, .. } => {
                let d = dec[0].forward(tape, store, topo, u)?;
                let d = tape.relu(d);
                let d = dec[1].forward(tape, store, topo, d)?;
                let d = tape.relu(d);
                dec[2].forward(tape, store, topo, d)
            }
            EdgeNet::Egcn { dec, .. } => {
                // the code carries no edge features of its own; edges see the
                // mean of their unpooled endpoints
                let e = endpoint_mean(tape, topo, u)?;
                let n = dec[0].forward(tape, store, topo, u, e)?;
                let n = tape.relu(n);
                let n = dec[1].forward(tape, store, topo, n, e)?;
                let n = tape.relu(n);
                let n = dec[2].forward(tape, store, topo, n, e)?;
                endpoint_mean(tape, topo, n)
            }
        }
    }

    /// Reconstructed edge features (or logits) for `g`.
    pub fn edge_forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        topo: &Topology,
        g: &Graph,
        decode: Decode,
    ) -> Result<Var> {
        let (pooled, c) = self.edge_encode(tape, store, topo, g)?;
        let u = unpool(tape, c, pooled, decode)?;
        self.edge_decode(tape, store, topo, u)
    }

    /// Pooled code of `g`: `m_pool x latent` features and the assignment.
    /// The assignment is over edges for the edge-layer model and over nodes
    /// for the node-centric baseline.
    pub fn encode_edges(&self, g: &Graph) -> Result<EdgeCode> {
        let topo = Topology::of(g);
        let mut tape = Tape::new();
        let (pooled, c) = self.edge_encode(&mut tape, &self.edge_store, &topo, g)?;
        Ok(EdgeCode {
            pooled: tape.value(pooled).clone(),
            assignment: tape.value(c).clone(),
        })
    }

    /// Reconstructed node features (or logits) for `g`, if the node
    /// autoencoder is enabled.
    pub fn node_forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        topo: &Topology,
        g: &Graph,
        decode: Decode,
    ) -> Result<Option<Var>> {
        let Some(net) = &self.node_net else {
            return Ok(None);
        };
        let x = tape.constant(g.node_features().clone());
        let h = net.enc[0].forward(tape, store, topo, x, None)?;
        let h = tape.relu(h);
        let h = net.enc[1].forward(tape, store, topo, h, None)?;
        let h = tape.relu(h);
        let (pooled, c) = pool(tape, store, net.assign.as_ref(), h)?;
        let u = unpool(tape, c, pooled, decode)?;
        let d = net.dec[0].forward(tape, store, topo, u, None)?;
        let d = tape.relu(d);
        let d = net.dec[1].forward(tape, store, topo, d, None)?;
        let d = tape.relu(d);
        Ok(Some(net.dec[2].forward(tape, store, topo, d, None)?))
    }

    fn edge_loss(&self, tape: &mut Tape, store: &ParamStore, topo: &Topology, g: &Graph) -> Result<Var> {
        let out = self.edge_forward(tape, store, topo, g, self.config.train_decode)?;
        target_loss(tape, self.config.target, out, g.edge_features())
    }

    fn node_loss(&self, tape: &mut Tape, store: &ParamStore, topo: &Topology, g: &Graph) -> Result<Var> {
        let out = self
            .node_forward(tape, store, topo, g, self.config.train_decode)?
            .ok_or_else(|| Error::Invalid("node autoencoder is disabled".into()))?;
        target_loss(tape, self.config.target, out, g.node_features())
    }

    /// Edge outputs and per-graph edge losses under `store`.
    fn edge_outputs(
        &self,
        store: &ParamStore,
        dataset: &[Graph],
        topos: &[Topology],
        decode: Decode,
    ) -> Result<Vec<(Tensor, f64)>> {
        dataset
            .par_iter()
            .zip(topos)
            .map(|(g, topo)| {
                let mut tape = Tape::new();
                let e = self.edge_forward(&mut tape, store, topo, g, decode)?;
                let l = target_loss(&mut tape, self.config.target, e, g.edge_features())?;
                Ok((tape.value(e).clone(), tape.value(l).data()[0]))
            })
            .collect()
    }

    /// Node outputs and per-graph node losses under `store`; empty when the
    /// node autoencoder is disabled.
    fn node_outputs(
        &self,
        store: &ParamStore,
        dataset: &[Graph],
        topos: &[Topology],
        decode: Decode,
    ) -> Result<Vec<(Tensor, f64)>> {
        if self.node_net.is_none() {
            return Ok(Vec::new());
        }
        dataset
            .par_iter()
            .zip(topos)
            .map(|(g, topo)| {
                let mut tape = Tape::new();
                let n = self
                    .node_forward(&mut tape, store, topo, g, decode)?
                    .expect("node autoencoder enabled");
                let l = target_loss(&mut tape, self.config.target, n, g.node_features())?;
                Ok((tape.value(n).clone(), tape.value(l).data()[0]))
            })
            .collect()
    }

    /// Metrics over edges and, when enabled, nodes of every graph.
    pub fn evaluate(&self, dataset: &[Graph], decode: Decode) -> Result<Metrics> {
        let topos: Vec<Topology> = dataset.iter().map(Topology::of).collect();
        let edges = self.edge_outputs(&self.edge_store, dataset, &topos, decode)?;
        let mut nodes = self
            .node_outputs(&self.node_store, dataset, &topos, decode)?
            .into_iter();
        let blocks: Vec<Vec<(Tensor, Tensor)>> = edges
            .into_iter()
            .zip(dataset)
            .map(|((e, _), g)| {
                let mut b = vec![(e, g.edge_features().clone())];
                if let Some((n, _)) = nodes.next() {
                    b.push((n, g.node_features().clone()));
                }
                b
            })
            .collect();
        evaluate_outputs(&blocks, self.config.target)
    }

    /// Metrics over edges only.
    pub fn evaluate_edges(&self, dataset: &[Graph], decode: Decode) -> Result<Metrics> {
        let topos: Vec<Topology> = dataset.iter().map(Topology::of).collect();
        let edges = self.edge_outputs(&self.edge_store, dataset, &topos, decode)?;
        report(edges, dataset, Graph::edge_features, self.config.target).map(|r| r.metrics)
    }
}

fn report(
    outs: Vec<(Tensor, f64)>,
    dataset: &[Graph],
    target: fn(&Graph) -> &Tensor,
    kind: TargetKind,
) -> Result<EpochReport> {
    let val_loss = outs.iter().map(|o| o.1).sum::<f64>() / outs.len().max(1) as f64;
    let blocks: Vec<Vec<(Tensor, Tensor)>> = outs
        .into_iter()
        .zip(dataset)
        .map(|((o, _), g)| vec![(o, target(g).clone())])
        .collect();
    Ok(EpochReport {
        val_loss,
        metrics: evaluate_outputs(&blocks, kind)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionSettings {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lr_node: f64,
    pub lr_edge: f64,
    pub seed: u64,
}

impl ReconstructionSettings {
    pub fn new(max_epochs: usize, seed: u64) -> Self {
        let base = TrainConfig::new(LR_EDGE, seed);
        Self {
            max_epochs,
            patience: base.patience,
            batch_size: base.batch_size,
            lr_node: LR_NODE,
            lr_edge: LR_EDGE,
            seed,
        }
    }

    fn train_config(&self, lr: f64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            learning_rate: lr,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionOutcome {
    pub edge_history: History,
    pub node_history: Option<History>,
    /// Final metrics over nodes (if enabled) and edges, decoded as in training.
    pub metrics: Metrics,
}

/// Trains the edge autoencoder and, when enabled, the node autoencoder on
/// `dataset`. The reconstruction objective is evaluated on the training
/// graphs themselves, so the validation loss is the full-dataset loss.
pub fn train_reconstruction(
    model: &mut ReconstructionModel,
    dataset: &[Graph],
    settings: &ReconstructionSettings,
) -> Result<ReconstructionOutcome> {
    let dims = check_dataset(dataset)?;
    if dims != (model.node_dim, model.edge_dim) {
        return Err(Error::Dataset(format!(
            "model expects feature widths ({}, {}), dataset has {dims:?}",
            model.node_dim, model.edge_dim
        )));
    }
    let topos: Vec<Topology> = dataset.iter().map(Topology::of).collect();
    let items: Vec<usize> = (0..dataset.len()).collect();

    let mut store = std::mem::take(&mut model.edge_store);
    let edge_cfg = settings.train_config(settings.lr_edge);
    let edge_out = {
        let view = &*model;
        fit(
            &mut store,
            &edge_cfg,
            &items,
            |tape, s, i| view.edge_loss(tape, s, &topos[i], &dataset[i]),
            |s, _| {
                let outs = view.edge_outputs(s, dataset, &topos, view.config.train_decode)?;
                report(outs, dataset, Graph::edge_features, view.config.target)
            },
        )
    };
    model.edge_store = store;
    let edge_out = edge_out?;

    let node_history = if model.has_node_autoencoder() {
        let mut store = std::mem::take(&mut model.node_store);
        let node_cfg = settings.train_config(settings.lr_node);
        let out = {
            let view = &*model;
            fit(
                &mut store,
                &node_cfg,
                &items,
                |tape, s, i| view.node_loss(tape, s, &topos[i], &dataset[i]),
                |s, _| {
                    let outs = view.node_outputs(s, dataset, &topos, view.config.train_decode)?;
                    report(outs, dataset, Graph::node_features, view.config.target)
                },
            )
        };
        model.node_store = store;
        Some(out?.history)
    } else {
        None
    };

    Ok(ReconstructionOutcome {
        edge_history: edge_out.history,
        node_history,
        metrics: model.evaluate(dataset, model.config.train_decode)?,
    })
}

/// Memory accounting for one compressed graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressionReport {
    /// Compressed floats over original floats.
    pub relative_size: f64,
    /// Same accounting with nodes pooled and edge features stored as is.
    pub node_only_relative_size: f64,
    /// Edge metric with hard (argmax) decoding.
    pub edge_accuracy: f64,
    pub original_floats: f64,
    pub compressed_floats: f64,
    pub m_pool: usize,
}

/// Size of `g` after pooling, counted in stored scalars:
///
/// - nodes: `node_ratio · n · d` pooled node floats
/// - edges: `m_pool · latent` pooled edge floats
/// - bookkeeping: one cluster index per edge, plus one per node when
///   `node_ratio < 1`
///
/// The node-only baseline stores nodes the same way and keeps all `m · d'`
/// edge floats. Edge accuracy is measured with hard decoding, matching the
/// one-index-per-edge bookkeeping; for continuous targets it is
/// `1 − mse`.
pub fn compression_report(model: &ReconstructionModel, g: &Graph, node_ratio: f64) -> Result<CompressionReport> {
    if !(node_ratio > 0.0 && node_ratio <= 1.0) {
        return Err(Error::Invalid(format!("node ratio {node_ratio} is outside (0, 1]")));
    }
    let (n, m) = (g.num_nodes() as f64, g.num_edges() as f64);
    let (d, de) = (g.node_dim() as f64, g.edge_dim() as f64);
    let original = n * d + m * de;
    if original == 0.0 {
        return Err(Error::Invalid("graph has no features to compress".into()));
    }
    let node_part = node_ratio * n * d + if node_ratio < 1.0 { n } else { 0.0 };
    let edge_part = (model.m_pool * model.config.latent) as f64 + m;
    let compressed = node_part + edge_part;
    let node_only = node_part + m * de;
    let metrics = model.evaluate_edges(std::slice::from_ref(g), Decode::Hard)?;
    let edge_accuracy = match metrics.accuracy {
        Some(a) => a,
        None => 1.0 - metrics.mse.unwrap_or(1.0),
    };
    Ok(CompressionReport {
        relative_size: compressed / original,
        node_only_relative_size: node_only / original,
        edge_accuracy,
        original_floats: original,
        compressed_floats: compressed,
        m_pool: model.m_pool,
    })
}
