//! Seeded synthetic graph families.
//!
//! Every generator is a pure function of its arguments: the same seed gives
//! a bit-identical graph. All outputs pass [`Graph::validate`].

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Width of the one-hot node value in [`gen_erdos_renyi_paired`].
pub const NODE_VALUES: usize = 3;
/// Number of unordered node-value pairs, the edge category count.
pub const EDGE_CATEGORIES: usize = 6;
/// Degree one-hots cover `0..=DEGREE_CAP`.
pub const DEGREE_CAP: usize = 4;
/// Default preferential-attachment edges per new node.
pub const DEFAULT_ATTACH: usize = 4;

/// A generator family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    ClusteredEdgeColors {
        n_points: usize,
        k_neighbors: usize,
        n_color_clusters: usize,
        seed: u64,
    },
    ErdosRenyiPaired {
        n: usize,
        m: usize,
        seed: u64,
    },
    Star {
        n_leaves: usize,
    },
    ScaleFree {
        n: usize,
        attach: usize,
        seed: u64,
    },
    CycleOrPath {
        n: usize,
        is_cycle: bool,
    },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Graph> {
        match *self {
            Self::ClusteredEdgeColors {
                n_points,
                k_neighbors,
                n_color_clusters,
                seed,
            } => gen_clustered_edge_colors(n_points, k_neighbors, n_color_clusters, seed),
            Self::ErdosRenyiPaired { n, m, seed } => gen_erdos_renyi_paired(n, m, seed),
            Self::Star { n_leaves } => gen_star(n_leaves),
            Self::ScaleFree { n, attach, seed } => gen_scale_free(n, attach, seed),
            Self::CycleOrPath { n, is_cycle } => gen_cycle_or_path(n, is_cycle),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

/// Points on two interleaved arcs joined by k-nearest-neighbor edges.
///
/// Node features are the 2-D coordinates. Edges are split into
/// `n_color_clusters` contiguous bands by the x coordinate of their
/// midpoint, and every edge in a band gets that band's RGB color, so exactly
/// `n_color_clusters` distinct colors appear.
pub fn gen_clustered_edge_colors(
    n_points: usize,
    k_neighbors: usize,
    n_color_clusters: usize,
    seed: u64,
) -> Result<Graph> {
    if n_points < 4 {
        return Err(invalid(format!("n_points must be at least 4, got {n_points}")));
    }
    if k_neighbors == 0 || k_neighbors >= n_points {
        return Err(invalid(format!(
            "k_neighbors must be in [1, {n_points}), got {k_neighbors}"
        )));
    }
    if n_color_clusters == 0 {
        return Err(invalid("n_color_clusters must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const NOISE: f64 = 0.05;
    let upper = n_points.div_ceil(2);
    let points: Vec<[f64; 2]> = (0..n_points)
        .map(|i| {
            let t = std::f64::consts::PI * rng.gen::<f64>();
            let (x, y) = if i < upper {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            [
                x + rng.gen_range(-NOISE..NOISE),
                y + rng.gen_range(-NOISE..NOISE),
            ]
        })
        .collect();

    let dist2 = |a: usize, b: usize| {
        let dx = points[a][0] - points[b][0];
        let dy = points[a][1] - points[b][1];
        dx * dx + dy * dy
    };
    let mut edge_set = BTreeSet::new();
    for i in 0..n_points {
        let mut others: Vec<usize> = (0..n_points).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist2(i, a).total_cmp(&dist2(i, b)).then(a.cmp(&b)));
        for &j in &others[..k_neighbors] {
            edge_set.insert((i.min(j), i.max(j)));
        }
    }
    let edges: Vec<(usize, usize)> = edge_set.into_iter().collect();
    let m = edges.len();
    if m < n_color_clusters {
        return Err(invalid(format!(
            "{m} edges cannot carry {n_color_clusters} colors"
        )));
    }

    let mut palette: Vec<[f64; 3]> = Vec::with_capacity(n_color_clusters);
    while palette.len() < n_color_clusters {
        let c = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
        if !palette.contains(&c) {
            palette.push(c);
        }
    }

    let mid_x: Vec<f64> = edges
        .iter()
        .map(|&(u, v)| 0.5 * (points[u][0] + points[v][0]))
        .collect();
    let mut by_x: Vec<usize> = (0..m).collect();
    by_x.sort_by(|&a, &b| mid_x[a].total_cmp(&mid_x[b]).then(a.cmp(&b)));
    let mut edge_features = Tensor::zeros(m, 3);
    for (rank, &e) in by_x.iter().enumerate() {
        let band = rank * n_color_clusters / m;
        edge_features.row_mut(e).copy_from_slice(&palette[band]);
    }

    let node_features = Tensor::new(n_points, 2, points.concat())?;
    Ok(Graph::new(n_points, node_features, edges, edge_features)?)
}

/// Category of the unordered node-value pair `{a, b}`:
/// `{0,0}→0, {0,1}→1, {0,2}→2, {1,1}→3, {1,2}→4, {2,2}→5`.
pub fn pair_category(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    lo * NODE_VALUES - lo * (lo + 1) / 2 + hi
}

/// Uniform simple graph with exactly `m` edges, node values in `{0, 1, 2}`
/// and edge categories given by [`pair_category`] of the endpoint values.
pub fn gen_erdos_renyi_paired(n: usize, m: usize, seed: u64) -> Result<Graph> {
    let total = n * n.saturating_sub(1) / 2;
    if m > total {
        return Err(invalid(format!(
            "{m} edges exceed the simple-graph bound {total} for {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<usize> = (0..n).map(|_| rng.gen_range(0..NODE_VALUES)).collect();
    let mut picks = index::sample(&mut rng, total, m).into_vec();
    picks.sort_unstable();

    // row i of the upper triangle starts at offsets[i]
    let offsets: Vec<usize> = (0..n).map(|i| i * (2 * n - i - 1) / 2).collect();
    let edges: Vec<(usize, usize)> = picks
        .iter()
        .map(|&k| {
            let i = offsets.partition_point(|&o| o <= k) - 1;
            (i, i + 1 + k - offsets[i])
        })
        .collect();

    let mut node_features = Tensor::zeros(n, NODE_VALUES);
    for (v, &val) in values.iter().enumerate() {
        node_features.set(v, val, 1.0);
    }
    let mut edge_features = Tensor::zeros(m, EDGE_CATEGORIES);
    for (e, &(u, v)) in edges.iter().enumerate() {
        edge_features.set(e, pair_category(values[u], values[v]), 1.0);
    }
    Ok(Graph::new(n, node_features, edges, edge_features)?)
}

/// Node value of every node, recovered from the one-hot node features.
pub fn node_values(g: &Graph) -> Vec<usize> {
    g.node_features().argmax_rows()
}

fn degree_featured(n: usize, edges: Vec<(usize, usize)>) -> Result<Graph> {
    let deg = crate::graph::degrees(n, &edges);
    let mut x = Tensor::zeros(n, DEGREE_CAP + 1);
    for (v, &d) in deg.iter().enumerate() {
        x.set(v, d.min(DEGREE_CAP), 1.0);
    }
    let e = Tensor::filled(edges.len(), 1, 1.0);
    Ok(Graph::new(n, x, edges, e)?)
}

/// Hub `0` joined to leaves `1..=n_leaves`.
pub fn gen_star(n_leaves: usize) -> Result<Graph> {
    if n_leaves == 0 {
        return Err(invalid("a star needs at least one leaf"));
    }
    degree_featured(n_leaves + 1, (1..=n_leaves).map(|v| (0, v)).collect())
}

/// Preferential attachment: a clique on `attach + 1` seed nodes, then every
/// new node links to `attach` distinct existing nodes drawn proportionally
/// to degree.
pub fn gen_scale_free(n: usize, attach: usize, seed: u64) -> Result<Graph> {
    if attach == 0 || n <= attach {
        return Err(invalid(format!(
            "scale-free graph needs attach >= 1 and n > attach, got n={n}, attach={attach}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(attach * n);
    // each node appears once per incident edge
    let mut ends: Vec<usize> = Vec::with_capacity(2 * attach * n);
    for u in 0..=attach {
        for v in u + 1..=attach {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    let mut targets = Vec::with_capacity(attach);
    for new in attach + 1..n {
        targets.clear();
        while targets.len() < attach {
            let t = *ends.choose(&mut rng).expect("seed clique has edges");
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        targets.sort_unstable();
        for &t in &targets {
            edges.push((t, new));
            ends.extend([t, new]);
        }
    }
    degree_featured(n, edges)
}

/// Cycle `0-1-…-(n-1)-0` or the path without the closing edge. The label
/// is `1` for a cycle and `0` for a path.
pub fn gen_cycle_or_path(n: usize, is_cycle: bool) -> Result<Graph> {
    let min = if is_cycle { 3 } else { 2 };
    if n < min {
        return Err(invalid(format!(
            "{} needs at least {min} nodes, got {n}",
            if is_cycle { "a cycle" } else { "a path" }
        )));
    }
    let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
    if is_cycle {
        edges.push((n - 1, 0));
    }
    Ok(degree_featured(n, edges)?.with_label(Some(usize::from(is_cycle))))
}

/// `count` graphs from [`gen_erdos_renyi_paired`], one derived seed each.
pub fn erdos_renyi_paired_dataset(count: usize, n: usize, m: usize, seed: u64) -> Result<Vec<Graph>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| gen_erdos_renyi_paired(n, m, rng.gen()))
        .collect()
}

/// Balanced cycle/path graphs with sizes in `n_min..=n_max`, nodes and edges
/// shuffled so that index order carries no signal.
pub fn cycle_or_path_dataset(count: usize, n_min: usize, n_max: usize, seed: u64) -> Result<Vec<Graph>> {
    if n_min < 3 || n_max < n_min {
        return Err(invalid(format!("sizes must satisfy 3 <= n_min <= n_max, got {n_min}..={n_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(n_min..=n_max);
            let g = gen_cycle_or_path(n, i % 2 == 0)?;
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut order: Vec<usize> = (0..g.num_edges()).collect();
            order.shuffle(&mut rng);
            Ok(g.permuted(&perm, &order))
        })
        .collect()
}
