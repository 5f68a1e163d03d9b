//! Timing harness for the transformation and message-passing comparisons.
//!
//! Structural counts (`dht_pairs`, `linegraph_edges`) are exact and
//! machine-independent; wall times are medians over repeats after one
//! discarded warm-up run.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::Tape;
use crate::datagen::{gen_erdos_renyi_paired, gen_scale_free, DEFAULT_ATTACH};
use crate::dht::{dht, line_graph, line_graph_edge_count};
use crate::graph::{Graph, Topology};
use crate::layers::{EhgnnLayer, GcnLayer};
use crate::optim::ParamStore;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Each timed sample repeats the operation until at least this long.
const MIN_SAMPLE: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformRow {
    pub m: usize,
    pub dht_time: f64,
    pub linegraph_time: f64,
    pub dht_pairs: usize,
    pub linegraph_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessagePassingRow {
    pub graph: String,
    pub n: usize,
    pub m: usize,
    pub node_mp_time: f64,
    pub edge_mp_time: f64,
    /// `(max − min) / median` over the node-pass samples.
    pub node_spread: f64,
    pub edge_spread: f64,
}

impl MessagePassingRow {
    pub fn ratio(&self) -> f64 {
        self.edge_mp_time / self.node_mp_time
    }
}

/// Median seconds per call and relative spread over `repeats` samples.
pub fn time_median(repeats: usize, mut f: impl FnMut()) -> (f64, f64) {
    f();
    let start = Instant::now();
    f();
    let once = start.elapsed();
    let inner = (MIN_SAMPLE.as_secs_f64() / once.as_secs_f64().max(1e-9)).ceil().max(1.0) as usize;
    let mut samples: Vec<f64> = (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            for _ in 0..inner {
                f();
            }
            start.elapsed().as_secs_f64() / inner as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let median = samples[samples.len() / 2];
    let spread = (samples[samples.len() - 1] - samples[0]) / median.max(f64::MIN_POSITIVE);
    (median, spread)
}

/// DHT and line-graph construction on Erdős–Rényi graphs with `n` nodes and
/// each of `sizes` edges.
pub fn bench_transform(n: usize, sizes: &[usize], repeats: usize, seed: u64) -> Result<Vec<TransformRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("sizes must be strictly ascending".into()));
    }
    sizes
        .iter()
        .map(|&m| {
            let g = gen_erdos_renyi_paired(n, m, seed)?;
            let (dht_time, _) = time_median(repeats, || {
                std::hint::black_box(dht(std::hint::black_box(&g)));
            });
            let (linegraph_time, _) = time_median(repeats, || {
                std::hint::black_box(line_graph(std::hint::black_box(&g)));
            });
            Ok(TransformRow {
                m,
                dht_time,
                linegraph_time,
                dht_pairs: dht(&g).hyperedges().len(),
                linegraph_edges: line_graph_edge_count(&g),
            })
        })
        .collect()
}

/// Replaces both feature matrices by seeded uniform values of width `d`.
pub fn with_random_features(g: &Graph, d: usize, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |rows: usize| {
        Tensor::new(rows, d, (0..rows * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    let x = random(g.num_nodes())?;
    let e = random(g.num_edges())?;
    Ok(g.replace_node_features(x)?.replace_edge_features(e)?)
}

/// One GCN pass on the graph against one edge-layer pass on its dual, both
/// `d -> d` on prebuilt index arrays.
pub fn bench_message_passing(
    graphs: &[(String, Graph)],
    d: usize,
    repeats: usize,
    parallel: bool,
) -> Result<Vec<MessagePassingRow>> {
    let run = |(name, g): &(String, Graph)| -> Result<MessagePassingRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let gcn = GcnLayer::new(&mut store, "gcn", g.node_dim(), d, &mut rng);
        let edge = EhgnnLayer::new(&mut store, "edge", g.edge_dim(), d, &mut rng);
        let topo = Topology::of(g);
        let mut failure = None;
        let (node_mp_time, node_spread) = time_median(repeats, || {
            let mut tape = Tape::new();
            let x = tape.constant(g.node_features().clone());
            if let Err(e) = gcn.forward(&mut tape, &store, &topo, x, None) {
                failure = Some(e);
            }
            std::hint::black_box(&tape);
        });
        let (edge_mp_time, edge_spread) = time_median(repeats, || {
            let mut tape = Tape::new();
            let e = tape.constant(g.edge_features().clone());
            if let Err(e) = edge.forward(&mut tape, &store, &topo, e) {
                failure = Some(e);
            }
            std::hint::black_box(&tape);
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(MessagePassingRow {
            graph: name.clone(),
            n: g.num_nodes(),
            m: g.num_edges(),
            node_mp_time,
            edge_mp_time,
            node_spread,
            edge_spread,
        })
    };
    if parallel {
        graphs.par_iter().map(run).collect()
    } else {
        graphs.iter().map(run).collect()
    }
}

/// The Erdős–Rényi and scale-free pair used for the parity comparison,
/// with random features of width `d`.
pub fn parity_graphs(n: usize, m: usize, d: usize, seed: u64) -> Result<Vec<(String, Graph)>> {
    let er = gen_erdos_renyi_paired(n, m, seed)?;
    let sf = gen_scale_free(n, DEFAULT_ATTACH, seed)?;
    Ok(vec![
        (format!("erdos_renyi_n{n}_m{}", er.num_edges()), with_random_features(&er, d, seed)?),
        (format!("scale_free_n{n}_m{}", sf.num_edges()), with_random_features(&sf, d, seed)?),
    ])
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Invalid("slope needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Invalid("log-log slope needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if var == 0.0 {
        return Err(Error::Invalid("slope needs at least two distinct x values".into()));
    }
    Ok(cov / var)
}

/// Writes rows as CSV with a header.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_star;

    #[test]
    fn star_counts() {
        let g = gen_star(4).unwrap();
        assert_eq!(line_graph_edge_count(&g), 6);
        assert_eq!(dht(&g).hyperedges().len(), 8);
    }

    #[test]
    fn transform_counts_on_small_er() {
        let rows = bench_transform(60, &[50, 100, 200], 1, 3).unwrap();
        for r in &rows {
            assert_eq!(r.dht_pairs, 2 * r.m);
            assert!(r.dht_time > 0.0 && r.linegraph_time > 0.0);
        }
        assert!(rows[2].linegraph_edges > 2 * rows[1].linegraph_edges);
        assert!(bench_transform(60, &[100, 50], 1, 3).is_err());
    }

    #[test]
    fn empty_graph_message_passing() {
        let g = with_random_features(&Graph::featureless(5, vec![]).unwrap(), 4, 0).unwrap();
        let rows = bench_message_passing(&[("empty".into(), g)], 4, 3, false).unwrap();
        assert_eq!(rows[0].m, 0);
        assert!(rows[0].node_mp_time > 0.0 && rows[0].edge_mp_time > 0.0);
        assert!(rows[0].node_spread >= 0.0);
    }

    #[test]
    fn slope_of_power_laws() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_has_header() {
        let rows = vec![TransformRow {
            m: 1,
            dht_time: 0.5,
            linegraph_time: 0.25,
            dht_pairs: 2,
            linegraph_edges: 0,
        }];
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "m,dht_time,linegraph_time,dht_pairs,linegraph_edges\n1,0.5,0.25,2,0\n"
        );
    }
}
