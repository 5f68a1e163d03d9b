use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use ehgnn::bench::{bench_message_passing, bench_transform, loglog_slope, parity_graphs, write_csv};
use ehgnn::datagen::{cycle_or_path_dataset, erdos_renyi_paired_dataset, GeneratorSpec};
use ehgnn::dht::{dht, dht_inverse};
use ehgnn::io::{read_graph_json, read_json_document, write_dual_json, write_graph_json, JsonDocument};
use ehgnn::tasks::reconstruction::{LR_EDGE, LR_NODE};
use ehgnn::tasks::training::{DEFAULT_BATCH, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE};
use ehgnn::tasks::{
    compression_report, labels_of, stratified_split, train_classification, train_reconstruction, AssignmentStrategy,
    ClassificationModel, Decode, EdgeEncoder, History, ReconstructionConfig, ReconstructionModel,
    ReconstructionSettings, TargetKind, TrainConfig,
};
use ehgnn::Graph;
use serde::Serialize;

use crate::config::Config;
use crate::{CliError, GlobalArgs};

const DEFAULT_OUT: &str = "ehgnn-out";
const CLASSIFY_LR: f64 = 5e-3;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn dht_command(input: &Path, output: &Path) -> Result<(), CliError> {
    match read_json_document(input)? {
        JsonDocument::Graph(g) => {
            let h = dht(&g);
            if !dht_inverse(&h).map_err(ehgnn::Error::from)?.bit_eq(&g) {
                return Err(round_trip_failed(input));
            }
            write_dual_json(&h, output)?;
            println!("dual hypergraph: {} dual nodes, {} hyperedges", h.num_dual_nodes(), h.num_hyperedges());
        }
        JsonDocument::Dual(h) => {
            let g = dht_inverse(&h).map_err(ehgnn::Error::from)?;
            let again = dht(&g);
            if again.hyperedges() != h.hyperedges() || !again.dual_node_features().bit_eq(h.dual_node_features()) {
                return Err(round_trip_failed(input));
            }
            write_graph_json(&g, output)?;
            println!("graph: {} nodes, {} edges", g.num_nodes(), g.num_edges());
        }
    }
    Ok(())
}

fn round_trip_failed(input: &Path) -> CliError {
    ehgnn::Error::Invalid(format!("{}: round trip did not reproduce the input", input.display())).into()
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// clustered_edge_colors, erdos_renyi_paired, star, scale_free or cycle_or_path
    family: String,
    /// Node count (points for clustered_edge_colors).
    #[arg(long)]
    n: Option<usize>,
    /// Edge count for erdos_renyi_paired.
    #[arg(long)]
    m: Option<usize>,
    /// Leaves of the star.
    #[arg(long)]
    leaves: Option<usize>,
    /// Neighbors per point for clustered_edge_colors.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Color clusters for clustered_edge_colors.
    #[arg(long, default_value_t = 3)]
    colors: usize,
    /// Edges per new node for scale_free.
    #[arg(long, default_value_t = ehgnn::datagen::DEFAULT_ATTACH)]
    attach: usize,
    /// Close the cycle_or_path graph into a cycle.
    #[arg(long)]
    cycle: bool,
    /// Output JSON path.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

fn need(value: Option<usize>, flag: &str, family: &str) -> Result<usize, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("`gen {family}` needs --{flag}")))
}

pub fn gen_command(args: &GenArgs, global: &GlobalArgs) -> Result<(), CliError> {
    let seed = global.seed.unwrap_or(0);
    let family = args.family.as_str();
    let spec = match family {
        "clustered_edge_colors" => GeneratorSpec::ClusteredEdgeColors {
            n_points: need(args.n, "n", family)?,
            k_neighbors: args.k,
            n_color_clusters: args.colors,
            seed,
        },
        "erdos_renyi_paired" => GeneratorSpec::ErdosRenyiPaired {
            n: need(args.n, "n", family)?,
            m: need(args.m, "m", family)?,
            seed,
        },
        "star" => GeneratorSpec::Star {
            n_leaves: need(args.leaves, "leaves", family)?,
        },
        "scale_free" => GeneratorSpec::ScaleFree {
            n: need(args.n, "n", family)?,
            attach: args.attach,
            seed,
        },
        "cycle_or_path" => GeneratorSpec::CycleOrPath {
            n: need(args.n, "n", family)?,
            is_cycle: args.cycle,
        },
        other => return Err(CliError::Usage(format!("unknown family `{other}`"))),
    };
    let g = spec.generate()?;
    write_graph_json(&g, &args.output)?;
    println!("{}: {} nodes, {} edges", args.output.display(), g.num_nodes(), g.num_edges());
    Ok(())
}

/// Config with command-line overrides applied, plus its output directory.
struct Run {
    config: Config,
    seed: u64,
    out: PathBuf,
    csv: bool,
}

impl Run {
    fn start(path: &Path, task: &str, global: &GlobalArgs) -> Result<Self, CliError> {
        let mut config = Config::load(path)?;
        if let Some(t) = config.raw("task") {
            if t != task {
                return Err(CliError::Usage(format!(
                    "{}: config is for task `{t}`, not `{task}`",
                    path.display()
                )));
            }
        }
        config.set("task", task);
        if let Some(seed) = global.seed {
            config.set("seed", seed);
        }
        let seed = config.get_or("seed", 0u64)?;
        config.set("seed", seed);
        if let Some(out) = &global.out {
            config.set("out", out.display());
        }
        let out = PathBuf::from(config.raw("out").unwrap_or(DEFAULT_OUT));
        config.set("out", out.display());
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok(Self {
            config,
            seed,
            out,
            csv: global.csv,
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, text).map_err(io_err(&path))
    }

    fn history(&self, name: &str, h: &History) -> Result<(), CliError> {
        if self.csv {
            h.save_csv(self.out.join(name))?;
        }
        Ok(())
    }

    /// Writes `metrics.json` and `manifest.cfg`, and prints the metrics.
    fn finish<T: Serialize>(&self, metrics: &T) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(metrics).expect("metrics serialize");
        self.write("metrics.json", &(json.clone() + "\n"))?;
        let header = vec![
            format!("ehgnn {}", env!("CARGO_PKG_VERSION")),
            "rerun with the same subcommand and this file as its config".to_string(),
        ];
        self.write("manifest.cfg", &self.config.render(&header))?;
        println!("{json}");
        Ok(())
    }
}

fn dataset(config: &Config, seed: u64, default_family: &str) -> Result<Vec<Graph>, CliError> {
    if let Some(paths) = config.raw("graph") {
        if config.raw("dataset").is_some() {
            return Err(config.error("set either `graph` or `dataset`, not both"));
        }
        return paths
            .split(',')
            .map(|p| read_graph_json(p.trim()).map_err(CliError::from))
            .collect();
    }
    let family = config.raw("dataset").unwrap_or(default_family);
    let graphs = match family {
        "clustered_edge_colors" => vec![GeneratorSpec::ClusteredEdgeColors {
            n_points: config.get_or("n_points", 200)?,
            k_neighbors: config.get_or("k_neighbors", 4)?,
            n_color_clusters: config.get_or("n_color_clusters", 3)?,
            seed,
        }
        .generate()?],
        "erdos_renyi_paired" => erdos_renyi_paired_dataset(
            config.get_or("count", 1)?,
            config.get_or("n", 50)?,
            config.get_or("m", 150)?,
            seed,
        )?,
        "cycle_or_path" => cycle_or_path_dataset(
            config.get_or("count", 200)?,
            config.get_or("n_min", 6)?,
            config.get_or("n_max", 12)?,
            seed,
        )?,
        other => return Err(config.error(format!("unknown dataset `{other}`"))),
    };
    Ok(graphs)
}

fn reconstruction_config(c: &Config, defaults: ReconstructionConfig) -> Result<ReconstructionConfig, CliError> {
    Ok(ReconstructionConfig {
        hidden: c.get_or("hidden", defaults.hidden)?,
        latent: c.get_or("latent", defaults.latent)?,
        edge_ratio: c.get_or("edge_ratio", defaults.edge_ratio)?,
        node_ratio: c.get("node_ratio")?.or(defaults.node_ratio),
        target: c.get_or::<TargetKind>("target", defaults.target)?,
        strategy: c.get_or::<AssignmentStrategy>("strategy", defaults.strategy)?,
        encoder: c.get_or::<EdgeEncoder>("encoder", defaults.encoder)?,
        train_decode: c.get_or::<Decode>("decode", defaults.train_decode)?,
    })
}

fn reconstruction_settings(c: &Config, seed: u64) -> Result<ReconstructionSettings, CliError> {
    let mut s = ReconstructionSettings::new(c.get_or("epochs", DEFAULT_MAX_EPOCHS)?, seed);
    s.patience = c.get_or("patience", DEFAULT_PATIENCE)?;
    s.batch_size = c.get_or("batch_size", DEFAULT_BATCH)?;
    s.lr_node = c.get_or("lr_node", LR_NODE)?;
    s.lr_edge = c.get_or("lr_edge", LR_EDGE)?;
    Ok(s)
}

#[derive(Debug, Serialize)]
struct ReconstructMetrics {
    task: &'static str,
    seed: u64,
    graphs: usize,
    edge_epochs: usize,
    node_epochs: Option<usize>,
    mse: Option<f64>,
    accuracy: Option<f64>,
    exact_match: Option<f64>,
}

pub fn reconstruct_command(path: &Path, global: &GlobalArgs) -> Result<(), CliError> {
    let run = Run::start(path, "reconstruct", global)?;
    let data = dataset(&run.config, run.seed, "clustered_edge_colors")?;
    let config = reconstruction_config(&run.config, ReconstructionConfig::default())?;
    let settings = reconstruction_settings(&run.config, run.seed)?;
    let mut model = ReconstructionModel::new(config, &data, run.seed)?;
    let out = train_reconstruction(&mut model, &data, &settings)?;
    run.history("edge_history.csv", &out.edge_history)?;
    if let Some(h) = &out.node_history {
        run.history("node_history.csv", h)?;
    }
    run.finish(&ReconstructMetrics {
        task: "reconstruct",
        seed: run.seed,
        graphs: data.len(),
        edge_epochs: out.edge_history.rows.len(),
        node_epochs: out.node_history.as_ref().map(|h| h.rows.len()),
        mse: out.metrics.mse,
        accuracy: out.metrics.accuracy,
        exact_match: out.metrics.exact_match,
    })
}

#[derive(Debug, Serialize)]
struct ClassifyMetrics {
    task: &'static str,
    seed: u64,
    graphs: usize,
    keep_ratio: f64,
    epochs: usize,
    best_epoch: usize,
    val_accuracy: f64,
    test_accuracy: f64,
}

pub fn classify_command(path: &Path, global: &GlobalArgs) -> Result<(), CliError> {
    let run = Run::start(path, "classify", global)?;
    let c = &run.config;
    let data = dataset(c, run.seed, "cycle_or_path")?;
    let labels = labels_of(&data)?;
    let classes = labels.iter().max().map_or(0, |&l| l + 1);
    let split = stratified_split(&labels, c.get_or("train_ratio", 0.8)?, c.get_or("val_ratio", 0.1)?, run.seed)?;
    let keep_ratio = c.get_or("keep_ratio", 0.8)?;
    let first = &data[0];
    let mut model = ClassificationModel::new(
        first.node_dim(),
        first.edge_dim(),
        c.get_or("hidden", 32)?,
        classes,
        keep_ratio,
        run.seed,
    )?;
    let config = TrainConfig {
        max_epochs: c.get_or("epochs", DEFAULT_MAX_EPOCHS)?,
        patience: c.get_or("patience", DEFAULT_PATIENCE)?,
        batch_size: c.get_or("batch_size", DEFAULT_BATCH)?,
        learning_rate: c.get_or("lr", CLASSIFY_LR)?,
        seed: run.seed,
    };
    let out = train_classification(&mut model, &data, &split, &config)?;
    run.history("history.csv", &out.history)?;
    run.finish(&ClassifyMetrics {
        task: "classify",
        seed: run.seed,
        graphs: data.len(),
        keep_ratio,
        epochs: out.history.rows.len(),
        best_epoch: out.best_epoch,
        val_accuracy: out.val_accuracy,
        test_accuracy: out.test_accuracy,
    })
}

#[derive(Debug, Serialize)]
struct CompressMetrics {
    task: &'static str,
    seed: u64,
    edge_ratio: f64,
    node_ratio: f64,
    m_pool: usize,
    edge_accuracy: f64,
    relative_size: f64,
    node_only_relative_size: f64,
}

pub fn compress_command(path: &Path, global: &GlobalArgs) -> Result<(), CliError> {
    let run = Run::start(path, "compress", global)?;
    let c = &run.config;
    let data = dataset(&with_fallbacks(c, &[("n", "200"), ("m", "2000")]), run.seed, "erdos_renyi_paired")?;
    let defaults = ReconstructionConfig {
        edge_ratio: 0.05,
        latent: 8,
        target: TargetKind::Categorical,
        train_decode: Decode::Hard,
        ..ReconstructionConfig::default()
    };
    let node_ratio = c.get_or("node_ratio", 0.15)?;
    // node pooling is only accounted for here, not trained
    let config = ReconstructionConfig {
        node_ratio: None,
        ..reconstruction_config(c, defaults)?
    };
    let settings = reconstruction_settings(&with_fallbacks(c, &[("epochs", "1000")]), run.seed)?;
    let mut model = ReconstructionModel::new(config, &data, run.seed)?;
    let out = train_reconstruction(&mut model, &data, &settings)?;
    run.history("edge_history.csv", &out.edge_history)?;
    let reports = data
        .iter()
        .map(|g| compression_report(&model, g, node_ratio))
        .collect::<ehgnn::Result<Vec<_>>>()?;
    if run.csv {
        let path = run.out.join("compression.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        write_csv(&reports, file)?;
    }
    let mean = |f: fn(&ehgnn::tasks::CompressionReport) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
    run.finish(&CompressMetrics {
        task: "compress",
        seed: run.seed,
        edge_ratio: model.config.edge_ratio,
        node_ratio,
        m_pool: model.m_pool,
        edge_accuracy: mean(|r| r.edge_accuracy),
        relative_size: mean(|r| r.relative_size),
        node_only_relative_size: mean(|r| r.node_only_relative_size),
    })
}

/// `c` with `defaults` filled in for keys it does not set.
fn with_fallbacks(c: &Config, defaults: &[(&str, &str)]) -> Config {
    let mut out = c.clone();
    for (k, v) in defaults {
        if out.raw(k).is_none() {
            out.set(k, v);
        }
    }
    out
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Dual transformation against line-graph construction on growing graphs.
    Transform {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Comma-separated ascending edge counts.
        #[arg(long, default_value = "2000,4000,8000,16000", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        repeats: usize,
    },
    /// One node-layer pass against one edge-layer pass of equal width.
    Mp {
        #[arg(long, default_value_t = 3000)]
        n: usize,
        #[arg(long, default_value_t = 12000)]
        m: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        /// Time the graphs concurrently.
        #[arg(long)]
        parallel: bool,
    },
}

fn bench_out(global: &GlobalArgs, name: &str, write: impl FnOnce(fs::File) -> ehgnn::Result<()>) -> Result<(), CliError> {
    if !global.csv {
        return Ok(());
    }
    let dir = global.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    Ok(write(file)?)
}

pub fn bench_command(which: &BenchCommand, global: &GlobalArgs) -> Result<(), CliError> {
    let seed = global.seed.unwrap_or(0);
    match which {
        BenchCommand::Transform { n, sizes, repeats } => {
            if sizes.len() < 2 || sizes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Usage("--sizes needs at least two strictly ascending values".into()));
            }
            let rows = bench_transform(*n, sizes, *repeats, seed)?;
            println!("{:>8} {:>12} {:>12} {:>10} {:>14}", "m", "dht_s", "linegraph_s", "dht_pairs", "linegraph_edges");
            for r in &rows {
                println!(
                    "{:>8} {:>12.3e} {:>12.3e} {:>10} {:>14}",
                    r.m, r.dht_time, r.linegraph_time, r.dht_pairs, r.linegraph_edges
                );
            }
            let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
            let slope = |ys: Vec<f64>| loglog_slope(&ms, &ys);
            println!(
                "log-log slopes: dht time {:.3}, line-graph time {:.3}, line-graph edges {:.3}",
                slope(rows.iter().map(|r| r.dht_time).collect())?,
                slope(rows.iter().map(|r| r.linegraph_time).collect())?,
                slope(rows.iter().map(|r| r.linegraph_edges.max(1) as f64).collect())?,
            );
            bench_out(global, "transform.csv", |f| write_csv(&rows, f))
        }
        BenchCommand::Mp {
            n,
            m,
            dim,
            repeats,
            parallel,
        } => {
            let graphs = parity_graphs(*n, *m, *dim, seed)?;
            let rows = bench_message_passing(&graphs, *dim, *repeats, *parallel)?;
            println!("{:<28} {:>12} {:>12} {:>7}", "graph", "node_s", "edge_s", "ratio");
            for r in &rows {
                println!(
                    "{:<28} {:>12.3e} {:>12.3e} {:>7.2}",
                    r.graph,
                    r.node_mp_time,
                    r.edge_mp_time,
                    r.ratio()
                );
            }
            bench_out(global, "mp.csv", |f| write_csv(&rows, f))
        }
    }
}
