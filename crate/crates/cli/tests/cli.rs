use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ehgnn::io::read_graph_json;
use tempfile::TempDir;

fn ehgnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehgnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn gen_star_writes_five_nodes_four_edges() {
    let dir = TempDir::new().unwrap();
    let out = ehgnn(dir.path(), &["gen", "star", "--leaves", "4", "-o", "s.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = read_graph_json(dir.path().join("s.json")).unwrap();
    assert_eq!((g.num_nodes(), g.num_edges()), (5, 4));
}

#[test]
fn dht_twice_restores_the_file() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&ehgnn(d, &["--seed", "4", "gen", "erdos_renyi_paired", "--n", "12", "--m", "20", "-o", "g.json"])), 0);
    assert_eq!(code(&ehgnn(d, &["dht", "g.json", "out.json"])), 0);
    assert_eq!(code(&ehgnn(d, &["dht", "out.json", "back.json"])), 0);
    assert_eq!(fs::read(d.join("g.json")).unwrap(), fs::read(d.join("back.json")).unwrap());
    assert_ne!(fs::read(d.join("g.json")).unwrap(), fs::read(d.join("out.json")).unwrap());
}

#[test]
fn gen_is_deterministic_under_seed() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for (seed, name) in [("7", "a.json"), ("7", "b.json"), ("8", "c.json")] {
        let out = ehgnn(d, &["--seed", seed, "gen", "clustered_edge_colors", "--n", "30", "-o", name]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let read = |n: &str| fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_ne!(read("a.json"), read("c.json"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = ehgnn(d, &["frobnicate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"));
    assert_eq!(code(&ehgnn(d, &["gen", "star", "-o", "s.json"])), 1);
    assert_eq!(code(&ehgnn(d, &["gen", "hexagon", "--n", "6", "-o", "s.json"])), 1);
    assert_eq!(code(&ehgnn(d, &["bench", "transform", "--sizes", "400,200"])), 1);
    assert_eq!(code(&ehgnn(d, &["--help"])), 0);
}

#[test]
fn missing_config_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = ehgnn(dir.path(), &["classify", "missing.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.toml"), "{}", stderr(&out));
}

#[test]
fn bad_config_key_names_the_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.cfg"), "epochs = 2\nwidth = 9\n").unwrap();
    let out = ehgnn(dir.path(), &["reconstruct", "run.cfg"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("run.cfg:2: unknown key `width`"), "{}", stderr(&out));
}

#[test]
fn task_mismatch_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.cfg"), "task = classify\n").unwrap();
    assert_eq!(code(&ehgnn(dir.path(), &["reconstruct", "run.cfg"])), 1);
}

#[test]
fn reconstruct_manifest_reproduces_metrics() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.cfg"),
        "# small continuous run\ndataset = clustered_edge_colors\nn_points = 30\nepochs = 15\nhidden = 8\nlatent = 8\nnode_ratio = 0.5\n",
    )
    .unwrap();
    let out = ehgnn(d, &["--seed", "2", "--out", "first", "--csv", "reconstruct", "run.cfg"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["metrics.json", "manifest.cfg", "edge_history.csv", "node_history.csv"] {
        assert!(d.join("first").join(f).exists(), "{f}");
    }
    let history = fs::read_to_string(d.join("first/edge_history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,accuracy,exact_match\n"));
    assert_eq!(history.lines().count(), 16);

    let manifest = fs::read_to_string(d.join("first/manifest.cfg")).unwrap();
    assert!(manifest.contains("seed = 2\n") && manifest.contains("task = reconstruct\n"));
    let out = ehgnn(d, &["--out", "second", "reconstruct", "first/manifest.cfg"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(d.join("first/metrics.json")).unwrap(),
        fs::read(d.join("second/metrics.json")).unwrap()
    );
}

#[test]
fn compress_reports_sizes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "n = 30\nm = 120\nedge_ratio = 0.1\nepochs = 10\n").unwrap();
    let out = ehgnn(d, &["--out", "c", "--csv", "compress", "run.cfg"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics = fs::read_to_string(d.join("c/metrics.json")).unwrap();
    for key in ["\"m_pool\": 12", "\"relative_size\"", "\"node_only_relative_size\"", "\"edge_accuracy\""] {
        assert!(metrics.contains(key), "{key} in {metrics}");
    }
    let csv = fs::read_to_string(d.join("c/compression.csv")).unwrap();
    assert!(csv.starts_with("relative_size,node_only_relative_size,edge_accuracy"));
}

#[test]
fn bench_csv_lands_in_out_dir() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = ehgnn(
        d,
        &["--out", "b", "--csv", "bench", "transform", "--n", "60", "--sizes", "50,100", "--repeats", "1"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(d.join("b/transform.csv")).unwrap();
    assert!(csv.starts_with("m,dht_time,linegraph_time,dht_pairs,linegraph_edges\n50,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("log-log slopes"));
}
