use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{Tape, Var};
use crate::graph::{Graph, Topology};
use crate::layers::{EhgnnLayer, GcnLayer, Linear};
use crate::optim::ParamStore;
use crate::pooling::{hyperdrop_vars, keep_count, topk_select, ScoreLayer};
use crate::tasks::metrics::Metrics;
use crate::tasks::reconstruction::check_dataset;
use crate::tasks::split::Split;
use crate::tasks::training::{fit, EpochReport, History, TrainConfig};
use crate::{Error, Result};

/// Number of edge-layer / drop / node-layer blocks.
pub const BLOCKS: usize = 3;

#[derive(Debug, Clone)]
struct Block {
    edge: EhgnnLayer,
    score: ScoreLayer,
    node: GcnLayer,
}

/// Graph classifier: three blocks of
/// `edge layer → score → top-k edge drop → edge-weighted GCN`, a readout
/// `Σ_blocks [mean nodes ∥ mean edges]` and a linear classifier.
#[derive(Debug, Clone)]
pub struct ClassificationModel {
    pub hidden: usize,
    pub num_classes: usize,
    pub keep_ratio: f64,
    pub node_dim: usize,
    pub edge_dim: usize,
    blocks: Vec<Block>,
    classifier: Linear,
    pub store: ParamStore,
}

impl ClassificationModel {
    pub fn new(
        node_dim: usize,
        edge_dim: usize,
        hidden: usize,
        num_classes: usize,
        keep_ratio: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Invalid(format!("need at least two classes, got {num_classes}")));
        }
        if hidden == 0 {
            return Err(Error::Invalid("hidden width must be positive".into()));
        }
        keep_count(1, keep_ratio)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let blocks = (0..BLOCKS)
            .map(|b| {
                let (de, dn) = if b == 0 { (edge_dim, node_dim) } else { (hidden, hidden) };
                Block {
                    edge: EhgnnLayer::new(&mut store, &format!("block{b}.edge"), de, hidden, &mut rng),
                    score: ScoreLayer::new(&mut store, &format!("block{b}.score"), hidden, &mut rng),
                    node: GcnLayer::new(&mut store, &format!("block{b}.node"), dn, hidden, &mut rng),
                }
            })
            .collect();
        let classifier = Linear::new(&mut store, "classifier", 2 * hidden, num_classes, true, &mut rng);
        Ok(Self {
            hidden,
            num_classes,
            keep_ratio,
            node_dim,
            edge_dim,
            blocks,
            classifier,
            store,
        })
    }

    /// Class logits (`1 x classes`) for `g`.
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, g: &Graph) -> Result<Var> {
        if g.num_edges() == 0 {
            return Err(Error::Invalid("edge drop needs at least one edge".into()));
        }
        let mut topo = Topology::of(g);
        let mut x = tape.constant(g.node_features().clone());
        let mut e = tape.constant(g.edge_features().clone());
        let mut readout: Option<Var> = None;
        for block in &self.blocks {
            let h = block.edge.forward(tape, store, &topo, e)?;
            let h = tape.relu(h);
            let z = block.score.score(tape, store, &topo, h)?;
            let kept = topk_select(tape.value(z).data(), self.keep_ratio)?;
            let (pooled, e_kept, z_kept) = hyperdrop_vars(tape, &topo, h, z, &kept)?;
            let xn = block.node.forward(tape, store, &pooled, x, Some(z_kept))?;
            x = tape.relu(xn);
            e = e_kept;
            topo = pooled;
            let mx = tape.mean_rows(x)?;
            let me = tape.mean_rows(e)?;
            let r = tape.concat_cols(mx, me)?;
            readout = Some(match readout {
                None => r,
                Some(acc) => tape.add(acc, r)?,
            });
        }
        self.classifier
            .forward(tape, store, readout.expect("at least one block"))
    }

    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, g: &Graph) -> Result<Var> {
        let label = g
            .label()
            .ok_or_else(|| Error::Dataset("graph has no label".into()))?;
        if label >= self.num_classes {
            return Err(Error::Dataset(format!(
                "label {label} out of range for {} classes",
                self.num_classes
            )));
        }
        let logits = self.logits(tape, store, g)?;
        Ok(tape.softmax_cross_entropy(logits, &[label])?)
    }

    pub fn predict(&self, g: &Graph) -> Result<usize> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, &self.store, g)?;
        Ok(tape.value(logits).argmax_rows()[0])
    }

    /// Mean loss and accuracy over `items` of `dataset` under `store`.
    fn score(&self, store: &ParamStore, dataset: &[Graph], items: &[usize]) -> Result<(f64, f64)> {
        if items.is_empty() {
            return Ok((0.0, 0.0));
        }
        let per: Vec<(f64, bool)> = items
            .par_iter()
            .map(|&i| {
                let g = &dataset[i];
                let mut tape = Tape::new();
                let logits = self.logits(&mut tape, store, g)?;
                let pred = tape.value(logits).argmax_rows()[0];
                let l = tape.softmax_cross_entropy(logits, &[g.label().unwrap_or(0)])?;
                Ok((tape.value(l).data()[0], Some(pred) == g.label()))
            })
            .collect::<Result<_>>()?;
        let n = per.len() as f64;
        Ok((
            per.iter().map(|p| p.0).sum::<f64>() / n,
            per.iter().filter(|p| p.1).count() as f64 / n,
        ))
    }

    pub fn accuracy(&self, dataset: &[Graph], items: &[usize]) -> Result<f64> {
        Ok(self.score(&self.store, dataset, items)?.1)
    }
}

/// Labels of a classification dataset; every graph must carry one.
pub fn labels_of(dataset: &[Graph]) -> Result<Vec<usize>> {
    dataset
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.label()
                .ok_or_else(|| Error::Dataset(format!("graph {i} has no label")))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ClassificationOutcome {
    pub history: History,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    /// Test accuracy at the best-validation epoch.
    pub test_accuracy: f64,
}

/// Trains on `split.train`, selects the epoch with the lowest validation
/// loss and reports test accuracy there. History rows carry validation
/// accuracy.
pub fn train_classification(
    model: &mut ClassificationModel,
    dataset: &[Graph],
    split: &Split,
    config: &TrainConfig,
) -> Result<ClassificationOutcome> {
    let (nd, ed) = check_dataset(dataset)?;
    if (nd, ed) != (model.node_dim, model.edge_dim) {
        return Err(Error::Dataset(format!(
            "model expects feature widths ({}, {}), dataset has ({nd}, {ed})",
            model.node_dim, model.edge_dim
        )));
    }
    let labels = labels_of(dataset)?;
    let mut classes = labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Dataset("all graphs have the same label".into()));
    }
    let eval_items = if split.val.is_empty() { &split.train } else { &split.val };

    let mut store = std::mem::take(&mut model.store);
    let out = {
        let view = &*model;
        fit(
            &mut store,
            config,
            &split.train,
            |tape, s, i| view.loss(tape, s, &dataset[i]),
            |s, _| {
                let (val_loss, acc) = view.score(s, dataset, eval_items)?;
                Ok(EpochReport {
                    val_loss,
                    metrics: Metrics {
                        accuracy: Some(acc),
                        ..Metrics::default()
                    },
                })
            },
        )
    };
    model.store = store;
    let out = out?;
    Ok(ClassificationOutcome {
        val_accuracy: out.best_report.metrics.accuracy.unwrap_or(0.0),
        test_accuracy: model.accuracy(dataset, &split.test)?,
        best_epoch: out.best_epoch,
        history: out.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::cycle_or_path_dataset;
    use crate::tasks::split::stratified_split;

    #[test]
    fn one_class_model_is_rejected() {
        assert!(ClassificationModel::new(5, 1, 8, 1, 0.5, 0).is_err());
        assert!(ClassificationModel::new(5, 1, 8, 2, 0.0, 0).is_err());
    }

    #[test]
    fn identical_labels_are_rejected() {
        let data: Vec<Graph> = cycle_or_path_dataset(6, 6, 8, 0)
            .unwrap()
            .into_iter()
            .map(|g| g.with_label(Some(1)))
            .collect();
        let mut model = ClassificationModel::new(5, 1, 4, 2, 0.8, 0).unwrap();
        let split = Split {
            train: vec![0, 1, 2, 3],
            val: vec![4],
            test: vec![5],
        };
        let err = train_classification(&mut model, &data, &split, &TrainConfig::new(5e-3, 0)).unwrap_err();
        assert!(matches!(err, Error::Dataset(_)));
    }

    #[test]
    fn keep_ratio_one_runs() {
        let data = cycle_or_path_dataset(20, 6, 8, 1).unwrap();
        let labels = labels_of(&data).unwrap();
        let split = stratified_split(&labels, 0.8, 0.1, 1).unwrap();
        let mut model = ClassificationModel::new(5, 1, 4, 2, 1.0, 1).unwrap();
        let out = train_classification(&mut model, &data, &split, &TrainConfig::new(5e-3, 1).with_epochs(3)).unwrap();
        assert_eq!(out.history.rows.len(), 3);
        assert!((0.0..=1.0).contains(&out.test_accuracy));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = cycle_or_path_dataset(10, 6, 8, 2).unwrap();
        let labels = labels_of(&data).unwrap();
        let split = stratified_split(&labels, 0.6, 0.2, 2).unwrap();
        let run = || {
            let mut model = ClassificationModel::new(5, 1, 4, 2, 0.7, 4).unwrap();
            train_classification(&mut model, &data, &split, &TrainConfig::new(5e-3, 4).with_epochs(4))
                .unwrap()
                .history
        };
        assert_eq!(run(), run());
    }
}
