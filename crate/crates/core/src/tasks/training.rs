use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::{Gradients, Tape, Var};
use crate::optim::{Adam, AdamConfig, ParamStore};
use crate::tasks::Metrics;
use crate::{Error, Result};

/// Default patience on the validation loss, in epochs.
pub const DEFAULT_PATIENCE: usize = 200;
/// Default epoch cap.
pub const DEFAULT_MAX_EPOCHS: usize = 500;
/// Default number of graphs per optimizer step.
pub const DEFAULT_BATCH: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, seed: u64) -> Self {
        Self {
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            batch_size: DEFAULT_BATCH,
            learning_rate,
            seed,
        }
    }

    pub fn with_epochs(mut self, max_epochs: usize) -> Self {
        self.max_epochs = max_epochs;
        self
    }
}

/// One row of the metric history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub accuracy: Option<f64>,
    pub exact_match: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    /// Writes `epoch,train_loss,val_loss,accuracy,exact_match`; missing
    /// metrics are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["epoch", "train_loss", "val_loss", "accuracy", "exact_match"])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<history>".into(),
            source: e,
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.write_csv(file)
    }

    pub fn first_train_loss(&self) -> Option<f64> {
        self.rows.first().map(|r| r.train_loss)
    }

    pub fn last_train_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_loss)
    }
}

/// What the evaluation callback reports after every epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub val_loss: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: History,
    /// Epoch whose parameters were restored (lowest validation loss).
    pub best_epoch: usize,
    pub best_report: EpochReport,
}

/// Mini-batch Adam over `train` item indices.
///
/// Per-item losses and gradients inside a batch are computed in parallel
/// and summed in item order, so runs are deterministic. The loss is
/// averaged over the batch. After every epoch `eval` reports the validation
/// loss; training stops after `patience` epochs without improvement and the
/// best parameters are restored.
pub fn fit<L, V>(
    store: &mut ParamStore,
    config: &TrainConfig,
    train: &[usize],
    loss: L,
    mut eval: V,
) -> Result<TrainOutcome>
where
    L: Fn(&mut Tape, &ParamStore, usize) -> Result<Var> + Sync,
    V: FnMut(&ParamStore, usize) -> Result<EpochReport>,
{
    if train.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    if config.batch_size == 0 || config.max_epochs == 0 {
        return Err(Error::Invalid("batch size and epoch count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(AdamConfig::with_lr(config.learning_rate));
    let mut order = train.to_vec();
    let mut history = History::default();
    let mut best: Option<(usize, EpochReport, ParamStore)> = None;
    let mut last_finite = f64::NAN;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<Result<(f64, Gradients)>> = batch
                .par_iter()
                .map(|&item| {
                    let mut tape = Tape::new();
                    let l = loss(&mut tape, store, item)?;
                    let value = tape.value(l).data()[0];
                    Ok((value, tape.backward(l)?))
                })
                .collect();
            store.zero_grads();
            for r in results {
                let (value, grads) = r?;
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        last: last_finite,
                    });
                }
                epoch_loss += value;
                store.accumulate(&grads);
            }
            store.scale_grads(1.0 / batch.len() as f64);
            store.fill_missing_grads();
            adam.step(store)?;
        }
        let train_loss = epoch_loss / order.len() as f64;
        last_finite = train_loss;

        let report = eval(store, epoch)?;
        if !report.val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                last: last_finite,
            });
        }
        history.rows.push(HistoryRow {
            epoch,
            train_loss,
            val_loss: report.val_loss,
            accuracy: report.metrics.accuracy,
            exact_match: report.metrics.exact_match,
        });
        log::debug!(
            "epoch {epoch}: train {train_loss:.6} val {:.6}",
            report.val_loss
        );
        let improved = best
            .as_ref()
            .map_or(true, |(_, b, _)| report.val_loss < b.val_loss);
        if improved {
            best = Some((epoch, report, store.clone()));
        } else if epoch - best.as_ref().map_or(0, |b| b.0) >= config.patience {
            log::info!("early stop at epoch {epoch}");
            break;
        }
    }
    let (best_epoch, best_report, best_store) = best.expect("at least one epoch ran");
    *store = best_store;
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn quadratic_store() -> (ParamStore, crate::optim::ParamId) {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::from_nested(&[[3.0, -2.0]]));
        (store, w)
    }

    fn eval_of(w: crate::optim::ParamId) -> impl FnMut(&ParamStore, usize) -> Result<EpochReport> {
        move |s: &ParamStore, _| {
            Ok(EpochReport {
                val_loss: s.value(w).data().iter().map(|x| x * x).sum(),
                metrics: Metrics::default(),
            })
        }
    }

    #[test]
    fn loss_decreases_and_history_is_recorded() {
        let (mut store, w) = quadratic_store();
        let cfg = TrainConfig::new(0.1, 1).with_epochs(50);
        let out = fit(
            &mut store,
            &cfg,
            &[0, 1, 2],
            |tape, s, _| {
                let v = tape.param(s, w);
                let sq = tape.mul(v, v)?;
                Ok(tape.sum(sq))
            },
            eval_of(w),
        )
        .unwrap();
        assert_eq!(out.history.rows.len(), 50);
        assert!(out.history.last_train_loss().unwrap() < 0.5 * out.history.first_train_loss().unwrap());
        let mut csv = Vec::new();
        out.history.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss,accuracy,exact_match\n0,"));
    }

    #[test]
    fn deterministic_given_seed() {
        let run = || {
            let (mut store, w) = quadratic_store();
            let cfg = TrainConfig {
                batch_size: 2,
                ..TrainConfig::new(0.05, 7).with_epochs(20)
            };
            fit(
                &mut store,
                &cfg,
                &[0, 1, 2, 3, 4],
                |tape, s, item| {
                    let v = tape.param(s, w);
                    let v = tape.scale(v, 1.0 + item as f64);
                    let sq = tape.mul(v, v)?;
                    Ok(tape.sum(sq))
                },
                eval_of(w),
            )
            .unwrap()
            .history
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn nan_loss_aborts() {
        let (mut store, w) = quadratic_store();
        let err = fit(
            &mut store,
            &TrainConfig::new(0.1, 0),
            &[0],
            |tape, s, _| {
                let v = tape.param(s, w);
                let v = tape.scale(v, f64::NAN);
                Ok(tape.sum(v))
            },
            eval_of(w),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, .. }));
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let (mut store, w) = quadratic_store();
        let err = fit(
            &mut store,
            &TrainConfig::new(0.1, 0),
            &[],
            |tape, s, _| Ok(tape.param(s, w)),
            eval_of(w),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dataset(_)));
    }

    #[test]
    fn early_stopping_restores_best() {
        let (mut store, w) = quadratic_store();
        let mut cfg = TrainConfig::new(0.1, 0).with_epochs(100);
        cfg.patience = 3;
        let mut calls = 0;
        let out = fit(
            &mut store,
            &cfg,
            &[0],
            |tape, s, _| {
                let v = tape.param(s, w);
                Ok(tape.sum(v))
            },
            |_, _| {
                calls += 1;
                // best at the very first epoch
                Ok(EpochReport {
                    val_loss: calls as f64,
                    metrics: Metrics::default(),
                })
            },
        )
        .unwrap();
        assert_eq!(out.best_epoch, 0);
        assert_eq!(out.history.rows.len(), 4);
        let expected = 3.0 - 0.1;
        assert!((store.value(w).get(0, 0) - expected).abs() < 1e-6);
    }
}
