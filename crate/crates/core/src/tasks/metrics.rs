use serde::Serialize;

use crate::tensor::Tensor;
use crate::{Error, Result};

/// How reconstruction targets are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Real-valued features; MSE loss and metric.
    Continuous,
    /// One-hot features; cross-entropy loss, argmax decoding.
    Categorical,
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Self::Continuous),
            "categorical" => Ok(Self::Categorical),
            other => Err(Error::Invalid(format!(
                "unknown target kind {other:?} (expected continuous or categorical)"
            ))),
        }
    }
}

/// Evaluation summary. Continuous tasks fill `mse` only; categorical tasks
/// fill `accuracy` and `exact_match`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub mse: Option<f64>,
    pub accuracy: Option<f64>,
    pub exact_match: Option<f64>,
}

/// Mean squared error over every entry of every pair.
pub fn mse(pairs: &[(&Tensor, &Tensor)]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pred, target) in pairs {
        if pred.shape() != target.shape() {
            return Err(Error::Invalid(format!(
                "prediction {:?} against target {:?}",
                pred.shape(),
                target.shape()
            )));
        }
        sum += pred
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
        count += pred.len();
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Label-level accuracy and per-graph exact match. Each item holds the
/// predicted and true labels of every scored node and edge of one graph.
pub fn categorical(graphs: &[(Vec<usize>, Vec<usize>)]) -> Result<Metrics> {
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut exact = 0usize;
    for (pred, truth) in graphs {
        if pred.len() != truth.len() {
            return Err(Error::Invalid(format!(
                "{} predicted labels for {} targets",
                pred.len(),
                truth.len()
            )));
        }
        let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
        correct += hits;
        total += truth.len();
        exact += usize::from(hits == truth.len());
    }
    let frac = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(Metrics {
        mse: None,
        accuracy: Some(frac(correct, total)),
        exact_match: Some(frac(exact, graphs.len())),
    })
}

/// Scores outputs against targets, one `(outputs, targets)` list per graph
/// (for example node and edge blocks).
pub fn evaluate_outputs(graphs: &[Vec<(Tensor, Tensor)>], kind: TargetKind) -> Result<Metrics> {
    match kind {
        TargetKind::Continuous => {
            let pairs: Vec<(&Tensor, &Tensor)> =
                graphs.iter().flatten().map(|(p, t)| (p, t)).collect();
            Ok(Metrics {
                mse: Some(mse(&pairs)?),
                ..Metrics::default()
            })
        }
        TargetKind::Categorical => {
            let labels: Vec<(Vec<usize>, Vec<usize>)> = graphs
                .iter()
                .map(|blocks| {
                    let mut pred = Vec::new();
                    let mut truth = Vec::new();
                    for (p, t) in blocks {
                        pred.extend(p.argmax_rows());
                        truth.extend(t.argmax_rows());
                    }
                    (pred, truth)
                })
                .collect();
            categorical(&labels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_outputs() {
        let t = Tensor::from_nested(&[[0.0, 1.0], [1.0, 0.0]]);
        let m = evaluate_outputs(&[vec![(t.clone(), t.clone())]], TargetKind::Categorical).unwrap();
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(m.exact_match, Some(1.0));
        assert_eq!(m.mse, None);
    }

    #[test]
    fn one_wrong_edge_in_one_of_two_graphs() {
        let graphs = vec![(vec![0, 1, 2], vec![0, 1, 2]), (vec![0, 1, 1], vec![0, 1, 2])];
        let m = categorical(&graphs).unwrap();
        assert_eq!(m.exact_match, Some(0.5));
        assert!(m.accuracy.unwrap() < 1.0);
        assert!((m.accuracy.unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn continuous_reports_mse_only() {
        let p = Tensor::from_nested(&[[1.0, 2.0]]);
        let t = Tensor::from_nested(&[[0.0, 4.0]]);
        let m = evaluate_outputs(&[vec![(p, t)]], TargetKind::Continuous).unwrap();
        assert_eq!(m.mse, Some(2.5));
        assert_eq!(m.accuracy, None);
        assert_eq!(m.exact_match, None);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = Tensor::zeros(1, 2);
        let t = Tensor::zeros(2, 1);
        assert!(mse(&[(&p, &t)]).is_err());
    }

    #[test]
    fn kind_parses() {
        assert_eq!("categorical".parse::<TargetKind>().unwrap(), TargetKind::Categorical);
        assert!("colour".parse::<TargetKind>().is_err());
    }
}
