//! Checkpoint evaluation: accuracy and a K x K confusion matrix.
//! Weights are immutable here, so prediction shards across threads; the
//! tallied counts are order-independent and thus deterministic.

use std::fmt;
use std::path::Path;

use crate::autograd::Tape;
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};

use super::config::RunConfig;
use super::manifest::Manifest;
use super::train::{load_dataset, load_pipeline, Pipeline};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    /// Row = true label, column = predicted label.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        let trace: usize = self.confusion.iter().enumerate().map(|(i, row)| row[i]).sum();
        trace as f64 / self.total as f64
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.confusion.len();
        write!(f, "{:>6}", "t\\p")?;
        for j in 0..k {
            write!(f, "{j:>6}")?;
        }
        writeln!(f)?;
        for (i, row) in self.confusion.iter().enumerate() {
            write!(f, "{i:>6}")?;
            for &n in row {
                write!(f, "{n:>6}")?;
            }
            writeln!(f)?;
        }
        write!(f, "accuracy {:.4} over {} examples", self.accuracy(), self.total)
    }
}

/// Counts predictions against truth. Labels must already be validated.
pub fn tally(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<EvalReport> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(Error::Contract(format!(
            "{} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in preds.iter().zip(labels) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::Contract(format!(
                "label {t} / prediction {p} out of range for {num_classes} classes"
            )));
        }
        confusion[t][p] += 1;
    }
    Ok(EvalReport { confusion, total: preds.len() })
}

fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn predict_chunk<T: Real>(model: &Pipeline<T>, images: &[QTensor<T>]) -> Result<Vec<usize>> {
    images
        .iter()
        .map(|img| {
            let tape = Tape::new();
            let logits = model.logits(&tape, img)?;
            Ok(argmax(logits.value().data()))
        })
        .collect()
}

pub fn predict_all<T: Real>(model: &Pipeline<T>, images: &[QTensor<T>]) -> Result<Vec<usize>> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(images.len())
        .max(1);
    if workers == 1 {
        return predict_chunk(model, images);
    }
    let chunk = images.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = images
            .chunks(chunk)
            .map(|part| s.spawn(move || predict_chunk(model, part)))
            .collect();
        let mut out = Vec::with_capacity(images.len());
        for h in handles {
            out.extend(h.join().expect("prediction worker panicked")?);
        }
        Ok(out)
    })
}

pub fn evaluate<T: Real>(
    model: &Pipeline<T>,
    cfg: &RunConfig,
    manifest_path: impl AsRef<Path>,
) -> Result<EvalReport> {
    let manifest = Manifest::read(manifest_path)?;
    manifest.validate(cfg.model.num_classes)?;
    let (images, labels) = load_dataset::<T>(&manifest, cfg)?;
    let preds = predict_all(model, &images)?;
    tally(&preds, &labels, cfg.model.num_classes)
}

pub fn evaluate_checkpoint<T: Real>(
    checkpoint: impl AsRef<Path>,
    manifest_path: impl AsRef<Path>,
) -> Result<EvalReport> {
    let (cfg, _, model): (_, _, Pipeline<T>) = load_pipeline(checkpoint)?;
    evaluate(&model, &cfg, manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_yields_identity_pattern() {
        let labels = [0, 1, 2, 1, 0, 2];
        let report = tally(&labels, &labels, 3).unwrap();
        assert_eq!(report.accuracy(), 1.0);
        for (i, row) in report.confusion.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                if i == j {
                    assert_eq!(n, labels.iter().filter(|&&l| l == i).count());
                } else {
                    assert_eq!(n, 0);
                }
            }
        }
    }

    #[test]
    fn constant_predictor_fills_one_column() {
        let labels = [0, 1, 2, 2];
        let preds = [2, 2, 2, 2];
        let report = tally(&preds, &labels, 3).unwrap();
        assert_eq!(report.accuracy(), 0.5);
        for row in &report.confusion {
            assert_eq!(row[0] + row[1], 0);
        }
        let col: usize = report.confusion.iter().map(|r| r[2]).sum();
        assert_eq!(col, 4);
    }

    #[test]
    fn entries_sum_to_total_and_labels_are_checked() {
        let report = tally(&[0, 1, 1], &[1, 1, 0], 2).unwrap();
        let sum: usize = report.confusion.iter().flatten().sum();
        assert_eq!(sum, report.total);
        assert!(tally(&[5], &[0], 2).is_err());
        assert!(tally(&[], &[], 2).is_err());
    }

    #[test]
    fn report_prints_matrix_and_accuracy() {
        let report = tally(&[0, 1], &[0, 0], 2).unwrap();
        let text = report.to_string();
        assert!(text.contains("accuracy 0.5000 over 2 examples"), "{text}");
    }
}
