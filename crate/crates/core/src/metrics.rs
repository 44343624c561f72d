//! Confusion-matrix construction and the four evaluation metrics
//! (accuracy, precision, recall, F1) with selectable multiclass averaging.

use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Per-class one-vs-rest confusion counts over a prediction/truth pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    per_class: Vec<ClassCounts>,
    total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Equal weight per class.
    #[default]
    Macro,
    /// Classes weighted by true support.
    Weighted,
    /// Binary mode: report class 1 only.
    PositiveClass,
}

/// A metric value plus the classes whose per-class denominator was zero
/// (their contribution is defined as 0 rather than NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub value: f64,
    pub undefined_classes: Vec<usize>,
}

impl ConfusionCounts {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn class(&self, c: usize) -> ClassCounts {
        self.per_class[c]
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.total == 0 {
            return Err(Error::Input("metrics on empty confusion counts".into()));
        }
        Ok(())
    }
}

/// One-vs-rest confusion counts for `num_classes` classes.
pub fn confusion(
    predictions: &[usize],
    truths: &[usize],
    num_classes: usize,
) -> Result<ConfusionCounts> {
    if predictions.len() != truths.len() {
        return Err(Error::Input(format!(
            "prediction count {} != truth count {}",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("confusion on empty input".into()));
    }
    if let Some(&bad) = predictions
        .iter()
        .chain(truths)
        .find(|&&v| v >= num_classes)
    {
        return Err(Error::Input(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    let mut per_class = vec![ClassCounts::default(); num_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        for (c, counts) in per_class.iter_mut().enumerate() {
            match (p == c, t == c) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, true) => counts.fn_ += 1,
                (false, false) => counts.tn += 1,
            }
        }
    }
    Ok(ConfusionCounts {
        per_class,
        total: predictions.len(),
    })
}

/// Overall correctness: correctly classified examples over total.
pub fn accuracy(counts: &ConfusionCounts) -> Result<f64> {
    counts.check_nonempty()?;
    let correct: usize = counts.per_class.iter().map(|c| c.tp).sum();
    Ok(correct as f64 / counts.total as f64)
}

fn averaged<F>(counts: &ConfusionCounts, averaging: Averaging, per_class: F) -> Result<Metric>
where
    F: Fn(ClassCounts) -> (f64, bool),
{
    counts.check_nonempty()?;
    let mut undefined = Vec::new();
    let values: Vec<f64> = counts
        .per_class
        .iter()
        .enumerate()
        .map(|(c, &cc)| {
            let (v, ok) = per_class(cc);
            if !ok {
                undefined.push(c);
            }
            v
        })
        .collect();
    let value = match averaging {
        Averaging::Macro => values.iter().sum::<f64>() / values.len() as f64,
        Averaging::Weighted => {
            let mut acc = 0.0;
            for (c, &v) in values.iter().enumerate() {
                let support = counts.per_class[c].tp + counts.per_class[c].fn_;
                acc += v * support as f64;
            }
            acc / counts.total as f64
        }
        Averaging::PositiveClass => {
            if counts.num_classes() != 2 {
                return Err(Error::Input(format!(
                    "positive-class averaging needs 2 classes, have {}",
                    counts.num_classes()
                )));
            }
            values[1]
        }
    };
    Ok(Metric {
        value,
        undefined_classes: undefined,
    })
}

/// TP / (TP + FP) per class, averaged.
pub fn precision(counts: &ConfusionCounts, averaging: Averaging) -> Result<Metric> {
    averaged(counts, averaging, |c| {
        let denom = c.tp + c.fp;
        if denom == 0 {
            (0.0, false)
        } else {
            (c.tp as f64 / denom as f64, true)
        }
    })
}

/// TP / (TP + FN) per class, averaged.
pub fn recall(counts: &ConfusionCounts, averaging: Averaging) -> Result<Metric> {
    averaged(counts, averaging, |c| {
        let denom = c.tp + c.fn_;
        if denom == 0 {
            (0.0, false)
        } else {
            (c.tp as f64 / denom as f64, true)
        }
    })
}

/// Harmonic mean of per-class precision and recall, averaged. Defined as 0
/// for classes where precision + recall is 0.
pub fn f1(counts: &ConfusionCounts, averaging: Averaging) -> Result<Metric> {
    averaged(counts, averaging, |c| {
        let p_denom = c.tp + c.fp;
        let r_denom = c.tp + c.fn_;
        if p_denom == 0 || r_denom == 0 {
            return (0.0, false);
        }
        let p = c.tp as f64 / p_denom as f64;
        let r = c.tp as f64 / r_denom as f64;
        if p + r == 0.0 {
            (0.0, true)
        } else {
            (2.0 * p * r / (p + r), true)
        }
    })
}

/// Convenience bundle of the four metrics for one prediction/truth pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn evaluate(
    predictions: &[usize],
    truths: &[usize],
    num_classes: usize,
    averaging: Averaging,
) -> Result<MetricsReport> {
    let counts = confusion(predictions, truths, num_classes)?;
    Ok(MetricsReport {
        accuracy: accuracy(&counts)?,
        precision: precision(&counts, averaging)?.value,
        recall: recall(&counts, averaging)?.value,
        f1: f1(&counts, averaging)?.value,
    })
}
