use rayon::prelude::*;

use crate::data::{LabelMap, SampleSource};
use crate::error::{Error, Result};
use crate::pseudolabel::argmax_full;
use crate::segnet::{predict, NetworkConfig};
use crate::tensor_grad::ParamSet;

/// Pixel counts indexed by `(ground truth, prediction)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_labels: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_labels: usize) -> Self {
        Self {
            num_labels,
            counts: vec![0; num_labels * num_labels],
        }
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_labels + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.num_labels).map(|p| self.count(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.num_labels).map(|t| self.count(t, predicted)).sum()
    }

    pub fn accumulate(&mut self, truth: &LabelMap, predicted: &LabelMap) -> Result<()> {
        if (truth.height(), truth.width()) != (predicted.height(), predicted.width()) {
            return Err(Error::Shape {
                op: "confusion matrix",
                lhs: vec![truth.height(), truth.width()],
                rhs: vec![predicted.height(), predicted.width()],
            });
        }
        let k = self.num_labels;
        for (&t, &p) in truth.labels().iter().zip(predicted.labels()) {
            if t as usize >= k || p as usize >= k {
                return Err(Error::invalid(format!(
                    "label pair ({t}, {p}) outside 0..{}",
                    k - 1
                )));
            }
            self.counts[t as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    /// `TP / (TP + FP + FN)` per class; 1 for a class absent from both
    /// ground truth and prediction.
    pub fn per_class_iou(&self) -> Vec<f64> {
        (0..self.num_labels)
            .map(|c| {
                let tp = self.count(c, c);
                let union = self.row_sum(c) + self.col_sum(c) - tp;
                if union == 0 {
                    1.0
                } else {
                    tp as f64 / union as f64
                }
            })
            .collect()
    }

    pub fn mean_iou(&self) -> f64 {
        let ious = self.per_class_iou();
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub per_class_iou: Vec<f64>,
    pub miou: f64,
}

impl Evaluation {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let per_class_iou = confusion.per_class_iou();
        let miou = per_class_iou.iter().sum::<f64>() / per_class_iou.len() as f64;
        Self {
            confusion,
            per_class_iou,
            miou,
        }
    }
}

/// Scores mask pairs `(ground truth, prediction)` over `num_labels` classes.
pub fn evaluate_masks<'a>(
    pairs: impl IntoIterator<Item = (&'a LabelMap, &'a LabelMap)>,
    num_labels: usize,
) -> Result<Evaluation> {
    let mut cm = ConfusionMatrix::new(num_labels);
    for (truth, predicted) in pairs {
        cm.accumulate(truth, predicted)?;
    }
    Ok(Evaluation::from_confusion(cm))
}

/// Full-resolution argmax predictions scored against every record's
/// ground-truth mask, accumulated over the whole set.
pub fn evaluate(
    params: &ParamSet,
    net: &NetworkConfig,
    data: &dyn SampleSource,
) -> Result<Evaluation> {
    let predictions: Vec<(LabelMap, LabelMap)> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let truth = data.gt_mask(i).ok_or_else(|| {
                Error::invalid("missing ground-truth mask").in_record(data.name(i))
            })?;
            let pred =
                predict(params, net, data.image(i)).map_err(|e| e.in_record(data.name(i)))?;
            Ok((truth.clone(), argmax_full(&pred)))
        })
        .collect::<Result<_>>()?;
    evaluate_masks(
        predictions.iter().map(|(t, p)| (t, p)),
        net.output_channels(),
    )
}
