//! Per-pixel cross-entropy objectives and their logit gradients.
//!
//! The soft objective averages `−Σₗ p̂ˡ log pˡ` over the `h×w` output grid;
//! for simple images the target puts the normalized saliency on the image's
//! class and its complement on background. The hard objective is the same
//! quantity against a one-hot mask.

use crate::data::LabelMap;
use crate::error::{Error, Result};
use crate::saliency::SaliencyMap;
use crate::tensor_grad::{channel_softmax, resize_plane, Tensor};

const LOG_FLOOR: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-9;

fn check_distribution(t: &Tensor) -> Result<[usize; 3]> {
    let [k, h, w] = match *t.shape() {
        [k, h, w] => [k, h, w],
        _ => {
            return Err(Error::invalid(format!(
                "probability map must be [K, h, w], got {:?}",
                t.shape()
            )))
        }
    };
    let plane = h * w;
    for p in 0..plane {
        let mut sum = 0.0;
        for c in 0..k {
            let v = t.data()[c * plane + p];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "per-pixel probabilities sum to {sum}"
            )));
        }
    }
    Ok([k, h, w])
}

/// Predicted per-pixel class distribution, `[C+1, h, w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap(Tensor);

impl ProbMap {
    pub fn new(tensor: Tensor) -> Result<Self> {
        check_distribution(&tensor)?;
        Ok(Self(tensor))
    }

    /// Softmax over the channels of single-image logits `[1, K, h, w]`.
    pub fn from_logits(logits: &Tensor) -> Result<Self> {
        let [n, k, h, w] = logits.dims4()?;
        if n != 1 {
            return Err(Error::invalid(
                "ProbMap::from_logits expects a single image",
            ));
        }
        Self::new(channel_softmax(logits)?.reshape(vec![k, h, w])?)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn num_channels(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn prob(&self, class: usize, y: usize, x: usize) -> f64 {
        let (h, w) = (self.height(), self.width());
        self.0.data()[class * h * w + y * w + x]
    }
}

/// Soft per-pixel supervision, `[C+1, h, w]`, each pixel summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetProbMap(Tensor);

impl TargetProbMap {
    pub fn new(tensor: Tensor) -> Result<Self> {
        check_distribution(&tensor)?;
        Ok(Self(tensor))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    /// One-hot encoding of `mask` over `num_channels` classes.
    pub fn one_hot(mask: &LabelMap, num_channels: usize) -> Result<Self> {
        check_labels(mask, num_channels)?;
        let (h, w) = (mask.height(), mask.width());
        let mut t = Tensor::zeros(&[num_channels, h, w]);
        for (p, &l) in mask.labels().iter().enumerate() {
            t.data_mut()[l as usize * h * w + p] = 1.0;
        }
        Ok(Self(t))
    }
}

fn check_labels(mask: &LabelMap, num_channels: usize) -> Result<()> {
    match mask.labels().iter().find(|&&l| l as usize >= num_channels) {
        Some(l) => Err(Error::invalid(format!(
            "label {l} outside 0..{}",
            num_channels - 1
        ))),
        None => Ok(()),
    }
}

/// Target for a simple image of class `class`: the saliency resized to
/// `h×w` and clamped is the class probability, its complement is background.
pub fn build_simple_target(
    saliency: &SaliencyMap,
    class: u8,
    num_classes: u8,
    h: usize,
    w: usize,
) -> Result<TargetProbMap> {
    if class == 0 || class > num_classes {
        return Err(Error::invalid(format!(
            "class {class} outside 1..={num_classes}"
        )));
    }
    let resized = resize_plane(saliency.values(), saliency.height(), saliency.width(), h, w);
    let plane = h * w;
    let mut t = Tensor::zeros(&[num_classes as usize + 1, h, w]);
    let data = t.data_mut();
    for (p, &s) in resized.iter().enumerate() {
        let s = s.clamp(0.0, 1.0);
        data[class as usize * plane + p] = s;
        data[p] = 1.0 - s;
    }
    Ok(TargetProbMap(t))
}

fn shapes_match(pred: &Tensor, target: &Tensor) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape {
            op: "cross-entropy",
            lhs: pred.shape().to_vec(),
            rhs: target.shape().to_vec(),
        });
    }
    Ok(())
}

/// `−1/(h·w) Σᵢⱼ Σₗ p̂ˡᵢⱼ log pˡᵢⱼ` with `log` floored at `log(1e−12)`.
pub fn multilabel_ce(pred: &ProbMap, target: &TargetProbMap) -> Result<f64> {
    shapes_match(&pred.0, &target.0)?;
    let plane = (pred.height() * pred.width()) as f64;
    let sum: f64 = pred
        .0
        .data()
        .iter()
        .zip(target.0.data())
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| t * p.max(LOG_FLOOR).ln())
        .sum();
    Ok(-sum / plane)
}

/// Loss and `∂L/∂logits = (p − p̂)/(h·w)` for single-image logits
/// `[1, K, h, w]`.
pub fn multilabel_ce_grad(logits: &Tensor, target: &TargetProbMap) -> Result<(f64, Tensor)> {
    let pred = ProbMap::from_logits(logits)?;
    let loss = multilabel_ce(&pred, target)?;
    let plane = (pred.height() * pred.width()) as f64;
    let mut grad = pred.0;
    for (g, &t) in grad.data_mut().iter_mut().zip(target.0.data()) {
        *g = (*g - t) / plane;
    }
    Ok((loss, grad.reshape(logits.shape().to_vec())?))
}

fn check_mask_shape(pred: &ProbMap, mask: &LabelMap) -> Result<()> {
    if (pred.height(), pred.width()) != (mask.height(), mask.width()) {
        return Err(Error::Shape {
            op: "singlelabel_ce",
            lhs: pred.0.shape().to_vec(),
            rhs: vec![mask.height(), mask.width()],
        });
    }
    check_labels(mask, pred.num_channels())
}

/// Mean of `−log p^{g}` over pixels, for a hard mask `g` at `h×w`.
pub fn singlelabel_ce(pred: &ProbMap, mask: &LabelMap) -> Result<f64> {
    check_mask_shape(pred, mask)?;
    let plane = mask.labels().len();
    let sum: f64 = mask
        .labels()
        .iter()
        .enumerate()
        .map(|(p, &l)| pred.0.data()[l as usize * plane + p].max(LOG_FLOOR).ln())
        .sum();
    Ok(-sum / plane as f64)
}

/// Loss and logit gradient of [`singlelabel_ce`].
pub fn singlelabel_ce_grad(logits: &Tensor, mask: &LabelMap) -> Result<(f64, Tensor)> {
    let pred = ProbMap::from_logits(logits)?;
    let loss = singlelabel_ce(&pred, mask)?;
    let plane = mask.labels().len();
    let scale = 1.0 / plane as f64;
    let mut grad = pred.0;
    let data = grad.data_mut();
    data.iter_mut().for_each(|g| *g *= scale);
    for (p, &l) in mask.labels().iter().enumerate() {
        data[l as usize * plane + p] -= scale;
    }
    Ok((loss, grad.reshape(logits.shape().to_vec())?))
}
