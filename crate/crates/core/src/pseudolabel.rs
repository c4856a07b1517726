//! Pseudo-label masks from network predictions.
//!
//! The per-pixel argmax can be restricted to a subset of classes: `{0, c}` for
//! a simple image of class `c`, or the image-level labels plus background for
//! a complex image. Ties go to the smallest label.

use std::collections::BTreeSet;

use crate::data::{Image, ImageLabelSet, LabelMap};
use crate::error::{Error, Result};
use crate::losses::ProbMap;
use crate::segnet::{predict, NetworkConfig};
use crate::tensor_grad::ParamSet;

fn argmax_over(pred: &ProbMap, classes: &[usize]) -> LabelMap {
    let (h, w) = (pred.height(), pred.width());
    let plane = h * w;
    let data = pred.tensor().data();
    let labels = (0..plane)
        .map(|p| {
            let mut best = classes[0];
            let mut best_p = data[best * plane + p];
            for &k in &classes[1..] {
                let v = data[k * plane + p];
                if v > best_p {
                    best = k;
                    best_p = v;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(h, w, labels).expect("dims from prob map")
}

/// Per-pixel argmax over every class.
pub fn argmax_full(pred: &ProbMap) -> LabelMap {
    let all: Vec<usize> = (0..pred.num_channels()).collect();
    argmax_over(pred, &all)
}

/// Per-pixel argmax over `allowed` only. Background must be allowed.
pub fn argmax_restricted(pred: &ProbMap, allowed: &BTreeSet<u8>) -> Result<LabelMap> {
    if !allowed.contains(&0) {
        return Err(Error::invalid(format!(
            "allowed label set {allowed:?} must contain background"
        )));
    }
    if let Some(&l) = allowed.iter().find(|&&l| l as usize >= pred.num_channels()) {
        return Err(Error::invalid(format!(
            "allowed label {l} outside 0..{}",
            pred.num_channels() - 1
        )));
    }
    let classes: Vec<usize> = allowed.iter().map(|&l| l as usize).collect();
    Ok(argmax_over(pred, &classes))
}

/// Mask for a simple image of class `class`, restricted to `{0, class}`.
pub fn relabel_simple(
    params: &ParamSet,
    config: &NetworkConfig,
    image: &Image,
    class: u8,
) -> Result<LabelMap> {
    if class == 0 || class > config.num_classes {
        return Err(Error::invalid(format!(
            "class {class} outside 1..={}",
            config.num_classes
        )));
    }
    let pred = predict(params, config, image)?;
    argmax_restricted(&pred, &BTreeSet::from([0, class]))
}

/// Mask for a complex image, restricted to its labels plus background.
pub fn relabel_complex(
    params: &ParamSet,
    config: &NetworkConfig,
    image: &Image,
    labels: &ImageLabelSet,
) -> Result<LabelMap> {
    let pred = predict(params, config, image)?;
    argmax_restricted(&pred, &labels.with_background())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_grad::Tensor;

    fn one_pixel(probs: &[f64]) -> ProbMap {
        ProbMap::new(Tensor::new(vec![probs.len(), 1, 1], probs.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn full_argmax_and_ties() {
        assert_eq!(argmax_full(&one_pixel(&[0.2, 0.5, 0.3])).labels(), &[1]);
        assert_eq!(argmax_full(&one_pixel(&[0.5, 0.5, 0.0])).labels(), &[0]);
        assert_eq!(argmax_full(&one_pixel(&[0.1, 0.45, 0.45])).labels(), &[1]);
    }

    #[test]
    fn restriction_excludes_higher_class() {
        let p = one_pixel(&[0.2, 0.5, 0.3]);
        let m = argmax_restricted(&p, &BTreeSet::from([0, 2])).unwrap();
        assert_eq!(m.labels(), &[2]);
    }

    #[test]
    fn invalid_allowed_sets() {
        let p = one_pixel(&[0.2, 0.5, 0.3]);
        assert!(argmax_restricted(&p, &BTreeSet::new()).is_err());
        assert!(argmax_restricted(&p, &BTreeSet::from([1, 2])).is_err());
        assert!(argmax_restricted(&p, &BTreeSet::from([0, 3])).is_err());
    }
}
