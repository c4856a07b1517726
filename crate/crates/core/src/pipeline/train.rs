use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TrainConfig;
use crate::data::{Image, LabelMap};
use crate::error::{Error, Result};
use crate::losses::{build_simple_target, multilabel_ce_grad, singlelabel_ce_grad};
use crate::saliency::SaliencyMap;
use crate::segnet::{backward, forward_cached, NetworkConfig, HEAD_BIAS, HEAD_WEIGHT};
use crate::tensor_grad::{sgd_step_scaled, ParamSet, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Initial,
    Enhanced,
    Powerful,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Initial, Stage::Enhanced, Stage::Powerful];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::Enhanced => "enhanced",
            Stage::Powerful => "powerful",
        }
    }

    pub fn index(self) -> u64 {
        match self {
            Stage::Initial => 0,
            Stage::Enhanced => 1,
            Stage::Powerful => 2,
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }
}

/// What a training image is supervised with.
#[derive(Clone, Copy, Debug)]
pub enum Supervision<'a> {
    /// Soft target from a saliency map and the image's single class.
    Saliency { map: &'a SaliencyMap, class: u8 },
    /// Hard pseudo-label mask at image resolution.
    Mask(&'a LabelMap),
}

#[derive(Clone, Copy, Debug)]
pub struct TrainItem<'a> {
    pub image: &'a Image,
    pub supervision: Supervision<'a>,
}

fn check_supervision(stage: Stage, items: &[TrainItem]) -> Result<()> {
    for (i, item) in items.iter().enumerate() {
        let ok = matches!(
            (stage, item.supervision),
            (Stage::Initial, Supervision::Saliency { .. })
                | (Stage::Enhanced | Stage::Powerful, Supervision::Mask(_))
        );
        if !ok {
            return Err(Error::invalid(format!(
                "item {i}: {} stage cannot train on {} supervision",
                stage.name(),
                match item.supervision {
                    Supervision::Saliency { .. } => "saliency",
                    Supervision::Mask(_) => "mask",
                }
            )));
        }
    }
    Ok(())
}

/// Loss and parameter gradients for one cropped example.
fn example_gradients(
    params: &ParamSet,
    net: &NetworkConfig,
    item: &TrainItem,
    (top, left): (usize, usize),
    crop: usize,
) -> Result<(f64, Vec<Tensor>)> {
    let image = item.image.crop(top, left, crop, crop)?;
    let cache = forward_cached(params, net, &image.to_tensor())?;
    let [_, _, h, w] = cache.logits.dims4()?;
    let (loss, grad) = match item.supervision {
        Supervision::Saliency { map, class } => {
            let target = build_simple_target(
                &map.crop(top, left, crop, crop)?,
                class,
                net.num_classes,
                h,
                w,
            )?;
            multilabel_ce_grad(&cache.logits, &target)?
        }
        Supervision::Mask(mask) => {
            let small = mask.crop(top, left, crop, crop)?.resize_nearest(h, w);
            singlelabel_ce_grad(&cache.logits, &small)?
        }
    };
    let grads = backward(params, net, &cache, &grad)?;
    Ok((loss, grads))
}

/// Mini-batch momentum SGD over `items` with random square crops.
///
/// Returns the trained parameters and the mean per-example loss of every
/// epoch. The run is a deterministic function of its inputs and `config.seed`;
/// per-example work may run in parallel but gradients are reduced in batch
/// order.
pub fn train_stage(
    mut params: ParamSet,
    net: &NetworkConfig,
    items: &[TrainItem],
    stage: Stage,
    config: &TrainConfig,
) -> Result<(ParamSet, Vec<f64>)> {
    config.validate()?;
    check_supervision(stage, items)?;
    if !config.crop_size.is_multiple_of(net.stride()) {
        return Err(Error::invalid(format!(
            "crop size {} not divisible by network stride {}",
            config.crop_size,
            net.stride()
        )));
    }
    for (i, item) in items.iter().enumerate() {
        if item.image.height() < config.crop_size || item.image.width() < config.crop_size {
            return Err(Error::invalid(format!(
                "item {i}: image {}x{} smaller than crop {}",
                item.image.height(),
                item.image.width(),
                config.crop_size
            )));
        }
    }
    if items.is_empty() || config.epochs == 0 {
        return Ok((params, Vec::new()));
    }

    params.zero_grads();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let crop = config.crop_size;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let lr = config.lr_at_epoch(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let jobs: Vec<(usize, (usize, usize))> = batch
                .iter()
                .map(|&i| {
                    let img = items[i].image;
                    let top = rng.random_range(0..=img.height() - crop);
                    let left = rng.random_range(0..=img.width() - crop);
                    (i, (top, left))
                })
                .collect();
            let results: Vec<(f64, Vec<Tensor>)> = jobs
                .par_iter()
                .map(|&(i, offset)| example_gradients(&params, net, &items[i], offset, crop))
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for (loss, grads) in &results {
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { step });
                }
                batch_loss += loss;
                let scaled: Vec<Tensor> = grads.iter().map(|g| g.scale(scale)).collect();
                params.accumulate_grads(&scaled)?;
            }
            loss_sum += batch_loss;
            let head_mult = config.final_layer_lr_multiplier;
            sgd_step_scaled(
                &mut params,
                lr,
                config.momentum,
                config.weight_decay,
                |name| {
                    if name == HEAD_WEIGHT || name == HEAD_BIAS {
                        head_mult
                    } else {
                        1.0
                    }
                },
            )?;
            step += 1;
        }
        epoch_losses.push(loss_sum / items.len() as f64);
    }
    Ok((params, epoch_losses))
}
