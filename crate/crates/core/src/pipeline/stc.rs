//! The three-stage simple-to-complex procedure.
//!
//! 1. `initial`: trained on simple images against saliency-derived soft
//!    targets.
//! 2. `enhanced`: trained on simple images against the initial network's
//!    masks, each restricted to `{0, c}`.
//! 3. `powerful`: trained on complex images against the enhanced network's
//!    masks restricted to the image labels plus background, and by default
//!    also on the enhanced network's simple-image masks.
//!
//! Training only reads images, image-level labels and saliency from its
//! sources; ground-truth masks are read from the evaluation source alone.

use std::time::Instant;

use rayon::prelude::*;

use super::train::{train_stage, Stage, Supervision, TrainItem};
use super::{evaluate, RunReport, StageReport, StcConfig, TrainConfig};
use crate::data::synth::derive_seed;
use crate::data::{LabelMap, SampleSource};
use crate::error::{Error, Result};
use crate::pseudolabel::{relabel_complex, relabel_simple};
use crate::saliency::{compute_saliency, SaliencyMap};
use crate::segnet::{init_network, NetworkConfig};
use crate::tensor_grad::ParamSet;

const NETWORK_SEED_STREAM: u64 = 10;
const TRAIN_SEED_STREAM: u64 = 20;

/// A pseudo-label mask tagged with its record name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedMask {
    pub name: String,
    pub mask: LabelMap,
}

/// A trained network and its evaluation.
#[derive(Clone, Debug)]
pub struct TrainedStage {
    pub stage: Stage,
    pub network: NetworkConfig,
    pub params: ParamSet,
    pub report: StageReport,
}

#[derive(Clone, Debug)]
pub struct StcOutcome {
    /// In order: initial, enhanced, powerful.
    pub stages: Vec<TrainedStage>,
    /// Simple-image masks from the initial network.
    pub masks_initial: Vec<NamedMask>,
    /// Masks from the enhanced network used to train the powerful stage.
    pub masks_enhanced: Vec<NamedMask>,
    pub report: RunReport,
}

impl StcOutcome {
    pub fn stage(&self, stage: Stage) -> &TrainedStage {
        &self.stages[stage.index() as usize]
    }
}

pub fn network_for(stage: Stage, config: &StcConfig) -> NetworkConfig {
    NetworkConfig {
        num_classes: config.num_classes,
        channels: config.channels.clone(),
        kernel_size: config.kernel_size,
        seed: derive_seed(config.train.seed, NETWORK_SEED_STREAM, stage.index()),
    }
}

fn train_config_for(stage: Stage, round: usize, config: &StcConfig) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(
            config.train.seed,
            TRAIN_SEED_STREAM + round as u64,
            stage.index(),
        ),
        ..config.train.clone()
    }
}

/// Stored saliency where present, computed otherwise.
pub fn saliency_maps(source: &dyn SampleSource) -> Vec<SaliencyMap> {
    (0..source.len())
        .into_par_iter()
        .map(|i| {
            source
                .saliency(i)
                .cloned()
                .unwrap_or_else(|| compute_saliency(source.image(i)))
        })
        .collect()
}

fn single_class(source: &dyn SampleSource, i: usize) -> Result<u8> {
    match source.labels(i).classes() {
        [c] => Ok(*c),
        other => Err(Error::invalid(format!(
            "simple image needs exactly one label, got {other:?}"
        ))
        .in_record(source.name(i))),
    }
}

pub fn relabel_simple_all(
    params: &ParamSet,
    net: &NetworkConfig,
    source: &dyn SampleSource,
) -> Result<Vec<NamedMask>> {
    (0..source.len())
        .into_par_iter()
        .map(|i| {
            let class = single_class(source, i)?;
            let mask = relabel_simple(params, net, source.image(i), class)
                .map_err(|e| e.in_record(source.name(i)))?;
            Ok(NamedMask {
                name: source.name(i).to_string(),
                mask,
            })
        })
        .collect()
}

pub fn relabel_complex_all(
    params: &ParamSet,
    net: &NetworkConfig,
    source: &dyn SampleSource,
) -> Result<Vec<NamedMask>> {
    (0..source.len())
        .into_par_iter()
        .map(|i| {
            let mask = relabel_complex(params, net, source.image(i), source.labels(i))
                .map_err(|e| e.in_record(source.name(i)))?;
            Ok(NamedMask {
                name: source.name(i).to_string(),
                mask,
            })
        })
        .collect()
}

fn starting_params(
    net: &NetworkConfig,
    previous: &ParamSet,
    config: &StcConfig,
) -> Result<ParamSet> {
    if !config.warm_start {
        return init_network(net);
    }
    let mut fresh = ParamSet::new();
    for (name, p) in previous.iter() {
        fresh.insert(name, p.value.clone());
    }
    Ok(fresh)
}

fn finish_stage(
    stage: Stage,
    network: NetworkConfig,
    params: ParamSet,
    epoch_losses: Vec<f64>,
    eval: &dyn SampleSource,
    started: Instant,
) -> Result<TrainedStage> {
    let evaluation = evaluate(&params, &network, eval)?;
    Ok(TrainedStage {
        stage,
        network,
        params,
        report: StageReport {
            stage: stage.name().to_string(),
            epoch_losses,
            per_class_iou: evaluation.per_class_iou,
            miou: evaluation.miou,
            seconds: started.elapsed().as_secs_f64(),
        },
    })
}

fn mask_items<'a>(
    source: &'a dyn SampleSource,
    masks: &'a [NamedMask],
) -> impl Iterator<Item = TrainItem<'a>> {
    masks.iter().enumerate().map(move |(i, m)| TrainItem {
        image: source.image(i),
        supervision: Supervision::Mask(&m.mask),
    })
}

/// Trains the initial network from saliency soft targets.
pub fn run_initial(
    simple: &dyn SampleSource,
    eval: &dyn SampleSource,
    config: &StcConfig,
) -> Result<TrainedStage> {
    let stage = Stage::Initial;
    let started = Instant::now();
    let run = || -> Result<TrainedStage> {
        let maps = saliency_maps(simple);
        let items = (0..simple.len())
            .map(|i| {
                Ok(TrainItem {
                    image: simple.image(i),
                    supervision: Supervision::Saliency {
                        map: &maps[i],
                        class: single_class(simple, i)?,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = network_for(stage, config);
        let params = init_network(&net)?;
        let (params, losses) = train_stage(
            params,
            &net,
            &items,
            stage,
            &train_config_for(stage, 0, config),
        )?;
        finish_stage(stage, net, params, losses, eval, started)
    };
    run().map_err(|e| e.in_stage(stage.name()))
}

/// Relabels simple images with the initial network and trains the enhanced
/// network. Returns the stage and the masks produced by the initial network.
pub fn run_enhanced(
    simple: &dyn SampleSource,
    eval: &dyn SampleSource,
    (initial_params, initial_net): (&ParamSet, &NetworkConfig),
    config: &StcConfig,
) -> Result<(TrainedStage, Vec<NamedMask>)> {
    let stage = Stage::Enhanced;
    let started = Instant::now();
    let run = || -> Result<(TrainedStage, Vec<NamedMask>)> {
        if config.enhanced_rounds == 0 {
            return Err(Error::invalid("enhanced_rounds must be at least 1"));
        }
        let net = network_for(stage, config);
        let first_masks = relabel_simple_all(initial_params, initial_net, simple)?;
        let mut masks = first_masks.clone();
        let mut outcome: Option<TrainedStage> = None;
        for round in 0..config.enhanced_rounds {
            let previous = match &outcome {
                Some(prev) => {
                    masks = relabel_simple_all(&prev.params, &prev.network, simple)?;
                    &prev.params
                }
                None => initial_params,
            };
            let items: Vec<_> = mask_items(simple, &masks).collect();
            let params = starting_params(&net, previous, config)?;
            let (params, losses) = train_stage(
                params,
                &net,
                &items,
                stage,
                &train_config_for(stage, round, config),
            )?;
            outcome = Some(finish_stage(
                stage,
                net.clone(),
                params,
                losses,
                eval,
                started,
            )?);
        }
        Ok((outcome.expect("at least one round"), first_masks))
    };
    run().map_err(|e| e.in_stage(stage.name()))
}

/// Relabels complex (and optionally simple) images with the enhanced network
/// and trains the powerful network. Returns the stage and the masks it
/// trained on.
pub fn run_powerful(
    simple: &dyn SampleSource,
    complex: &dyn SampleSource,
    eval: &dyn SampleSource,
    (enhanced_params, enhanced_net): (&ParamSet, &NetworkConfig),
    config: &StcConfig,
) -> Result<(TrainedStage, Vec<NamedMask>)> {
    let stage = Stage::Powerful;
    let started = Instant::now();
    let run = || -> Result<(TrainedStage, Vec<NamedMask>)> {
        let net = network_for(stage, config);
        let complex_masks = relabel_complex_all(enhanced_params, enhanced_net, complex)?;
        let simple_masks = if config.powerful_includes_simple {
            relabel_simple_all(enhanced_params, enhanced_net, simple)?
        } else {
            Vec::new()
        };
        let items: Vec<_> = mask_items(complex, &complex_masks)
            .chain(mask_items(simple, &simple_masks))
            .collect();
        let params = starting_params(&net, enhanced_params, config)?;
        let (params, losses) = train_stage(
            params,
            &net,
            &items,
            stage,
            &train_config_for(stage, 0, config),
        )?;
        let trained = finish_stage(stage, net, params, losses, eval, started)?;
        let mut masks = complex_masks;
        masks.extend(simple_masks);
        Ok((trained, masks))
    };
    run().map_err(|e| e.in_stage(stage.name()))
}

/// Runs all three stages and evaluates each on `eval`.
pub fn run_stc(
    simple: &dyn SampleSource,
    complex: &dyn SampleSource,
    eval: &dyn SampleSource,
    config: &StcConfig,
) -> Result<StcOutcome> {
    config.train.validate()?;
    if simple.is_empty() {
        return Err(Error::invalid(
            "the initial stage needs at least one simple image",
        ));
    }
    let initial = run_initial(simple, eval, config)?;
    let (enhanced, masks_initial) =
        run_enhanced(simple, eval, (&initial.params, &initial.network), config)?;
    let (powerful, masks_enhanced) = run_powerful(
        simple,
        complex,
        eval,
        (&enhanced.params, &enhanced.network),
        config,
    )?;
    let stages = vec![initial, enhanced, powerful];
    let report = RunReport {
        seed: config.train.seed,
        num_classes: config.num_classes,
        stages: stages.iter().map(|s| s.report.clone()).collect(),
    };
    Ok(StcOutcome {
        stages,
        masks_initial,
        masks_enhanced,
        report,
    })
}
