//! Command-line surface: argument types, the run config file and one
//! function per subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{
    generate_corpus, read_dataset, write_dataset, write_label_map, CorpusSizes, DatasetManifest,
    Sample, SampleSource, Split, Splits, SynthWorld,
};
use crate::error::{Error, Result};
use crate::pipeline::{
    evaluate, run_enhanced, run_initial, run_powerful, run_stc, saliency_maps, Evaluation,
    NamedMask, RunReport, Stage, StcConfig, TrainConfig, TrainedStage,
};
use crate::segnet::NetworkConfig;
use crate::tensor_grad::ParamSet;

#[derive(Debug, Parser)]
#[command(
    name = "stc",
    version,
    about = "Simple-to-complex weakly supervised segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a manifest.
    Gen(GenArgs),
    /// Compute and store saliency maps for the simple images of a dataset.
    Saliency(SaliencyArgs),
    /// Run all three stages and write checkpoints, reports and masks.
    Run(RunArgs),
    /// Run one stage, optionally from a previous stage's checkpoint.
    Stage(StageArgs),
    /// Evaluate a checkpoint on the eval split of a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub classes: u8,
    #[arg(long, default_value_t = 200)]
    pub simple: usize,
    #[arg(long, default_value_t = 100)]
    pub complex: usize,
    #[arg(long, default_value_t = 50)]
    pub eval: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON run config; every key is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write wall-clock seconds into the reports.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    /// One of initial, enhanced, powerful.
    #[arg(long, value_parser = parse_stage)]
    pub stage: Stage,
    /// Checkpoint of the previous stage (required for enhanced and powerful).
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint file; the network config is read from the `.json` sidecar.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

fn parse_stage(s: &str) -> std::result::Result<Stage, String> {
    Stage::parse(s)
        .ok_or_else(|| format!("unknown stage `{s}` (expected initial, enhanced or powerful)"))
}

/// Contents of the `--config` JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub final_layer_lr_multiplier: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every_epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub crop_size: usize,
    pub seed: u64,
    pub num_classes: u8,
    /// Expected split sizes; `run` and `stage` reject a dataset that differs.
    pub num_simple: Option<usize>,
    pub num_complex: Option<usize>,
    pub num_eval: Option<usize>,
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub warm_start: bool,
    pub powerful_includes_simple: bool,
    pub enhanced_rounds: usize,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = StcConfig::default();
        Self {
            batch_size: t.batch_size,
            initial_lr: t.initial_lr,
            final_layer_lr_multiplier: t.final_layer_lr_multiplier,
            lr_decay_factor: t.lr_decay_factor,
            lr_decay_every_epochs: t.lr_decay_every_epochs,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            crop_size: t.crop_size,
            seed: t.seed,
            num_classes: s.num_classes,
            num_simple: None,
            num_complex: None,
            num_eval: None,
            channels: s.channels,
            kernel_size: s.kernel_size,
            warm_start: s.warm_start,
            powerful_includes_simple: s.powerful_includes_simple,
            enhanced_rounds: s.enhanced_rounds,
            data_dir: None,
            out_dir: None,
        }
    }
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            initial_lr: self.initial_lr,
            final_layer_lr_multiplier: self.final_layer_lr_multiplier,
            lr_decay_factor: self.lr_decay_factor,
            lr_decay_every_epochs: self.lr_decay_every_epochs,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            crop_size: self.crop_size,
            seed: self.seed,
        }
    }

    pub fn stc_config(&self) -> StcConfig {
        StcConfig {
            num_classes: self.num_classes,
            channels: self.channels.clone(),
            kernel_size: self.kernel_size,
            train: self.train_config(),
            warm_start: self.warm_start,
            powerful_includes_simple: self.powerful_includes_simple,
            enhanced_rounds: self.enhanced_rounds,
        }
    }

    /// Checks the split sizes of a loaded dataset against the expected ones.
    pub fn check_sizes(&self, splits: &Splits) -> Result<()> {
        let expected = [
            ("simple", self.num_simple, splits.simple.len()),
            ("complex", self.num_complex, splits.complex.len()),
            ("eval", self.num_eval, splits.eval.len()),
        ];
        for (split, want, got) in expected {
            if let Some(want) = want.filter(|&w| w != got) {
                return Err(Error::invalid(format!(
                    "config expects {want} {split} records, dataset has {got}"
                )));
            }
        }
        Ok(())
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<DatasetManifest> {
    if args.simple == 0 {
        return Err(Error::invalid(
            "--simple must be positive: the initial stage trains on simple images",
        ));
    }
    let world = SynthWorld::new(args.classes, crate::data::synth::DEFAULT_IMAGE_SIDE)?;
    let sizes = CorpusSizes {
        simple: args.simple,
        complex: args.complex,
        eval: args.eval,
    };
    let splits = generate_corpus(&world, sizes, args.seed)?;
    write_dataset(&args.out, &splits.into_samples())
}

/// Fills in saliency for simple records that lack it and rewrites the
/// dataset. Returns how many maps were computed.
pub fn cmd_saliency(args: &SaliencyArgs) -> Result<usize> {
    let mut samples = read_dataset(&args.data)?;
    let simple: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].split == Split::Simple && samples[i].saliency.is_none())
        .collect();
    let subset: Vec<Sample> = simple.iter().map(|&i| samples[i].clone()).collect();
    let maps = saliency_maps(&subset);
    for (&i, map) in simple.iter().zip(maps) {
        samples[i].saliency = Some(map);
    }
    write_dataset(&args.data, &samples)?;
    Ok(simple.len())
}

struct Resolved {
    file: RunConfigFile,
    data: PathBuf,
    out: PathBuf,
    config: StcConfig,
}

fn resolve(args: &RunArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    let data = args
        .data
        .clone()
        .or_else(|| file.data_dir.clone())
        .ok_or_else(|| Error::invalid("no dataset given: pass --data or set data_dir"))?;
    let out = args
        .out
        .clone()
        .or_else(|| file.out_dir.clone())
        .ok_or_else(|| Error::invalid("no output directory given: pass --out or set out_dir"))?;
    let config = file.stc_config();
    config.train.validate()?;
    Ok(Resolved {
        file,
        data,
        out,
        config,
    })
}

fn load_splits(data: &Path, num_classes: u8) -> Result<Splits> {
    let samples = read_dataset(data)?;
    for s in &samples {
        if let Some(&c) = s.labels.classes().iter().find(|&&c| c > num_classes) {
            return Err(
                Error::invalid(format!("label {c} exceeds num_classes = {num_classes}"))
                    .in_record(&s.name),
            );
        }
    }
    Ok(Splits::from_samples(samples))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `<dir>/<stage>.stcp` and its `<stage>.json` network sidecar.
pub fn save_checkpoint(dir: &Path, stage: &TrainedStage) -> Result<PathBuf> {
    let path = dir.join(format!("{}.stcp", stage.stage.name()));
    stage.params.save(&path)?;
    stage.network.save(&path.with_extension("json"))?;
    Ok(path)
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamSet, NetworkConfig)> {
    let params = ParamSet::load(path)?;
    let network = NetworkConfig::load(&path.with_extension("json"))?;
    Ok((params, network))
}

fn write_masks(dir: &Path, masks: &[NamedMask]) -> Result<()> {
    create_dir(dir)?;
    for m in masks {
        write_label_map(&dir.join(format!("{}.pgm", m.name)), &m.mask)?;
    }
    Ok(())
}

/// Full three-stage run. Output layout under `out`: `initial.stcp`,
/// `enhanced.stcp`, `powerful.stcp` with `.json` sidecars, `report.json`,
/// `report.csv`, `masks_initial/` and `masks_enhanced/`.
pub fn cmd_run(args: &RunArgs) -> Result<RunReport> {
    let r = resolve(args)?;
    let splits = load_splits(&r.data, r.config.num_classes)?;
    r.file.check_sizes(&splits)?;
    let outcome = run_stc(&splits.simple, &splits.complex, &splits.eval, &r.config)?;
    create_dir(&r.out)?;
    for stage in &outcome.stages {
        save_checkpoint(&r.out, stage)?;
    }
    outcome.report.write(&r.out, args.timing)?;
    write_masks(&r.out.join("masks_initial"), &outcome.masks_initial)?;
    write_masks(&r.out.join("masks_enhanced"), &outcome.masks_enhanced)?;
    Ok(outcome.report)
}

/// One stage. `enhanced` and `powerful` need `--from`, the checkpoint of the
/// preceding stage. Writes the checkpoint, a single-stage report and the
/// pseudo-masks the stage consumed.
pub fn cmd_stage(args: &StageArgs) -> Result<RunReport> {
    let r = resolve(&args.run)?;
    let splits = load_splits(&r.data, r.config.num_classes)?;
    r.file.check_sizes(&splits)?;
    let previous = match (args.stage, &args.from) {
        (Stage::Initial, _) => None,
        (_, Some(path)) => Some(load_checkpoint(path)?),
        (stage, None) => {
            return Err(Error::invalid(format!(
                "the {} stage needs --from <checkpoint>",
                stage.name()
            )))
        }
    };
    let from = previous.as_ref().map(|(p, n)| (p, n));
    let (trained, masks) = match (args.stage, from) {
        (Stage::Initial, _) => (run_initial(&splits.simple, &splits.eval, &r.config)?, None),
        (Stage::Enhanced, Some(from)) => {
            let (t, m) = run_enhanced(&splits.simple, &splits.eval, from, &r.config)?;
            (t, Some(("masks_initial", m)))
        }
        (Stage::Powerful, Some(from)) => {
            let (t, m) = run_powerful(
                &splits.simple,
                &splits.complex,
                &splits.eval,
                from,
                &r.config,
            )?;
            (t, Some(("masks_enhanced", m)))
        }
        (_, None) => unreachable!("checked above"),
    };
    create_dir(&r.out)?;
    save_checkpoint(&r.out, &trained)?;
    let report = RunReport {
        seed: r.config.train.seed,
        num_classes: r.config.num_classes,
        stages: vec![trained.report],
    };
    report.write(&r.out, args.run.timing)?;
    if let Some((dir, masks)) = masks {
        write_masks(&r.out.join(dir), &masks)?;
    }
    Ok(report)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Evaluation> {
    let (params, network) = load_checkpoint(&args.checkpoint)?;
    let splits = load_splits(&args.data, network.num_classes)?;
    if splits.eval.is_empty() {
        return Err(Error::invalid(format!(
            "{}: dataset has no eval records",
            args.data.display()
        )));
    }
    evaluate(&params, &network, &splits.eval as &dyn SampleSource)
}

/// Per-class IoU table, background first, followed by the mIoU line.
pub fn format_evaluation(e: &Evaluation) -> String {
    let mut out = String::from("class  iou\n");
    for (k, iou) in e.per_class_iou.iter().enumerate() {
        let name = if k == 0 {
            "bg".to_string()
        } else {
            k.to_string()
        };
        writeln!(out, "{name:<5}  {iou:.4}").expect("string write");
    }
    writeln!(out, "mIoU   {:.4}", e.miou).expect("string write");
    out
}

/// Stage-by-stage mIoU summary of a report.
pub fn format_report(report: &RunReport) -> String {
    let mut out = String::new();
    for s in &report.stages {
        writeln!(out, "{:<9} mIoU {:.4}", s.stage, s.miou).expect("string write");
    }
    out
}
