//! Generates the default synthetic corpus in memory and runs all three
//! stages, printing per-stage mIoU.
//!
//! cargo run --release --example full_pipeline -- [seed] [epochs]

use std::time::Instant;

use stc::data::{generate_corpus, CorpusSizes, SynthWorld};
use stc::pipeline::{run_stc, StcConfig};

fn main() -> stc::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let mut config = StcConfig::default();
    config.train.seed = seed;
    if let Some(epochs) = args.next() {
        config.train.epochs = epochs.parse().expect("epochs");
    }

    let world = SynthWorld::default();
    let splits = generate_corpus(&world, CorpusSizes::default(), seed)?;
    let started = Instant::now();
    let outcome = run_stc(&splits.simple, &splits.complex, &splits.eval, &config)?;
    for s in &outcome.report.stages {
        let ious: Vec<String> = s.per_class_iou.iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "{:<9} mIoU {:.4}  per-class [{}]  final loss {:.4}  {:.1}s",
            s.stage,
            s.miou,
            ious.join(", "),
            s.epoch_losses.last().copied().unwrap_or(f64::NAN),
            s.seconds
        );
    }
    println!("total {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
