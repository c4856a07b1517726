//! Trains only the initial network from saliency targets and evaluates it.
//!
//! cargo run --release --example train_initial -- [epochs]

use stc::data::{generate_corpus, CorpusSizes, SynthWorld};
use stc::pipeline::{run_initial, StcConfig};

fn main() -> stc::Result<()> {
    let mut config = StcConfig::default();
    if let Some(e) = std::env::args().nth(1) {
        config.train.epochs = e.parse().expect("epochs");
    }
    let sizes = CorpusSizes {
        simple: 200,
        complex: 0,
        eval: 50,
    };
    let splits = generate_corpus(&SynthWorld::default(), sizes, 0)?;
    let stage = run_initial(&splits.simple, &splits.eval, &config)?;
    for (epoch, loss) in stage.report.epoch_losses.iter().enumerate() {
        println!("epoch {:>2}  loss {loss:.4}", epoch + 1);
    }
    println!(
        "mIoU {:.4}  ({:.1}s)",
        stage.report.miou, stage.report.seconds
    );
    Ok(())
}
