//! Trains a short initial network, then shows how restricting the argmax to
//! an image's labels changes its complex-image pseudo-labels.

use stc::data::{generate_corpus, CorpusSizes, SynthWorld};
use stc::pipeline::{run_initial, StcConfig};
use stc::pseudolabel::{argmax_full, argmax_restricted};
use stc::segnet::predict;

fn main() -> stc::Result<()> {
    let mut config = StcConfig::default();
    config.train.epochs = 3;
    let sizes = CorpusSizes {
        simple: 60,
        complex: 10,
        eval: 0,
    };
    let splits = generate_corpus(&SynthWorld::default(), sizes, 2)?;
    let stage = run_initial(&splits.simple, &splits.eval, &config)?;
    for s in &splits.complex {
        let pred = predict(&stage.params, &stage.network, &s.image)?;
        let full = argmax_full(&pred);
        let restricted = argmax_restricted(&pred, &s.labels.with_background())?;
        let changed = full
            .labels()
            .iter()
            .zip(restricted.labels())
            .filter(|(a, b)| a != b)
            .count();
        println!(
            "{}  labels {:?}  full-argmax classes {:?}  restricted classes {:?}  {changed} pixels changed",
            s.name,
            s.labels.classes(),
            full.present_classes(),
            restricted.present_classes()
        );
    }
    Ok(())
}
