//! Computes saliency for a few simple images and reports how well it
//! separates object from background.

use stc::data::{generate_corpus, CorpusSizes, SynthWorld};
use stc::saliency::compute_saliency;

fn main() -> stc::Result<()> {
    let sizes = CorpusSizes {
        simple: 8,
        complex: 0,
        eval: 0,
    };
    for s in generate_corpus(&SynthWorld::default(), sizes, 1)?.simple {
        let map = compute_saliency(&s.image);
        let gt = s.gt_mask.as_ref().expect("generated masks");
        let (mut fg, mut bg) = (Vec::new(), Vec::new());
        for (&v, &l) in map.values().iter().zip(gt.labels()) {
            if l == 0 {
                bg.push(v)
            } else {
                fg.push(v)
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        println!(
            "{}  class {}  object {:.3}  background {:.3}",
            s.name,
            s.labels.classes()[0],
            mean(&fg),
            mean(&bg)
        );
    }
    Ok(())
}
