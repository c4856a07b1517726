//! Writes a small synthetic dataset to disk and prints what it contains.
//!
//! cargo run --example generate_dataset -- <out-dir> [seed]

use std::path::PathBuf;

use stc::data::{generate_corpus, write_dataset, CorpusSizes, Split, SynthWorld};

fn main() -> stc::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "stc-data".into()));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let world = SynthWorld::default();
    let sizes = CorpusSizes {
        simple: 20,
        complex: 10,
        eval: 5,
    };
    let manifest = write_dataset(&out, &generate_corpus(&world, sizes, seed)?.into_samples())?;
    for split in [Split::Simple, Split::Complex, Split::Eval] {
        println!("{:<8} {}", split.as_str(), manifest.count(split));
    }
    for class in 1..=world.num_classes() {
        let [r, g, b] = world.class_color(class);
        println!("class {class}: rgb ({r:.2}, {g:.2}, {b:.2})");
    }
    println!("wrote {}", out.display());
    Ok(())
}
