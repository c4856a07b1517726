//! Images, label maps, the synthetic generator and dataset I/O.

mod dataset;
mod image;
pub mod netpbm;
pub mod synth;

pub use dataset::{
    generate_corpus, read_dataset, read_image, read_label_map, read_manifest, read_saliency,
    write_dataset, write_image, write_label_map, write_manifest, write_saliency, AuditedSource,
    CorpusSizes, DatasetManifest, ImageLabelSet, ManifestRecord, Sample, SampleSource, Split,
    Splits, MANIFEST_FILE,
};
pub use image::{Image, LabelMap};
pub use synth::SynthWorld;
