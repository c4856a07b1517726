//! Dataset records, the JSON-lines manifest and on-disk layout.
//!
//! A dataset directory holds `manifest.jsonl` plus `images/*.ppm`,
//! `masks/*.pgm` and `saliency/*.pgm`. Paths inside the manifest are relative
//! to the directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synth::{derive_seed, SynthWorld};
use super::{netpbm, Image, LabelMap};
use crate::error::{Error, Result};
use crate::saliency::SaliencyMap;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Image-level labels: a non-empty set of object classes (never 0).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct ImageLabelSet(Vec<u8>);

impl ImageLabelSet {
    pub fn new(classes: impl IntoIterator<Item = u8>) -> Result<Self> {
        let mut v: Vec<u8> = classes.into_iter().collect();
        if v.is_empty() {
            return Err(Error::invalid("label set must not be empty"));
        }
        if v.contains(&0) {
            return Err(Error::invalid("label set must not contain background (0)"));
        }
        v.sort_unstable();
        v.dedup();
        Ok(Self(v))
    }

    pub fn classes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, class: u8) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    /// The labels with background adjoined.
    pub fn with_background(&self) -> BTreeSet<u8> {
        std::iter::once(0).chain(self.0.iter().copied()).collect()
    }
}

impl TryFrom<Vec<u8>> for ImageLabelSet {
    type Error = String;

    fn try_from(v: Vec<u8>) -> std::result::Result<Self, String> {
        let n = v.len();
        let set = ImageLabelSet::new(v).map_err(|e| e.to_string())?;
        if set.len() != n {
            return Err("duplicate labels".into());
        }
        Ok(set)
    }
}

impl From<ImageLabelSet> for Vec<u8> {
    fn from(s: ImageLabelSet) -> Self {
        s.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Simple,
    Complex,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Simple => "simple",
            Split::Complex => "complex",
            Split::Eval => "eval",
        }
    }
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub image: String,
    pub labels: ImageLabelSet,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_mask: Option<String>,
}

impl ManifestRecord {
    fn validate(&self) -> Result<()> {
        if self.split == Split::Simple && self.labels.len() != 1 {
            return Err(Error::invalid(format!(
                "simple record `{}` has {} labels",
                self.image,
                self.labels.len()
            )));
        }
        if self.split == Split::Eval && self.gt_mask.is_none() {
            return Err(Error::invalid(format!(
                "eval record `{}` has no gt_mask",
                self.image
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
            record
                .validate()
                .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
            records.push(record);
        }
        Ok(Self { records })
    }
}

/// A fully loaded record.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub name: String,
    pub image: Image,
    pub labels: ImageLabelSet,
    pub split: Split,
    pub saliency: Option<SaliencyMap>,
    pub gt_mask: Option<LabelMap>,
}

/// Read access to a list of samples.
///
/// Training code receives images, image-level labels and saliency through
/// this trait, which lets tests count every ground-truth mask access.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn name(&self, i: usize) -> &str;
    fn image(&self, i: usize) -> &Image;
    fn labels(&self, i: usize) -> &ImageLabelSet;
    fn saliency(&self, i: usize) -> Option<&SaliencyMap>;
    fn gt_mask(&self, i: usize) -> Option<&LabelMap>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSource for [Sample] {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }
    fn name(&self, i: usize) -> &str {
        &self[i].name
    }
    fn image(&self, i: usize) -> &Image {
        &self[i].image
    }
    fn labels(&self, i: usize) -> &ImageLabelSet {
        &self[i].labels
    }
    fn saliency(&self, i: usize) -> Option<&SaliencyMap> {
        self[i].saliency.as_ref()
    }
    fn gt_mask(&self, i: usize) -> Option<&LabelMap> {
        self[i].gt_mask.as_ref()
    }
}

impl SampleSource for Vec<Sample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn name(&self, i: usize) -> &str {
        self.as_slice().name(i)
    }
    fn image(&self, i: usize) -> &Image {
        self.as_slice().image(i)
    }
    fn labels(&self, i: usize) -> &ImageLabelSet {
        self.as_slice().labels(i)
    }
    fn saliency(&self, i: usize) -> Option<&SaliencyMap> {
        self.as_slice().saliency(i)
    }
    fn gt_mask(&self, i: usize) -> Option<&LabelMap> {
        self.as_slice().gt_mask(i)
    }
}

/// Wraps a source and counts ground-truth mask reads.
pub struct AuditedSource<'a> {
    inner: &'a dyn SampleSource,
    gt_reads: AtomicUsize,
}

impl<'a> AuditedSource<'a> {
    pub fn new(inner: &'a dyn SampleSource) -> Self {
        Self {
            inner,
            gt_reads: AtomicUsize::new(0),
        }
    }

    pub fn gt_mask_reads(&self) -> usize {
        self.gt_reads.load(Ordering::SeqCst)
    }
}

impl SampleSource for AuditedSource<'_> {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn name(&self, i: usize) -> &str {
        self.inner.name(i)
    }
    fn image(&self, i: usize) -> &Image {
        self.inner.image(i)
    }
    fn labels(&self, i: usize) -> &ImageLabelSet {
        self.inner.labels(i)
    }
    fn saliency(&self, i: usize) -> Option<&SaliencyMap> {
        self.inner.saliency(i)
    }
    fn gt_mask(&self, i: usize) -> Option<&LabelMap> {
        self.gt_reads.fetch_add(1, Ordering::SeqCst);
        self.inner.gt_mask(i)
    }
}

/// Samples grouped by split, preserving manifest order within each.
#[derive(Clone, Debug, Default)]
pub struct Splits {
    pub simple: Vec<Sample>,
    pub complex: Vec<Sample>,
    pub eval: Vec<Sample>,
}

impl Splits {
    pub fn from_samples(samples: Vec<Sample>) -> Self {
        let mut out = Splits::default();
        for s in samples {
            match s.split {
                Split::Simple => out.simple.push(s),
                Split::Complex => out.complex.push(s),
                Split::Eval => out.eval.push(s),
            }
        }
        out
    }

    pub fn into_samples(self) -> Vec<Sample> {
        let mut v = self.simple;
        v.extend(self.complex);
        v.extend(self.eval);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusSizes {
    pub simple: usize,
    pub complex: usize,
    pub eval: usize,
}

impl Default for CorpusSizes {
    fn default() -> Self {
        Self {
            simple: 200,
            complex: 100,
            eval: 50,
        }
    }
}

/// Generates a full synthetic corpus. Every record is seeded independently
/// from `(seed, split, index)`; eval images are complex images.
pub fn generate_corpus(world: &SynthWorld, sizes: CorpusSizes, seed: u64) -> Result<Splits> {
    use rayon::prelude::*;

    let simple = (0..sizes.simple)
        .into_par_iter()
        .map(|i| {
            let record_seed = derive_seed(seed, 1, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
            let class = world.random_class(&mut rng);
            let (image, mask, labels) = world.gen_simple(class, record_seed)?;
            Ok(Sample {
                name: format!("simple_{i:05}"),
                image,
                labels,
                split: Split::Simple,
                saliency: None,
                gt_mask: Some(mask),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let complex_like = |split: Split, stream: u64, count: usize| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let record_seed = derive_seed(seed, stream, i as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
                let classes = world.random_class_set(&mut rng)?;
                let (image, mask, labels) = world.gen_complex(&classes, record_seed)?;
                Ok(Sample {
                    name: format!("{}_{i:05}", split.as_str()),
                    image,
                    labels,
                    split,
                    saliency: None,
                    gt_mask: Some(mask),
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    Ok(Splits {
        simple,
        complex: complex_like(Split::Complex, 2, sizes.complex)?,
        eval: complex_like(Split::Eval, 3, sizes.eval)?,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_label_map(path: &Path, mask: &LabelMap) -> Result<()> {
    netpbm::write(path, mask.width(), mask.height(), 1, mask.labels())
}

pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let r = netpbm::read(path, 1)?;
    LabelMap::new(r.height, r.width, r.bytes)
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    netpbm::write(path, image.width(), image.height(), 3, &image.to_rgb8())
}

pub fn read_image(path: &Path) -> Result<Image> {
    let r = netpbm::read(path, 3)?;
    Image::from_rgb8(r.height, r.width, &r.bytes)
}

pub fn write_saliency(path: &Path, map: &SaliencyMap) -> Result<()> {
    netpbm::write(path, map.width(), map.height(), 1, &map.to_gray8())
}

pub fn read_saliency(path: &Path) -> Result<SaliencyMap> {
    let r = netpbm::read(path, 1)?;
    SaliencyMap::from_gray8(r.height, r.width, &r.bytes)
}

/// Writes images, masks and saliency maps of `samples` under `dir` together
/// with the manifest, and returns that manifest.
pub fn write_dataset(dir: &Path, samples: &[Sample]) -> Result<DatasetManifest> {
    for sub in ["images", "masks", "saliency"] {
        create_dir(&dir.join(sub))?;
    }
    let mut records = Vec::with_capacity(samples.len());
    for s in samples {
        let image = format!("images/{}.ppm", s.name);
        write_image(&dir.join(&image), &s.image).map_err(|e| e.in_record(&s.name))?;
        let gt_mask = match &s.gt_mask {
            Some(m) => {
                let rel = format!("masks/{}.pgm", s.name);
                write_label_map(&dir.join(&rel), m).map_err(|e| e.in_record(&s.name))?;
                Some(rel)
            }
            None => None,
        };
        let saliency = match &s.saliency {
            Some(m) => {
                let rel = format!("saliency/{}.pgm", s.name);
                write_saliency(&dir.join(&rel), m).map_err(|e| e.in_record(&s.name))?;
                Some(rel)
            }
            None => None,
        };
        let record = ManifestRecord {
            image,
            labels: s.labels.clone(),
            split: s.split,
            saliency,
            gt_mask,
        };
        record.validate().map_err(|e| e.in_record(&s.name))?;
        records.push(record);
    }
    let manifest = DatasetManifest { records };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = manifest.to_jsonl()?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    DatasetManifest::from_jsonl(&text, &path)
}

fn record_name(image: &str) -> String {
    Path::new(image)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| image.to_string())
}

/// Loads every file referenced by the manifest in `dir`.
pub fn read_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let manifest = read_manifest(dir)?;
    manifest
        .records
        .iter()
        .map(|r| {
            let name = record_name(&r.image);
            let load = || -> Result<Sample> {
                let image = read_image(&dir.join(&r.image))?;
                let saliency = r
                    .saliency
                    .as_ref()
                    .map(|p| read_saliency(&dir.join(p)))
                    .transpose()?;
                let gt_mask = r
                    .gt_mask
                    .as_ref()
                    .map(|p| read_label_map(&dir.join(p)))
                    .transpose()?;
                Ok(Sample {
                    name: name.clone(),
                    image,
                    labels: r.labels.clone(),
                    split: r.split,
                    saliency,
                    gt_mask,
                })
            };
            load().map_err(|e| e.in_record(&name))
        })
        .collect()
}
