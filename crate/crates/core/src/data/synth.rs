//! Deterministic shape-world generator.
//!
//! Every object class owns a shape family (disc, square, triangle, cross,
//! cycling for larger class counts) and a saturated base hue. Backgrounds are
//! low-saturation; distractor blobs in complex images are saturated but take
//! hues outside every class hue band.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Image, ImageLabelSet, LabelMap};
use crate::error::{Error, Result};

pub const DEFAULT_NUM_CLASSES: u8 = 4;
pub const DEFAULT_IMAGE_SIDE: usize = 64;

const NOISE_SIGMA: f64 = 0.02;
const COLOR_JITTER: f64 = 0.1;
const CLASS_SATURATION: f64 = 0.85;
const CLASS_VALUE: f64 = 0.9;
const MAX_MUTED_SATURATION: f64 = 0.2;
/// Half-width in degrees of the hue band reserved for each class.
const CLASS_HUE_BAND: f64 = 20.0;
const DISTRACTOR_SATURATION: (f64, f64) = (0.5, 0.9);
const DISTRACTOR_VALUE: (f64, f64) = (0.5, 0.95);
/// Shape area as a fraction of the squared size.
const AREA_PER_SIZE_SQ: f64 = 0.9;
const SIMPLE_SIZE: (f64, f64) = (0.25, 0.6);
const COMPLEX_SIZE: (f64, f64) = (0.2, 0.42);
/// Fraction of each shape that must survive occlusion in complex images.
const MIN_VISIBLE: f64 = 0.4;
const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// SplitMix64 finalizer used to derive independent per-record seeds.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    let mut z = root
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Disc,
    Square,
    Triangle,
    Cross,
}

impl ShapeKind {
    pub fn for_class(class: u8) -> Self {
        match (class - 1) % 4 {
            0 => ShapeKind::Disc,
            1 => ShapeKind::Square,
            2 => ShapeKind::Triangle,
            _ => ShapeKind::Cross,
        }
    }

    /// Bounding-box side for a shape of the given pixel area.
    fn extent_for_area(self, area: f64) -> f64 {
        match self {
            ShapeKind::Disc => 2.0 * (area / std::f64::consts::PI).sqrt(),
            ShapeKind::Square => area.sqrt(),
            ShapeKind::Triangle => (2.0 * area).sqrt(),
            ShapeKind::Cross => (9.0 * area / 5.0).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    kind: ShapeKind,
    cx: f64,
    cy: f64,
    extent: f64,
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        let half = self.extent / 2.0;
        let (dx, dy) = (x - self.cx, y - self.cy);
        match self.kind {
            ShapeKind::Disc => dx * dx + dy * dy <= half * half,
            ShapeKind::Square => dx.abs() <= half && dy.abs() <= half,
            ShapeKind::Triangle => {
                let depth = dy + half;
                (0.0..=self.extent).contains(&depth) && dx.abs() <= depth / 2.0
            }
            ShapeKind::Cross => {
                let arm = self.extent / 6.0;
                (dx.abs() <= half && dy.abs() <= arm) || (dy.abs() <= half && dx.abs() <= arm)
            }
        }
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Generator for one synthetic world of `num_classes` classes on
/// `side × side` images.
#[derive(Clone, Copy, Debug)]
pub struct SynthWorld {
    num_classes: u8,
    side: usize,
}

impl Default for SynthWorld {
    fn default() -> Self {
        Self {
            num_classes: DEFAULT_NUM_CLASSES,
            side: DEFAULT_IMAGE_SIDE,
        }
    }
}

impl SynthWorld {
    pub fn new(num_classes: u8, side: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("need at least one object class"));
        }
        if side < 16 {
            return Err(Error::invalid(format!("image side {side} too small")));
        }
        Ok(Self { num_classes, side })
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Base RGB color of a class before jitter.
    pub fn class_color(&self, class: u8) -> [f64; 3] {
        hsv_to_rgb(self.class_hue(class), CLASS_SATURATION, CLASS_VALUE)
    }

    fn check_class(&self, class: u8) -> Result<()> {
        if class == 0 || class > self.num_classes {
            return Err(Error::invalid(format!(
                "class {class} outside 1..={}",
                self.num_classes
            )));
        }
        Ok(())
    }

    fn jittered_class_color(&self, class: u8, rng: &mut ChaCha8Rng) -> [f64; 3] {
        self.class_color(class)
            .map(|c| (c + rng.random_range(-COLOR_JITTER..=COLOR_JITTER)).clamp(0.0, 1.0))
    }

    fn muted_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
        let hue = rng.random_range(0.0..360.0);
        let sat = rng.random_range(0.0..MAX_MUTED_SATURATION);
        let val = rng.random_range(0.2..0.85);
        hsv_to_rgb(hue, sat, val)
    }

    fn class_hue(&self, class: u8) -> f64 {
        360.0 * (class - 1) as f64 / self.num_classes as f64
    }

    /// Whether `hue` lies within the band of any class.
    pub fn is_class_hue(&self, hue: f64) -> bool {
        (1..=self.num_classes).any(|c| {
            let d = (hue - self.class_hue(c)).rem_euclid(360.0);
            d.min(360.0 - d) <= CLASS_HUE_BAND
        })
    }

    /// Saturated color with a hue outside every class band, or a muted color
    /// when the class bands cover the whole hue circle.
    fn distractor_color(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        if 2.0 * CLASS_HUE_BAND * self.num_classes as f64 >= 360.0 {
            return Self::muted_color(rng);
        }
        let hue = loop {
            let h = rng.random_range(0.0..360.0);
            if !self.is_class_hue(h) {
                break h;
            }
        };
        let sat = rng.random_range(DISTRACTOR_SATURATION.0..DISTRACTOR_SATURATION.1);
        let val = rng.random_range(DISTRACTOR_VALUE.0..DISTRACTOR_VALUE.1);
        hsv_to_rgb(hue, sat, val)
    }

    fn random_shape(&self, class: u8, size_range: (f64, f64), rng: &mut ChaCha8Rng) -> Shape {
        let kind = ShapeKind::for_class(class);
        let side = self.side as f64;
        let size = rng.random_range(size_range.0..=size_range.1) * side;
        let extent = kind
            .extent_for_area(AREA_PER_SIZE_SQ * size * size)
            .min(side - 2.0);
        let half = extent / 2.0;
        let cx = rng.random_range(half..=side - half);
        let cy = rng.random_range(half..=side - half);
        Shape {
            kind,
            cx,
            cy,
            extent,
        }
    }

    fn paint(
        &self,
        canvas: &mut [f64],
        mask: &mut [u8],
        shape: &Shape,
        color: [f64; 3],
        label: u8,
    ) {
        for y in 0..self.side {
            for x in 0..self.side {
                if shape.contains(x as f64 + 0.5, y as f64 + 0.5) {
                    let p = y * self.side + x;
                    canvas[p * 3..p * 3 + 3].copy_from_slice(&color);
                    mask[p] = label;
                }
            }
        }
    }

    fn finish(&self, mut canvas: Vec<f64>, rng: &mut ChaCha8Rng) -> Image {
        let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
        for v in &mut canvas {
            *v = quantize(*v + noise.sample(rng));
        }
        Image::new(self.side, self.side, canvas).expect("generator keeps values in range")
    }

    /// One object of `class` on a near-uniform muted background.
    pub fn gen_simple(&self, class: u8, seed: u64) -> Result<(Image, LabelMap, ImageLabelSet)> {
        self.check_class(class)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.side * self.side;
        let base = Self::muted_color(&mut rng);
        let mut canvas: Vec<f64> = (0..n).flat_map(|_| base).collect();
        let mut mask = vec![0u8; n];
        let shape = self.random_shape(class, SIMPLE_SIZE, &mut rng);
        let color = self.jittered_class_color(class, &mut rng);
        self.paint(&mut canvas, &mut mask, &shape, color, class);
        let image = self.finish(canvas, &mut rng);
        Ok((
            image,
            LabelMap::new(self.side, self.side, mask)?,
            ImageLabelSet::new([class])?,
        ))
    }

    /// Two or three objects over a muted gradient with saturated distractor
    /// blobs of non-class hues. Later shapes occlude earlier ones; placements that hide too much
    /// of any shape are retried.
    pub fn gen_complex(
        &self,
        classes: &[u8],
        seed: u64,
    ) -> Result<(Image, LabelMap, ImageLabelSet)> {
        let labels = ImageLabelSet::new(classes.iter().copied())?;
        if !(2..=3).contains(&labels.len()) || labels.len() != classes.len() {
            return Err(Error::invalid(format!(
                "complex images need 2 or 3 distinct classes, got {classes:?}"
            )));
        }
        for &c in classes {
            self.check_class(c)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = self.side as f64;
        let n = self.side * self.side;

        let (c0, c1) = (Self::muted_color(&mut rng), Self::muted_color(&mut rng));
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut background = Vec::with_capacity(n * 3);
        for y in 0..self.side {
            for x in 0..self.side {
                let u = (x as f64 + 0.5) / side - 0.5;
                let v = (y as f64 + 0.5) / side - 0.5;
                let t = ((u * dx + v * dy) / std::f64::consts::SQRT_2 + 0.5).clamp(0.0, 1.0);
                background.extend((0..3).map(|c| c0[c] * (1.0 - t) + c1[c] * t));
            }
        }
        let blobs = rng.random_range(2..=4);
        for _ in 0..blobs {
            let color = self.distractor_color(&mut rng);
            let (rx, ry) = (rng.random_range(3.0..10.0), rng.random_range(3.0..10.0));
            let (bx, by) = (rng.random_range(0.0..side), rng.random_range(0.0..side));
            for y in 0..self.side {
                for x in 0..self.side {
                    let ex = (x as f64 + 0.5 - bx) / rx;
                    let ey = (y as f64 + 0.5 - by) / ry;
                    if ex * ex + ey * ey <= 1.0 {
                        let p = y * self.side + x;
                        background[p * 3..p * 3 + 3].copy_from_slice(&color);
                    }
                }
            }
        }

        let mut order = classes.to_vec();
        order.shuffle(&mut rng);
        let colors: Vec<[f64; 3]> = order
            .iter()
            .map(|&c| self.jittered_class_color(c, &mut rng))
            .collect();
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let shapes: Vec<Shape> = order
                .iter()
                .map(|&c| self.random_shape(c, COMPLEX_SIZE, &mut rng))
                .collect();
            let mut canvas = background.clone();
            let mut mask = vec![0u8; n];
            let mut full_area = Vec::with_capacity(shapes.len());
            for ((shape, &color), &class) in shapes.iter().zip(&colors).zip(&order) {
                self.paint(&mut canvas, &mut mask, shape, color, class);
                let area = (0..n)
                    .filter(|&p| {
                        shape.contains((p % self.side) as f64 + 0.5, (p / self.side) as f64 + 0.5)
                    })
                    .count();
                full_area.push(area);
            }
            let visible_ok = order.iter().zip(&full_area).all(|(&class, &area)| {
                let visible = mask.iter().filter(|&&l| l == class).count();
                area > 0 && visible as f64 >= MIN_VISIBLE * area as f64
            });
            if visible_ok {
                let image = self.finish(canvas, &mut rng);
                return Ok((image, LabelMap::new(self.side, self.side, mask)?, labels));
            }
        }
        Err(Error::invalid(format!(
            "could not place classes {classes:?} without heavy occlusion"
        )))
    }

    /// Picks a random class for a simple image.
    pub fn random_class(&self, rng: &mut impl Rng) -> u8 {
        rng.random_range(1..=self.num_classes)
    }

    /// Picks 2 or 3 distinct random classes (2 only when `C = 2`).
    pub fn random_class_set(&self, rng: &mut impl Rng) -> Result<Vec<u8>> {
        if self.num_classes < 2 {
            return Err(Error::invalid("complex images need at least 2 classes"));
        }
        let k = rng.random_range(2..=3.min(self.num_classes as usize));
        let mut all: Vec<u8> = (1..=self.num_classes).collect();
        all.shuffle(rng);
        all.truncate(k);
        Ok(all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_is_deterministic_and_single_class() {
        let world = SynthWorld::default();
        let a = world.gen_simple(3, 42).unwrap();
        let b = world.gen_simple(3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.2.classes(), &[3]);
        assert_eq!(a.1.present_classes(), vec![3]);
        assert_ne!(world.gen_simple(3, 43).unwrap().0, a.0);
    }

    #[test]
    fn invalid_classes_rejected() {
        let world = SynthWorld::default();
        assert!(world.gen_simple(0, 1).is_err());
        assert!(world.gen_simple(5, 1).is_err());
        assert!(world.gen_complex(&[1], 1).is_err());
        assert!(world.gen_complex(&[1, 2, 3, 4], 1).is_err());
        assert!(world.gen_complex(&[2, 2], 1).is_err());
        assert!(world.gen_complex(&[1, 7], 1).is_err());
    }

    #[test]
    fn complex_mask_contains_every_class() {
        let world = SynthWorld::default();
        for seed in 0..50 {
            let (_, mask, labels) = world.gen_complex(&[4, 1, 2], seed).unwrap();
            assert_eq!(mask.present_classes(), labels.classes());
        }
        let a = world.gen_complex(&[1, 3], 9).unwrap();
        assert_eq!(a, world.gen_complex(&[1, 3], 9).unwrap());
    }

    #[test]
    fn pixels_are_8bit_exact() {
        let (img, _, _) = SynthWorld::default().gen_complex(&[1, 2], 5).unwrap();
        let back = Image::from_rgb8(img.height(), img.width(), &img.to_rgb8()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(7, 2, 3), derive_seed(7, 2, 3));
    }
}
