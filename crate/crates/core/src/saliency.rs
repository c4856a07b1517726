//! Bottom-up saliency from global contrast against a border prior.
//!
//! Each pixel is scored by the RGB distance between its 5×5 box-blurred color
//! and the mean color of the image's outer frame (10% of each side), and the
//! scores are min-max normalized.

use crate::data::Image;
use crate::error::{Error, Result};

const BLUR_RADIUS: usize = 2;
const BORDER_FRACTION: f64 = 0.1;
const CONTRAST_FLOOR: f64 = 1e-9;

/// Per-pixel foreground likelihood in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::invalid(format!(
                "{height}x{width} saliency map needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("saliency value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Byte `v` decodes to `v / 255`.
    pub fn from_gray8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::invalid("saliency crop out of bounds"));
        }
        let values = (top..top + height)
            .flat_map(|y| {
                let start = y * self.width + left;
                self.values[start..start + width].iter().copied()
            })
            .collect();
        Self::new(height, width, values)
    }
}

/// Min-max rescaling to `[0, 1]`; a constant map becomes all zeros.
pub fn normalize_saliency(raw: &[f64], height: usize, width: usize) -> Result<SaliencyMap> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("saliency values must be finite"));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = if max > min {
        raw.iter()
            .map(|&v| ((v - min) / (max - min)).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; raw.len()]
    };
    SaliencyMap::new(height, width, values)
}

/// Box blur with the window clipped at the image edge.
fn box_blur(image: &Image, radius: usize) -> Vec<[f64; 3]> {
    let (h, w) = (image.height(), image.width());
    // Summed-area table, one extra row and column of zeros.
    let mut table = vec![[0.0f64; 3]; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut row = [0.0; 3];
        for x in 0..w {
            let px = image.rgb(y, x);
            for c in 0..3 {
                row[c] += px[c];
                table[(y + 1) * (w + 1) + x + 1][c] = table[y * (w + 1) + x + 1][c] + row[c];
            }
        }
    }
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(radius), (y + radius + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(radius), (x + radius + 1).min(w));
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            let at = |yy: usize, xx: usize| table[yy * (w + 1) + xx];
            let (a, b, c, d) = (at(y1, x1), at(y0, x1), at(y1, x0), at(y0, x0));
            out.push(std::array::from_fn(|k| (a[k] - b[k] - c[k] + d[k]) / n));
        }
    }
    out
}

fn border_mean(image: &Image) -> [f64; 3] {
    let (h, w) = (image.height(), image.width());
    let bh = ((h as f64 * BORDER_FRACTION).round() as usize).clamp(1, h);
    let bw = ((w as f64 * BORDER_FRACTION).round() as usize).clamp(1, w);
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if y < bh || y >= h - bh || x < bw || x >= w - bw {
                let px = image.rgb(y, x);
                for c in 0..3 {
                    sum[c] += px[c];
                }
                n += 1;
            }
        }
    }
    sum.map(|s| s / n as f64)
}

/// Border-prior contrast: distance of each blurred pixel from the mean color
/// of the border frame, min-max normalized. Distances below rounding noise
/// count as zero so a uniform image maps to all zeros.
pub fn compute_saliency(image: &Image) -> SaliencyMap {
    let reference = border_mean(image);
    let raw: Vec<f64> = box_blur(image, BLUR_RADIUS)
        .iter()
        .map(|px| {
            (0..3)
                .map(|c| (px[c] - reference[c]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .map(|d| if d < CONTRAST_FLOOR { 0.0 } else { d })
        .collect();
    normalize_saliency(&raw, image.height(), image.width()).expect("distances are finite")
}
