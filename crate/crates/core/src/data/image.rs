use crate::error::{Error, Result};
use crate::tensor_grad::Tensor;

/// RGB image with channel values in `[0, 1]`, stored interleaved row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dims must be positive"));
        }
        if pixels.len() != height * width * 3 {
            return Err(Error::invalid(format!(
                "{height}x{width} RGB image needs {} values, got {}",
                height * width * 3,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
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

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn rgb(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::invalid(format!(
                "crop {height}x{width}@({top},{left}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in top..top + height {
            let start = (y * self.width + left) * 3;
            pixels.extend_from_slice(&self.pixels[start..start + width * 3]);
        }
        Image::new(height, width, pixels)
    }

    /// `[1, 3, H, W]` planar tensor.
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.height * self.width;
        let mut data = vec![0.0; 3 * plane];
        for (p, rgb) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + p] = rgb[c];
            }
        }
        Tensor::new(vec![1, 3, self.height, self.width], data).expect("consistent dims")
    }
}

/// Per-pixel class ids; 0 is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(Error::invalid(format!(
                "{height}x{width} label map needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, label: u8) -> Self {
        Self::new(height, width, vec![label; height * width]).expect("positive dims")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn max_label(&self) -> u8 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Sorted distinct non-background labels.
    pub fn present_classes(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=255u8).filter(|&l| seen[l as usize]).collect()
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<LabelMap> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::invalid("label map crop out of bounds"));
        }
        let labels = (top..top + height)
            .flat_map(|y| {
                let start = y * self.width + left;
                self.labels[start..start + width].iter().copied()
            })
            .collect();
        LabelMap::new(height, width, labels)
    }

    /// Nearest-neighbour resampling on the align-corners grid used by
    /// bilinear resizing: target pixel `i` reads source pixel
    /// `round(i · (src − 1) / (dst − 1))`, and pixel 0 when `dst == 1`.
    pub fn resize_nearest(&self, height: usize, width: usize) -> LabelMap {
        let pick = |i: usize, src: usize, dst: usize| {
            if dst == 1 {
                0
            } else {
                (2 * i * (src - 1) + (dst - 1)) / (2 * (dst - 1))
            }
        };
        let cols: Vec<usize> = (0..width).map(|x| pick(x, self.width, width)).collect();
        let labels = (0..height)
            .flat_map(|y| {
                let sy = pick(y, self.height, height);
                cols.iter().map(move |&sx| self.get(sy, sx))
            })
            .collect();
        LabelMap::new(height, width, labels).expect("positive dims")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_validates_range() {
        assert!(Image::new(1, 1, vec![0.0, 1.0, 1.5]).is_err());
        assert!(Image::new(1, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn tensor_layout_is_planar() {
        let img = Image::new(1, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let t = img.to_tensor();
        assert_eq!(t.shape(), &[1, 3, 1, 2]);
        assert_eq!(t.data(), &[0.1, 0.4, 0.2, 0.5, 0.3, 0.6]);
    }

    #[test]
    fn crop_picks_window() {
        let img = Image::from_rgb8(3, 3, &(0..27).collect::<Vec<u8>>()).unwrap();
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(
            c.to_rgb8(),
            vec![12, 13, 14, 15, 16, 17, 21, 22, 23, 24, 25, 26]
        );
        assert!(img.crop(2, 2, 2, 2).is_err());
    }

    #[test]
    fn nearest_downsample_follows_align_corners() {
        let labels: Vec<u8> = (0..64).map(|i| i as u8).collect();
        let m = LabelMap::new(8, 8, labels).unwrap();
        // 8 -> 3 samples rows/cols 0, 3.5 -> 4 (round half up), 7.
        let d = m.resize_nearest(3, 3);
        assert_eq!(d.labels(), &[0, 4, 7, 32, 36, 39, 56, 60, 63]);
        assert_eq!(m.resize_nearest(8, 8), m);
        assert_eq!(m.resize_nearest(1, 1).labels(), &[0]);
        let wide = LabelMap::new(1, 48, (0..48).collect())
            .unwrap()
            .resize_nearest(1, 12);
        let want: Vec<u8> = (0..12)
            .map(|i| ((i as f64 * 47.0 / 11.0).round()) as u8)
            .collect();
        assert_eq!(wide.labels(), want.as_slice());
    }
}
