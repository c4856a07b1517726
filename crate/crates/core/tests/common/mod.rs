#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stc::data::LabelMap;
use stc::losses::ProbMap;
use stc::tensor_grad::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Same-padded cross-correlation written as six nested loops.
pub fn naive_conv(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let [n, cin, h, w] = input.dims4().unwrap();
    let [cout, _, k, _] = kernel.dims4().unwrap();
    let r = (k / 2) as isize;
    let x = input.data();
    let kd = kernel.data();
    let mut out = vec![0.0; n * cout * h * w];
    for b in 0..n {
        for co in 0..cout {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = bias.data()[co];
                    for ci in 0..cin {
                        for dy in 0..k {
                            for dx in 0..k {
                                let sy = y as isize + dy as isize - r;
                                let sx = xx as isize + dx as isize - r;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let iv = x[((b * cin + ci) * h + sy as usize) * w + sx as usize];
                                acc += kd[((co * cin + ci) * k + dy) * k + dx] * iv;
                            }
                        }
                    }
                    out[((b * cout + co) * h + y) * w + xx] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, cout, h, w], out).unwrap()
}

/// Random strictly positive distribution per pixel, `[k, h, w]`.
pub fn random_prob_map(k: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> ProbMap {
    let logits = Tensor::from_fn(&[1, k, h, w], |_| rng.random_range(-3.0..3.0));
    ProbMap::from_logits(&logits).unwrap()
}

pub fn random_mask(h: usize, w: usize, num_labels: u8, rng: &mut ChaCha8Rng) -> LabelMap {
    LabelMap::new(
        h,
        w,
        (0..h * w)
            .map(|_| rng.random_range(0..num_labels))
            .collect(),
    )
    .unwrap()
}

/// Per-class IoU by scanning every pixel once per class.
pub fn brute_force_iou(pairs: &[(LabelMap, LabelMap)], num_labels: usize) -> Vec<f64> {
    (0..num_labels)
        .map(|c| {
            let (mut inter, mut union) = (0u64, 0u64);
            for (t, p) in pairs {
                for (&a, &b) in t.labels().iter().zip(p.labels()) {
                    let (in_t, in_p) = (a as usize == c, b as usize == c);
                    inter += (in_t && in_p) as u64;
                    union += (in_t || in_p) as u64;
                }
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .collect()
}
