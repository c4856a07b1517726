use super::Tensor;
use crate::error::{Error, Result};

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes `upstream` where `x > 0`. The subgradient at exactly zero is zero.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    x.expect_same_shape("relu_backward", upstream)?;
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// 2×2 non-overlapping mean pooling over the last two axes of `[N, C, H, W]`.
pub fn avgpool2_forward(x: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!(
            "avgpool2 needs even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let src = x.data();
    for (p, dst) in out.data_mut().chunks_mut(oh * ow).enumerate() {
        let plane = &src[p * h * w..(p + 1) * h * w];
        for y in 0..oh {
            let r0 = &plane[2 * y * w..(2 * y + 1) * w];
            let r1 = &plane[(2 * y + 1) * w..(2 * y + 2) * w];
            for xo in 0..ow {
                let s = r0[2 * xo] + r0[2 * xo + 1] + r1[2 * xo] + r1[2 * xo + 1];
                dst[y * ow + xo] = 0.25 * s;
            }
        }
    }
    Ok(out)
}

/// Spreads each upstream value uniformly (÷4) over its 2×2 source block.
pub fn avgpool2_backward(upstream: &Tensor) -> Result<Tensor> {
    let [n, c, oh, ow] = upstream.dims4()?;
    let (h, w) = (oh * 2, ow * 2);
    let mut out = Tensor::zeros(&[n, c, h, w]);
    let src = upstream.data();
    for (p, dst) in out.data_mut().chunks_mut(h * w).enumerate() {
        let up = &src[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = 0.25 * up[(y / 2) * ow + x / 2];
            }
        }
    }
    Ok(out)
}

fn corner_coord(i: usize, src: usize, dst: usize) -> f64 {
    if dst == 1 || src == 1 {
        0.0
    } else {
        (i * (src - 1)) as f64 / (dst - 1) as f64
    }
}

/// Align-corners bilinear interpolation of one row-major `h×w` plane.
pub fn resize_plane(plane: &[f64], h: usize, w: usize, th: usize, tw: usize) -> Vec<f64> {
    assert_eq!(plane.len(), h * w);
    assert!(th >= 1 && tw >= 1, "target dims must be positive");
    if (h, w) == (th, tw) {
        return plane.to_vec();
    }
    let xs: Vec<(usize, usize, f64)> = (0..tw)
        .map(|x| {
            let s = corner_coord(x, w, tw);
            let x0 = (s.floor() as usize).min(w - 1);
            (x0, (x0 + 1).min(w - 1), s - x0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(th * tw);
    for y in 0..th {
        let s = corner_coord(y, h, th);
        let y0 = (s.floor() as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fy = s - y0 as f64;
        for &(x0, x1, fx) in &xs {
            let lerp_row = |row: usize| {
                let a = plane[row * w + x0];
                if fx == 0.0 {
                    a
                } else {
                    a * (1.0 - fx) + plane[row * w + x1] * fx
                }
            };
            let top = lerp_row(y0);
            out.push(if fy == 0.0 {
                top
            } else {
                top * (1.0 - fy) + lerp_row(y1) * fy
            });
        }
    }
    out
}

/// Resizes the last two axes of `map` to `target_h × target_w`.
pub fn bilinear_resize(map: &Tensor, target_h: usize, target_w: usize) -> Result<Tensor> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::invalid("bilinear_resize target dims must be >= 1"));
    }
    let rank = map.rank();
    if rank < 2 {
        return Err(Error::invalid(format!(
            "bilinear_resize needs rank >= 2, got {:?}",
            map.shape()
        )));
    }
    let (h, w) = (map.shape()[rank - 2], map.shape()[rank - 1]);
    let mut shape = map.shape().to_vec();
    shape[rank - 2] = target_h;
    shape[rank - 1] = target_w;
    let data = map
        .data()
        .chunks(h * w)
        .flat_map(|plane| resize_plane(plane, h, w, target_h, target_w))
        .collect();
    Tensor::new(shape, data)
}

/// Per-pixel softmax over the channel axis of `[N, K, h, w]` logits.
pub fn channel_softmax(logits: &Tensor) -> Result<Tensor> {
    let [n, k, h, w] = logits.dims4()?;
    let plane = h * w;
    let mut out = Tensor::zeros(&[n, k, h, w]);
    let src = logits.data();
    let dst = out.data_mut();
    for b in 0..n {
        let base = b * k * plane;
        for p in 0..plane {
            let at = |ch: usize| base + ch * plane + p;
            let max = (0..k)
                .map(|ch| src[at(ch)])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for ch in 0..k {
                let e = (src[at(ch)] - max).exp();
                dst[at(ch)] = e;
                sum += e;
            }
            for ch in 0..k {
                dst[at(ch)] /= sum;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn relu_values_and_subgradient() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &Tensor::full(&[3], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn pool_block_mean() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(avgpool2_forward(&x).unwrap().data(), &[3.0]);
        let c = Tensor::full(&[2, 3, 4, 6], 1.25);
        let p = avgpool2_forward(&c).unwrap();
        assert_eq!(p.shape(), &[2, 3, 2, 3]);
        assert!(p.data().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn pool_rejects_odd_dims() {
        assert!(avgpool2_forward(&Tensor::zeros(&[1, 1, 3, 4])).is_err());
    }

    #[test]
    fn pool_backward_spreads_quarter() {
        let up = Tensor::full(&[1, 1, 1, 1], 4.0);
        assert_eq!(avgpool2_backward(&up).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn resize_identity_is_bit_exact() {
        let m = Tensor::from_fn(&[2, 5, 7], |i| (i as f64 * 0.37).sin());
        let r = bilinear_resize(&m, 5, 7).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn resize_align_corners_hand_case() {
        let m = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let r = bilinear_resize(&m, 1, 3).unwrap();
        assert_eq!(r.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let m = Tensor::full(&[3, 4], 0.3);
        for (th, tw) in [(1, 1), (7, 2), (12, 16)] {
            let r = bilinear_resize(&m, th, tw).unwrap();
            for &v in r.data() {
                assert_relative_eq!(v, 0.3, epsilon = 1e-15);
            }
        }
        assert!(bilinear_resize(&m, 0, 2).is_err());
    }

    #[test]
    fn softmax_symmetric_and_scalar() {
        let p = channel_softmax(&Tensor::full(&[1, 3, 2, 2], 0.7)).unwrap();
        for &v in p.data() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let l = Tensor::new(vec![1, 2, 1, 1], vec![1.0, 0.0]).unwrap();
        let p = channel_softmax(&l).unwrap();
        assert_relative_eq!(p.data()[0], 0.731_058_578_630_004_9, epsilon = 1e-12);
        assert_relative_eq!(p.data()[1], 0.268_941_421_369_995_1, epsilon = 1e-12);
    }

    #[test]
    fn softmax_large_logits_stay_finite() {
        let l = Tensor::new(vec![1, 2, 1, 1], vec![1000.0, -1000.0]).unwrap();
        let p = channel_softmax(&l).unwrap();
        assert!(p.all_finite());
        assert_eq!(p.data()[0], 1.0);
    }
}
