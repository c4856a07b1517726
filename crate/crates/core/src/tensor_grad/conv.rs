//! Stride-1, zero same-padded 2-D cross-correlation over NCHW tensors.
//!
//! Both directions lower the convolution to matrix products over an im2col
//! buffer; the products themselves run on `matrixmultiply`.

use super::Tensor;
use crate::error::{Error, Result};

/// Row-major `c = a·b + beta·c` where `a` is `m×k` (or its transpose when
/// `trans_a`) and `b` is `k×n` (or its transpose when `trans_b`).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if trans_b {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the slice lengths above cover every index addressed by the
    // given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

struct ConvGeometry {
    batch: usize,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    k: usize,
}

impl ConvGeometry {
    fn check(input: &Tensor, kernel: &Tensor) -> Result<Self> {
        let [batch, c_in, h, w] = input.dims4()?;
        let [c_out, kc, kh, kw] = kernel.dims4()?;
        if kc != c_in {
            return Err(Error::Shape {
                op: "conv2d",
                lhs: input.shape().to_vec(),
                rhs: kernel.shape().to_vec(),
            });
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::invalid(format!(
                "conv2d kernel must be square with odd size, got shape {:?}",
                kernel.shape()
            )));
        }
        Ok(Self {
            batch,
            c_in,
            c_out,
            h,
            w,
            k: kh,
        })
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// Unfolds one image `[C, H, W]` into `[C·k·k, H·W]` with zero padding.
fn im2col(g: &ConvGeometry, image: &[f64], cols: &mut [f64]) {
    let pad = (g.k / 2) as isize;
    let (h, w) = (g.h as isize, g.w as isize);
    let plane = g.plane();
    let mut row = 0;
    for c in 0..g.c_in {
        let src = &image[c * plane..(c + 1) * plane];
        for ky in 0..g.k as isize {
            for kx in 0..g.k as isize {
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for y in 0..h {
                    let sy = y + ky - pad;
                    let line = &mut dst[(y * w) as usize..((y + 1) * w) as usize];
                    if sy < 0 || sy >= h {
                        line.fill(0.0);
                        continue;
                    }
                    let src_line = &src[(sy * w) as usize..((sy + 1) * w) as usize];
                    for (x, out) in line.iter_mut().enumerate() {
                        let sx = x as isize + kx - pad;
                        *out = if sx < 0 || sx >= w {
                            0.0
                        } else {
                            src_line[sx as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `[C·k·k, H·W]` back onto `[C, H, W]`.
fn col2im(g: &ConvGeometry, cols: &[f64], image: &mut [f64]) {
    let pad = (g.k / 2) as isize;
    let (h, w) = (g.h as isize, g.w as isize);
    let plane = g.plane();
    image.fill(0.0);
    let mut row = 0;
    for c in 0..g.c_in {
        let dst = &mut image[c * plane..(c + 1) * plane];
        for ky in 0..g.k as isize {
            for kx in 0..g.k as isize {
                let src = &cols[row * plane..(row + 1) * plane];
                for y in 0..h {
                    let sy = y + ky - pad;
                    if sy < 0 || sy >= h {
                        continue;
                    }
                    let line = &src[(y * w) as usize..((y + 1) * w) as usize];
                    let dst_line = &mut dst[(sy * w) as usize..((sy + 1) * w) as usize];
                    for (x, v) in line.iter().enumerate() {
                        let sx = x as isize + kx - pad;
                        if sx >= 0 && sx < w {
                            dst_line[sx as usize] += v;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// `input[N,Cin,H,W] ⋆ kernel[Cout,Cin,k,k] + bias[Cout]`, same-padded.
pub fn conv2d_forward(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let g = ConvGeometry::check(input, kernel)?;
    if bias.shape() != [g.c_out] {
        return Err(Error::Shape {
            op: "conv2d bias",
            lhs: kernel.shape().to_vec(),
            rhs: bias.shape().to_vec(),
        });
    }
    let plane = g.plane();
    let mut out = Tensor::zeros(&[g.batch, g.c_out, g.h, g.w]);
    let mut cols = if g.k == 1 {
        Vec::new()
    } else {
        vec![0.0; g.patch_len() * plane]
    };
    let in_stride = g.c_in * plane;
    let out_stride = g.c_out * plane;
    for n in 0..g.batch {
        let image = &input.data()[n * in_stride..(n + 1) * in_stride];
        let dst = &mut out.data_mut()[n * out_stride..(n + 1) * out_stride];
        for (co, &b) in bias.data().iter().enumerate() {
            dst[co * plane..(co + 1) * plane].fill(b);
        }
        let patches: &[f64] = if g.k == 1 {
            image
        } else {
            im2col(&g, image, &mut cols);
            &cols
        };
        gemm(
            g.c_out,
            g.patch_len(),
            plane,
            kernel.data(),
            false,
            patches,
            false,
            1.0,
            dst,
        );
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = ConvGeometry::check(input, kernel)?;
    if upstream.shape() != [g.batch, g.c_out, g.h, g.w] {
        return Err(Error::Shape {
            op: "conv2d_backward upstream",
            lhs: vec![g.batch, g.c_out, g.h, g.w],
            rhs: upstream.shape().to_vec(),
        });
    }
    let plane = g.plane();
    let patch = g.patch_len();
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_kernel = Tensor::zeros(kernel.shape());
    let mut grad_bias = Tensor::zeros(&[g.c_out]);
    let mut cols = vec![0.0; patch * plane];
    let mut grad_cols = vec![0.0; patch * plane];
    let in_stride = g.c_in * plane;
    let out_stride = g.c_out * plane;
    for n in 0..g.batch {
        let image = &input.data()[n * in_stride..(n + 1) * in_stride];
        let up = &upstream.data()[n * out_stride..(n + 1) * out_stride];
        for (co, gb) in grad_bias.data_mut().iter_mut().enumerate() {
            *gb += up[co * plane..(co + 1) * plane].iter().sum::<f64>();
        }
        let patches: &[f64] = if g.k == 1 {
            image
        } else {
            im2col(&g, image, &mut cols);
            &cols
        };
        // dK[Cout, P] += G[Cout, HW] · patchesᵀ
        gemm(
            g.c_out,
            plane,
            patch,
            up,
            false,
            patches,
            true,
            1.0,
            grad_kernel.data_mut(),
        );
        // dCols[P, HW] = Kᵀ · G
        let dst = &mut grad_input.data_mut()[n * in_stride..(n + 1) * in_stride];
        if g.k == 1 {
            gemm(
                patch,
                g.c_out,
                plane,
                kernel.data(),
                true,
                up,
                false,
                0.0,
                dst,
            );
        } else {
            gemm(
                patch,
                g.c_out,
                plane,
                kernel.data(),
                true,
                up,
                false,
                0.0,
                &mut grad_cols,
            );
            col2im(&g, &grad_cols, dst);
        }
    }
    Ok((grad_input, grad_kernel, grad_bias))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_kernel_scales() {
        let input = Tensor::full(&[1, 1, 3, 3], 1.0);
        let kernel = Tensor::full(&[1, 1, 1, 1], 2.0);
        let out = conv2d_forward(&input, &kernel, &Tensor::zeros(&[1])).unwrap();
        assert!(out.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn single_pixel_sees_only_padding() {
        let input = Tensor::full(&[1, 1, 1, 1], 5.0);
        let kernel = Tensor::full(&[1, 1, 3, 3], 1.0);
        let out = conv2d_forward(&input, &kernel, &Tensor::full(&[1], 1.0)).unwrap();
        assert_eq!(out.data(), &[6.0]);
    }

    #[test]
    fn channel_mismatch_reports_both_shapes() {
        let input = Tensor::zeros(&[1, 2, 4, 4]);
        let kernel = Tensor::zeros(&[3, 5, 3, 3]);
        let err = conv2d_forward(&input, &kernel, &Tensor::zeros(&[3])).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("[1, 2, 4, 4]") && msg.contains("[3, 5, 3, 3]"),
            "{msg}"
        );
    }

    #[test]
    fn even_kernel_rejected() {
        let input = Tensor::zeros(&[1, 1, 4, 4]);
        let kernel = Tensor::zeros(&[1, 1, 2, 2]);
        assert!(conv2d_forward(&input, &kernel, &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let input = Tensor::from_fn(&[2, 2, 4, 4], |i| (i as f64).sin());
        let kernel = Tensor::from_fn(&[3, 2, 3, 3], |i| (i as f64).cos());
        let up = Tensor::zeros(&[2, 3, 4, 4]);
        let (gi, gk, gb) = conv2d_backward(&input, &kernel, &up).unwrap();
        assert!(gi
            .data()
            .iter()
            .chain(gk.data())
            .chain(gb.data())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let (x, w, g) = (1.5, -0.75, 2.0);
        let input = Tensor::full(&[1, 1, 1, 1], x);
        let kernel = Tensor::full(&[1, 1, 1, 1], w);
        let up = Tensor::full(&[1, 1, 1, 1], g);
        let (gi, gk, gb) = conv2d_backward(&input, &kernel, &up).unwrap();
        assert_eq!(gi.data(), &[w * g]);
        assert_eq!(gk.data(), &[x * g]);
        assert_eq!(gb.data(), &[g]);
    }

    #[test]
    fn upstream_shape_checked() {
        let input = Tensor::zeros(&[1, 1, 4, 4]);
        let kernel = Tensor::zeros(&[2, 1, 3, 3]);
        assert!(conv2d_backward(&input, &kernel, &Tensor::zeros(&[1, 1, 4, 4])).is_err());
    }
}
