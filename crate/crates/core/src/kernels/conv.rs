//! Convolution kernels (im2col + GEMM). Cross-correlation convention: the
//! kernel is never flipped.

use crate::error::{Error, Result};
use crate::tensor::{matmul_into, MatRef, Scalar, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Padding {
    /// Zero padding of `(k-1)/2` before and `k/2` after; preserves H, W at stride 1.
    Same,
    Valid,
}

/// Resolved geometry of one convolution call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub c_out: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn resolve(input: Shape, weight: Shape, padding: Padding, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("conv2d: stride must be at least 1"));
        }
        if input.c != weight.c {
            return Err(Error::shape("conv2d", input, weight));
        }
        let (k_h, k_w) = (weight.h, weight.w);
        if k_h == 0 || k_w == 0 {
            return Err(Error::invalid("conv2d: empty kernel"));
        }
        let (pad_top, pad_bottom, pad_left, pad_right) = match padding {
            Padding::Same => {
                if k_h % 2 == 0 || k_w % 2 == 0 {
                    return Err(Error::invalid(format!(
                        "conv2d: same padding requires an odd kernel, got {k_h}×{k_w}"
                    )));
                }
                ((k_h - 1) / 2, k_h / 2, (k_w - 1) / 2, k_w / 2)
            }
            Padding::Valid => (0, 0, 0, 0),
        };
        let padded_h = input.h + pad_top + pad_bottom;
        let padded_w = input.w + pad_left + pad_right;
        if padded_h < k_h || padded_w < k_w {
            return Err(Error::shape("conv2d", input, weight));
        }
        Ok(ConvGeometry {
            c_in: input.c,
            c_out: weight.n,
            k_h,
            k_w,
            stride,
            pad_top,
            pad_left,
            in_h: input.h,
            in_w: input.w,
            out_h: (padded_h - k_h) / stride + 1,
            out_w: (padded_w - k_w) / stride + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.k_h * self.k_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    /// 1×1, stride 1, no padding: the image itself is the column matrix.
    fn is_pointwise(&self) -> bool {
        self.k_h == 1 && self.k_w == 1 && self.stride == 1
    }
}

fn im2col<T: Scalar>(image: &[T], g: &ConvGeometry, cols: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.c_in {
        let src = &image[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.k_h {
            for kx in 0..g.k_w {
                let row = (c * g.k_h + ky) * g.k_w + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy as usize >= g.in_h {
                        line.fill(T::zero());
                        continue;
                    }
                    let src_row = &src[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        *v = if ix < 0 || ix as usize >= g.in_w {
                            T::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Scalar>(cols: &[T], g: &ConvGeometry, image: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.c_in {
        let dst = &mut image[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.k_h {
            for kx in 0..g.k_w {
                let row = (c * g.k_h + ky) * g.k_w + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy as usize >= g.in_h {
                        continue;
                    }
                    let dst_row = &mut dst[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        if ix >= 0 && (ix as usize) < g.in_w {
                            dst_row[ix as usize] = dst_row[ix as usize] + src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

fn check_bias<T: Scalar>(bias: Option<&Tensor<T>>, c_out: usize, op: &'static str) -> Result<()> {
    if let Some(b) = bias {
        if b.len() != c_out {
            return Err(Error::shape(op, format!("bias of {}", b.len()), format!("{c_out} filters")));
        }
    }
    Ok(())
}

/// Forward 2-D convolution. `weight` is `(C_out, C_in, k_h, k_w)`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    padding: Padding,
    stride: usize,
) -> Result<(Tensor<T>, ConvGeometry)> {
    let g = ConvGeometry::resolve(input.shape(), weight.shape(), padding, stride)?;
    check_bias(bias, g.c_out, "conv2d")?;
    let n = input.shape().n;
    let plane = g.out_plane();
    let mut out = Tensor::zeros(Shape::new(n, g.c_out, g.out_h, g.out_w));
    let in_stride = g.c_in * g.in_h * g.in_w;
    let out_stride = g.c_out * plane;
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); g.patch_len() * plane]
    };
    let w = MatRef::row_major(weight.data(), g.c_out, g.patch_len());
    for b in 0..n {
        let image = &input.data()[b * in_stride..(b + 1) * in_stride];
        let cols_ref: &[T] = if g.is_pointwise() {
            image
        } else {
            im2col(image, &g, &mut cols);
            &cols
        };
        let dst = &mut out.data_mut()[b * out_stride..(b + 1) * out_stride];
        matmul_into(
            w,
            MatRef::row_major(cols_ref, g.patch_len(), plane),
            T::zero(),
            dst,
        );
        if let Some(bias) = bias {
            for (co, chunk) in dst.chunks_mut(plane).enumerate() {
                let bv = bias.data()[co];
                chunk.iter_mut().for_each(|v| *v = *v + bv);
            }
        }
    }
    Ok((out, g))
}

/// Gradients of [`conv2d_forward`] w.r.t. input, weight and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    g: &ConvGeometry,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let n = input.shape().n;
    let plane = g.out_plane();
    let patch = g.patch_len();
    let in_stride = g.c_in * g.in_h * g.in_w;
    let out_stride = g.c_out * plane;
    let mut d_input = Tensor::zeros(input.shape());
    let mut d_weight = Tensor::zeros(weight.shape());
    let mut d_bias = vec![T::zero(); g.c_out];
    let mut cols = vec![T::zero(); patch * plane];
    let mut d_cols = vec![T::zero(); patch * plane];
    for b in 0..n {
        let image = &input.data()[b * in_stride..(b + 1) * in_stride];
        let dy = &grad_out.data()[b * out_stride..(b + 1) * out_stride];
        for (co, chunk) in dy.chunks(plane).enumerate() {
            d_bias[co] = chunk.iter().fold(d_bias[co], |acc, &v| acc + v);
        }
        let cols_ref: &[T] = if g.is_pointwise() {
            image
        } else {
            im2col(image, g, &mut cols);
            &cols
        };
        // dW += dY · colsᵀ
        matmul_into(
            MatRef::row_major(dy, g.c_out, plane),
            MatRef::row_major(cols_ref, patch, plane).t(),
            T::one(),
            d_weight.data_mut(),
        );
        // dcols = Wᵀ · dY
        let dx = &mut d_input.data_mut()[b * in_stride..(b + 1) * in_stride];
        if g.is_pointwise() {
            matmul_into(
                MatRef::row_major(weight.data(), g.c_out, patch).t(),
                MatRef::row_major(dy, g.c_out, plane),
                T::zero(),
                dx,
            );
        } else {
            matmul_into(
                MatRef::row_major(weight.data(), g.c_out, patch).t(),
                MatRef::row_major(dy, g.c_out, plane),
                T::zero(),
                &mut d_cols,
            );
            col2im_add(&d_cols, g, dx);
        }
    }
    (d_input, d_weight, Tensor::vector(d_bias))
}

fn check_transpose<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<()> {
    let ws = weight.shape();
    if ws.h != 2 || ws.w != 2 {
        return Err(Error::invalid(format!(
            "conv_transpose2d: only 2×2 kernels with stride 2 are supported, got {}×{}",
            ws.h, ws.w
        )));
    }
    if input.shape().c != ws.c {
        return Err(Error::shape("conv_transpose2d", input.shape(), ws));
    }
    Ok(())
}

/// 2×2, stride-2 transposed convolution. `weight` is `(C_out, C_in, 2, 2)`;
/// output pixel `(2i+a, 2j+b)` receives `Σ_c x[c,i,j]·w[o,c,a,b]`.
pub fn conv_transpose2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    check_transpose(input, weight)?;
    let s = input.shape();
    let c_out = weight.shape().n;
    check_bias(bias, c_out, "conv_transpose2d")?;
    let plane = s.plane();
    let (oh, ow) = (s.h * 2, s.w * 2);
    let mut out = Tensor::zeros(Shape::new(s.n, c_out, oh, ow));
    let mut tmp = vec![T::zero(); c_out * plane];
    let in_stride = s.c * plane;
    let out_stride = c_out * oh * ow;
    for b in 0..s.n {
        let x = &input.data()[b * in_stride..(b + 1) * in_stride];
        for tap in 0..4 {
            let (dy, dx) = (tap / 2, tap % 2);
            let w_tap = MatRef {
                data: &weight.data()[tap..],
                rows: c_out,
                cols: s.c,
                rs: (s.c * 4) as isize,
                cs: 4,
            };
            matmul_into(w_tap, MatRef::row_major(x, s.c, plane), T::zero(), &mut tmp);
            let dst = &mut out.data_mut()[b * out_stride..(b + 1) * out_stride];
            for co in 0..c_out {
                let bv = bias.map_or(T::zero(), |bb| bb.data()[co]);
                for i in 0..s.h {
                    for j in 0..s.w {
                        dst[(co * oh + 2 * i + dy) * ow + 2 * j + dx] = tmp[co * plane + i * s.w + j] + bv;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv_transpose2d_forward`]. The input gradient is a
/// stride-2 2×2 convolution of the upstream gradient.
pub fn conv_transpose2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let s = input.shape();
    let c_out = weight.shape().n;
    let plane = s.plane();
    let (oh, ow) = (s.h * 2, s.w * 2);
    let in_stride = s.c * plane;
    let out_stride = c_out * oh * ow;
    let mut d_input = Tensor::zeros(s);
    let mut d_weight = Tensor::zeros(weight.shape());
    let mut d_bias = vec![T::zero(); c_out];
    let mut gathered = vec![T::zero(); c_out * plane];
    let mut dw_tap = vec![T::zero(); c_out * s.c];
    for b in 0..s.n {
        let x = &input.data()[b * in_stride..(b + 1) * in_stride];
        let gy = &grad_out.data()[b * out_stride..(b + 1) * out_stride];
        for (co, chunk) in gy.chunks(oh * ow).enumerate() {
            d_bias[co] = chunk.iter().fold(d_bias[co], |acc, &v| acc + v);
        }
        for tap in 0..4 {
            let (dy, dx) = (tap / 2, tap % 2);
            for co in 0..c_out {
                for i in 0..s.h {
                    for j in 0..s.w {
                        gathered[co * plane + i * s.w + j] = gy[(co * oh + 2 * i + dy) * ow + 2 * j + dx];
                    }
                }
            }
            let w_tap = MatRef {
                data: &weight.data()[tap..],
                rows: c_out,
                cols: s.c,
                rs: (s.c * 4) as isize,
                cs: 4,
            };
            // dX += W_tapᵀ · G_tap
            matmul_into(
                w_tap.t(),
                MatRef::row_major(&gathered, c_out, plane),
                T::one(),
                &mut d_input.data_mut()[b * in_stride..(b + 1) * in_stride],
            );
            // dW_tap = G_tap · Xᵀ
            matmul_into(
                MatRef::row_major(&gathered, c_out, plane),
                MatRef::row_major(x, s.c, plane).t(),
                T::zero(),
                &mut dw_tap,
            );
            let dw = d_weight.data_mut();
            for co in 0..c_out {
                for ci in 0..s.c {
                    let idx = (co * s.c + ci) * 4 + tap;
                    dw[idx] = dw[idx] + dw_tap[co * s.c + ci];
                }
            }
        }
    }
    (d_input, d_weight, Tensor::vector(d_bias))
}
