use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

/// 2×2 max pooling with stride 2. Returns the output and, for each output
/// element, the flat input index of its maximum (first row-major occurrence
/// on ties).
pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let s = input.shape();
    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "maxpool2x2: height and width must be even, got {}×{}",
            s.h, s.w
        )));
    }
    let (oh, ow) = (s.h / 2, s.w / 2);
    let out_shape = Shape::new(s.n, s.c, oh, ow);
    let mut out = Vec::with_capacity(out_shape.numel());
    let mut argmax = Vec::with_capacity(out_shape.numel());
    let x = input.data();
    for nc in 0..s.n * s.c {
        let base = nc * s.h * s.w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + 2 * i * s.w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + di) * s.w + 2 * j + dj;
                    // NaN never wins the comparison; it is caught downstream.
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(out_shape, out)?, argmax))
}

pub fn maxpool2x2_backward<T: Scalar>(input_shape: Shape, argmax: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let mut d = Tensor::zeros(input_shape);
    let dd = d.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        dd[idx] = dd[idx] + g;
    }
    d
}
