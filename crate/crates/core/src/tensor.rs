//! Dense 4-D tensors in N, C, H, W order.

use std::fmt;

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point element type usable by the engine.
///
/// Implemented for `f32` (training) and `f64` (gradient checks).
pub trait Scalar: Float + Default + fmt::Debug + fmt::Display + Send + Sync + 'static {
    /// `c = alpha * a * b + beta * c` with arbitrary row/column strides.
    ///
    /// # Safety
    /// Pointers and strides must describe valid `m×k`, `k×n` and `m×n`
    /// matrices; `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Row-major `m×k` times `k×n` into `m×n`, where each operand may be
/// transposed by passing swapped strides.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a, T> MatRef<'a, T> {
    pub fn row_major(data: &'a [T], rows: usize, cols: usize) -> Self {
        MatRef {
            data,
            rows,
            cols,
            rs: cols as isize,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        MatRef {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }
}

/// `out = a·b + beta·out`, `out` row-major.
pub(crate) fn matmul_into<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, out: &mut [T]) {
    assert_eq!(a.cols, b.rows);
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert!(out.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: dimensions and strides were derived from slices large enough to
    // hold the matrices, and `out` is a distinct mutable borrow.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Tensor shape `(N, C, H, W)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn scalar() -> Self {
        Shape::new(1, 1, 1, 1)
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}×{}×{}", self.n, self.c, self.h, self.w)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Dense tensor in row-major N, C, H, W order.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.numel()],
        }
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::shape("tensor", shape, format!("{} elements", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    /// A rank-1 parameter vector stored as `(len, 1, 1, 1)`.
    pub fn vector(data: Vec<T>) -> Self {
        let shape = Shape::new(data.len(), 1, 1, 1);
        Tensor { shape, data }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: Shape::scalar(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + h) * self.shape.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.index(n, c, h, w)]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    /// First non-finite element, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|x| !x.is_finite())
    }

    /// Adds `other` elementwise into `self`.
    pub fn accumulate(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    /// Copies channel range `[start, start + count)` into a new tensor.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Self> {
        let s = self.shape;
        if start + count > s.c {
            return Err(Error::invalid(format!(
                "channel slice {start}..{} out of range for {s}",
                start + count
            )));
        }
        let plane = s.plane();
        let mut data = Vec::with_capacity(s.n * count * plane);
        for n in 0..s.n {
            let base = (n * s.c + start) * plane;
            data.extend_from_slice(&self.data[base..base + count * plane]);
        }
        Ok(Tensor {
            shape: Shape::new(s.n, count, s.h, s.w),
            data,
        })
    }

    /// Channel concatenation in argument order; N, H and W must agree.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::invalid("concat: no inputs"))?.shape;
        let mut channels = 0;
        for t in parts {
            let s = t.shape;
            if (s.n, s.h, s.w) != (first.n, first.h, first.w) {
                return Err(Error::shape("concat", first, s));
            }
            channels += s.c;
        }
        let shape = Shape::new(first.n, channels, first.h, first.w);
        let plane = shape.plane();
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.n {
            for t in parts {
                let block = t.shape.c * plane;
                data.extend_from_slice(&t.data[n * block..(n + 1) * block]);
            }
        }
        Ok(Tensor { shape, data })
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|x| U::from_f64(x.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f32>::from_vec(Shape::new(1, 1, 2, 2), vec![0.0; 3]).is_err());
        let t = Tensor::<f32>::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.at(0, 0, 1, 0), 3.0);
    }

    #[test]
    fn matmul_with_transposed_operand() {
        // [1 2; 3 4]^T · [1 0; 0 1] = [1 3; 2 4]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [1.0f64, 0.0, 0.0, 1.0];
        let mut out = [0.0f64; 4];
        matmul_into(
            MatRef::row_major(&a, 2, 2).t(),
            MatRef::row_major(&b, 2, 2),
            0.0,
            &mut out,
        );
        assert_eq!(out, [1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn slice_channels_picks_contiguous_planes() {
        let data: Vec<f32> = (0..12).map(|x| x as f32).collect();
        let t = Tensor::from_vec(Shape::new(1, 3, 2, 2), data).unwrap();
        let s = t.slice_channels(1, 2).unwrap();
        assert_eq!(s.data(), &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
        assert!(t.slice_channels(2, 2).is_err());
    }
}
