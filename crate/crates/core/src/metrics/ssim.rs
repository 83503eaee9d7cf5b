use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 8,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

/// Single-scale SSIM: the mean over every `window × window` position (stride
/// 1, uniform weights, population moments), clamped to `[0, 1]`.
pub fn ssim(a: &GrayImage, b: &GrayImage, params: SsimParams) -> Result<f64> {
    if !a.same_size(b) {
        return Err(Error::shape(
            "ssim",
            format!("{}×{}", a.width(), a.height()),
            format!("{}×{}", b.width(), b.height()),
        ));
    }
    let k = params.window;
    if k == 0 || k > a.width() || k > a.height() {
        return Err(Error::invalid(format!(
            "ssim: window {k} does not fit a {}×{} image",
            a.width(),
            a.height()
        )));
    }
    let l = a.depth().max_value().max(b.depth().max_value()) as f64;
    let c1 = (params.k1 * l).powi(2);
    let c2 = (params.k2 * l).powi(2);
    let n = (k * k) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=a.height() - k {
        for x0 in 0..=a.width() - k {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in y0..y0 + k {
                for x in x0..x0 + k {
                    let (u, v) = (a.get(x, y) as f64, b.get(x, y) as f64);
                    sa += u;
                    sb += v;
                    saa += u * u;
                    sbb += v * v;
                    sab += u * v;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = saa / n - ma * ma;
            let vb = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(0.0, 1.0))
}
