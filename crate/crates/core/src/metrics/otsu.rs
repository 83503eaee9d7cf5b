//! Otsu thresholding.

use crate::error::{Error, Result};
use crate::image::{BitDepth, GrayImage, FOREGROUND};

/// Threshold maximising the between-class variance, with class 0 = {v ≤ T}.
/// Candidates run from the minimum to one below the maximum intensity; ties
/// go to the smaller threshold.
pub fn otsu_threshold(img: &GrayImage) -> Result<u16> {
    let bins = img.depth().max_value() as usize + 1;
    let mut hist = vec![0u64; bins];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let lo = hist.iter().position(|&c| c > 0).expect("non-empty image");
    let hi = hist.iter().rposition(|&c| c > 0).expect("non-empty image");
    if lo == hi {
        return Err(Error::invalid(format!("Otsu threshold undefined for a constant image (all {lo})")));
    }
    let n = img.pixels().len() as i128;
    let total: i128 = hist.iter().enumerate().map(|(v, &c)| v as i128 * c as i128).sum();
    let (mut n0, mut s0) = (0i128, 0i128);
    let mut best = (lo as u16, f64::NEG_INFINITY);
    for (t, &count) in hist.iter().enumerate().take(hi).skip(lo) {
        n0 += count as i128;
        s0 += t as i128 * count as i128;
        // N²·σ_B² = (s0·N − S·n0)² / (n0·n1)
        let d = (s0 * n - total * n0) as f64;
        let score = d * d / (n0 * (n - n0)) as f64;
        if score > best.1 {
            best = (t as u16, score);
        }
    }
    Ok(best.0)
}

/// `v > T` becomes [`FOREGROUND`], everything else 0; the result is 8-bit.
pub fn binarize(img: &GrayImage, threshold: u16) -> GrayImage {
    let pixels = img.pixels().iter().map(|&v| if v > threshold { FOREGROUND } else { 0 }).collect();
    GrayImage::new(img.width(), img.height(), BitDepth::Eight, pixels).expect("same dimensions")
}
