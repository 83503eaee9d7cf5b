//! Set and intensity similarity measures.

use crate::error::{Error, Result};
use crate::image::{GrayImage, FOREGROUND};

fn check_size(op: &'static str, a: &GrayImage, b: &GrayImage) -> Result<()> {
    if !a.same_size(b) {
        return Err(Error::shape(
            op,
            format!("{}×{}", a.width(), a.height()),
            format!("{}×{}", b.width(), b.height()),
        ));
    }
    Ok(())
}

/// |A∩B| / |A∪B| over foreground pixels; two empty masks score 1.
pub fn jaccard(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_size("jaccard", a, b)?;
    for (name, img) in [("first", a), ("second", b)] {
        if !img.is_binary() {
            return Err(Error::invalid(format!(
                "jaccard: {name} image is not binary {{0, {FOREGROUND}}}; binarize it first"
            )));
        }
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.pixels().iter().zip(b.pixels()) {
        let (x, y) = (x == FOREGROUND, y == FOREGROUND);
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// 1 − Σ|aᵢ − bᵢ| / (W·H·2^depth).
pub fn mae_similarity(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_size("mae", a, b)?;
    if a.depth() != b.depth() {
        return Err(Error::invalid(format!(
            "mae: bit depths differ ({} vs {})",
            a.depth().bits(),
            b.depth().bits()
        )));
    }
    let diff: u64 = a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| x.abs_diff(y) as u64).sum();
    let max_e = a.pixels().len() as f64 * (1u64 << a.depth().bits()) as f64;
    Ok(1.0 - diff as f64 / max_e)
}

/// Σaᵢbᵢ / Σ(aᵢ² + bᵢ² − aᵢbᵢ) on raw intensities; two all-zero images score 1.
pub fn tanimoto(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_size("tanimoto", a, b)?;
    let (mut ab, mut den) = (0u128, 0u128);
    for (&x, &y) in a.pixels().iter().zip(b.pixels()) {
        let (x, y) = (x as u128, y as u128);
        ab += x * y;
        den += x * x + y * y - x * y;
    }
    Ok(if den == 0 { 1.0 } else { ab as f64 / den as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::BitDepth;

    fn mask(px: &[u8]) -> GrayImage {
        let w = px.len();
        GrayImage::from_u8(w, 1, px).unwrap()
    }

    #[test]
    fn jaccard_cases() {
        let a = mask(&[255, 255, 0, 0]);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &mask(&[0, 0, 255, 255])).unwrap(), 0.0);
        assert_eq!(jaccard(&a, &mask(&[255, 0, 0, 0])).unwrap(), 0.5);
        assert_eq!(jaccard(&mask(&[0, 0]), &mask(&[0, 0])).unwrap(), 1.0);
        assert!(jaccard(&a, &mask(&[255, 128, 0, 0])).is_err());
        assert!(jaccard(&a, &mask(&[255, 0])).is_err());
    }

    #[test]
    fn mae_cases() {
        let a = mask(&[0]);
        assert_eq!(mae_similarity(&a, &mask(&[255])).unwrap(), 0.00390625);
        let g = GrayImage::from_u8(2, 2, &[3, 90, 200, 17]).unwrap();
        assert_eq!(mae_similarity(&g, &g).unwrap(), 1.0);
        let deep = GrayImage::new(1, 1, BitDepth::Sixteen, vec![0]).unwrap();
        assert!(mae_similarity(&a, &deep).is_err());
    }

    #[test]
    fn mae_grows_with_blank_margins() {
        let a = GrayImage::from_u8(2, 2, &[10, 200, 30, 0]).unwrap();
        let b = GrayImage::from_u8(2, 2, &[0, 180, 90, 5]).unwrap();
        let base = mae_similarity(&a, &b).unwrap();
        assert!(base < 1.0);
        assert!(mae_similarity(&a.pad(1, 1), &b.pad(1, 1)).unwrap() > base);
    }

    #[test]
    fn tanimoto_cases() {
        let g = GrayImage::from_u8(2, 2, &[3, 90, 200, 17]).unwrap();
        assert_eq!(tanimoto(&g, &g).unwrap(), 1.0);
        let z = GrayImage::from_u8(2, 2, &[0; 4]).unwrap();
        assert_eq!(tanimoto(&z, &z).unwrap(), 1.0);
        assert_eq!(tanimoto(&g, &z).unwrap(), 0.0);
        let h = GrayImage::from_u8(2, 2, &[9, 80, 100, 0]).unwrap();
        assert_eq!(tanimoto(&g.pad(3, 2), &h.pad(3, 2)).unwrap().to_bits(), tanimoto(&g, &h).unwrap().to_bits());
    }

    #[test]
    fn tanimoto_equals_jaccard_on_2x2_masks() {
        for i in 0..16u8 {
            for j in 0..16u8 {
                let m = |bits: u8| {
                    let px: Vec<u8> = (0..4).map(|k| if bits >> k & 1 == 1 { 255 } else { 0 }).collect();
                    GrayImage::from_u8(2, 2, &px).unwrap()
                };
                let (a, b) = (m(i), m(j));
                assert_eq!(tanimoto(&a, &b).unwrap(), jaccard(&a, &b).unwrap());
            }
        }
    }

    #[test]
    fn transposition_invariance() {
        let a = GrayImage::from_u8(3, 2, &[1, 50, 200, 7, 0, 9]).unwrap();
        let b = GrayImage::from_u8(3, 2, &[4, 40, 255, 0, 3, 9]).unwrap();
        let (at, bt) = (a.transpose(), b.transpose());
        assert_eq!(tanimoto(&a, &b).unwrap(), tanimoto(&at, &bt).unwrap());
        assert_eq!(mae_similarity(&a, &b).unwrap(), mae_similarity(&at, &bt).unwrap());
    }
}
