use super::manifest::DatasetManifest;
use super::pgm::load_gray;
use crate::error::{Error, Result};
use crate::image::{BitDepth, GrayImage, Interpolation};
use crate::tensor::{Scalar, Shape, Tensor};

/// Mask pixels at or above this 8-bit level count as foreground.
pub const MASK_THRESHOLD: u16 = 128;

/// Images scaled to `[0, 1]` and masks in `{0, 1}`, both `(N, 1, H, W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch<T> {
    pub images: Tensor<T>,
    pub masks: Tensor<T>,
}

impl<T: Scalar> SampleBatch<T> {
    pub fn len(&self) -> usize {
        self.images.shape().n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Network input: 8-bit (min–max rescaled if 16-bit), bilinear resize.
pub fn prepare_image(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    img.to_8bit()?.resize(width, height, Interpolation::Bilinear)
}

/// Mask: fixed 16→8-bit scaling (masks may be empty, so no min–max),
/// nearest resize, then a cut at [`MASK_THRESHOLD`] to {0, 255}.
pub fn prepare_mask(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    let eight = match img.depth() {
        BitDepth::Eight => img.clone(),
        BitDepth::Sixteen => GrayImage::new(
            img.width(),
            img.height(),
            BitDepth::Eight,
            img.pixels().iter().map(|&v| (v as u32 * 255 / 65535) as u16).collect(),
        )?,
    };
    let r = eight.resize(width, height, Interpolation::Nearest)?;
    let px = r.pixels().iter().map(|&v| if v >= MASK_THRESHOLD { 255 } else { 0 }).collect();
    GrayImage::new(width, height, BitDepth::Eight, px)
}

/// Loads `indices` in order. Any failing file aborts with its path.
pub fn load_batch<T: Scalar>(manifest: &DatasetManifest, indices: &[usize]) -> Result<SampleBatch<T>> {
    if indices.is_empty() {
        return Err(Error::invalid("load_batch: no indices"));
    }
    let (w, h) = (manifest.width, manifest.height);
    let plane = w * h;
    let mut images = Vec::with_capacity(indices.len() * plane);
    let mut masks = Vec::with_capacity(indices.len() * plane);
    for &i in indices {
        let item = manifest
            .items
            .get(i)
            .ok_or_else(|| Error::invalid(format!("load_batch: index {i} out of range for {} items", manifest.len())))?;
        let image_path = manifest.resolve(&item.image);
        let mask_path = manifest.resolve(&item.mask);
        let at = |path: &std::path::Path, e: Error| match e {
            e @ (Error::Data { .. } | Error::Io { .. }) => e,
            other => Error::Data {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        };
        let img = prepare_image(&load_gray(&image_path)?, w, h).map_err(|e| at(&image_path, e))?;
        let mask = prepare_mask(&load_gray(&mask_path)?, w, h).map_err(|e| at(&mask_path, e))?;
        images.extend(img.pixels().iter().map(|&v| T::from_f64(v as f64 / 255.0)));
        masks.extend(mask.pixels().iter().map(|&v| if v > 0 { T::one() } else { T::zero() }));
    }
    let shape = Shape::new(indices.len(), 1, h, w);
    Ok(SampleBatch {
        images: Tensor::from_vec(shape, images)?,
        masks: Tensor::from_vec(shape, masks)?,
    })
}

/// Rescales a `(N, 1, H, W)` probability map or mask to 8-bit images,
/// `round(255·v)`.
pub fn tensor_to_images<T: Scalar>(t: &Tensor<T>) -> Result<Vec<GrayImage>> {
    let s = t.shape();
    if s.c != 1 {
        return Err(Error::shape("tensor_to_images", "N×1×H×W", s));
    }
    t.data()
        .chunks(s.plane())
        .map(|chunk| {
            let px = chunk
                .iter()
                .map(|v| (v.to_f64().unwrap_or(0.0).clamp(0.0, 1.0) * 255.0).round() as u16)
                .collect();
            GrayImage::new(s.w, s.h, BitDepth::Eight, px)
        })
        .collect()
}
