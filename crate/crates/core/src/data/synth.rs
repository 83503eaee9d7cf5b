//! Synthetic blob segmentation data.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{DatasetManifest, ManifestItem};
use super::pgm::save_gray;
use crate::arch::check_spatial;
use crate::autodiff::stable_sigmoid;
use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Foreground share of every generated mask lies strictly inside this range.
pub const AREA_RANGE: (f64, f64) = (0.02, 0.6);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Splits items into this many contiguous groups; `None` leaves them ungrouped.
    pub groups: Option<usize>,
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    /// Normalised radial coordinate: below 1 inside.
    fn radius(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }
}

/// One image/mask pair: 1–3 soft-edged bright ellipses over a noisy
/// background; the mask is the exact ellipse interiors.
pub fn synth_sample(width: usize, height: usize, rng: &mut ChaCha8Rng) -> (GrayImage, GrayImage) {
    let side = width.min(height) as f64;
    loop {
        let blobs: Vec<Ellipse> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                Ellipse {
                    cx: rng.gen_range(0.15..0.85) * width as f64,
                    cy: rng.gen_range(0.15..0.85) * height as f64,
                    a: rng.gen_range(0.08..0.25) * side,
                    b: rng.gen_range(0.08..0.25) * side,
                    cos: theta.cos(),
                    sin: theta.sin(),
                }
            })
            .collect();
        let background = rng.gen_range(0.15..0.3);
        let foreground = rng.gen_range(0.65..0.85);
        let mut image = Vec::with_capacity(width * height);
        let mut mask = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut inside = false;
                let mut soft: f64 = 0.0;
                for e in &blobs {
                    let r = e.radius(px, py);
                    inside |= r <= 1.0;
                    soft = soft.max(stable_sigmoid((1.0 - r) * e.a.min(e.b)));
                }
                let noise = (rng.gen::<f64>() + rng.gen::<f64>() + rng.gen::<f64>() - 1.5) * 0.06;
                let v = background + (foreground - background) * soft + noise;
                image.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
                mask.push(if inside { 255 } else { 0 });
            }
        }
        let area = mask.iter().filter(|&&m| m > 0).count() as f64 / mask.len() as f64;
        if area > AREA_RANGE.0 && area < AREA_RANGE.1 {
            return (
                GrayImage::from_u8(width, height, &image).expect("dimensions"),
                GrayImage::from_u8(width, height, &mask).expect("dimensions"),
            );
        }
    }
}

/// Writes `count` pairs plus a manifest into `dir`. Identical configs give
/// byte-identical files.
pub fn synth_blobs(dir: &Path, config: &SynthConfig) -> Result<DatasetManifest> {
    check_spatial(config.height, config.width)?;
    if config.count == 0 {
        return Err(Error::invalid("synth: count must be positive"));
    }
    if config.groups.is_some_and(|g| g == 0 || g > config.count) {
        return Err(Error::invalid(format!("synth: groups must lie in 1..={}", config.count)));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut items = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let (image, mask) = synth_sample(config.width, config.height, &mut rng);
        let (ip, mp) = (format!("image_{i:04}.pgm"), format!("mask_{i:04}.pgm"));
        save_gray(&dir.join(&ip), &image)?;
        save_gray(&dir.join(&mp), &mask)?;
        items.push(ManifestItem {
            image: ip.into(),
            mask: mp.into(),
            group: config.groups.map(|g| format!("g{:02}", i * g / config.count)),
        });
    }
    let manifest = DatasetManifest {
        items,
        width: config.width,
        height: config.height,
        depth: 8,
        root: dir.to_path_buf(),
    };
    manifest.save(&dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}
