//! Single-channel integer images and the geometric operations on them.

use crate::error::{Error, Result};

/// Foreground intensity of binary masks.
pub const FOREGROUND: u16 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

/// Row-major grayscale image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    depth: BitDepth,
    pixels: Vec<u16>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, depth: BitDepth, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image dimensions must be positive, got {width}×{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{width}×{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(&v) = pixels.iter().find(|&&v| v > depth.max_value()) {
            return Err(Error::invalid(format!("pixel value {v} exceeds {}-bit range", depth.bits())));
        }
        Ok(GrayImage {
            width,
            height,
            depth,
            pixels,
        })
    }

    /// 8-bit image from raw bytes.
    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        GrayImage::new(width, height, BitDepth::Eight, pixels.iter().map(|&v| v as u16).collect())
    }

    pub fn filled(width: usize, height: usize, depth: BitDepth, value: u16) -> Result<Self> {
        GrayImage::new(width, height, depth, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    /// Every pixel is 0 or [`FOREGROUND`].
    pub fn is_binary(&self) -> bool {
        self.pixels.iter().all(|&v| v == 0 || v == FOREGROUND)
    }

    pub fn same_size(&self, other: &GrayImage) -> bool {
        (self.width, self.height) == (other.width, other.height)
    }

    pub fn transpose(&self) -> GrayImage {
        let mut pixels = vec![0; self.pixels.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                pixels[x * self.height + y] = self.get(x, y);
            }
        }
        GrayImage {
            width: self.height,
            height: self.width,
            depth: self.depth,
            pixels,
        }
    }

    /// Zero margins of `mx` columns left and right and `my` rows above and below.
    pub fn pad(&self, mx: usize, my: usize) -> GrayImage {
        let w = self.width + 2 * mx;
        let h = self.height + 2 * my;
        let mut pixels = vec![0; w * h];
        for y in 0..self.height {
            let dst = (y + my) * w + mx;
            pixels[dst..dst + self.width].copy_from_slice(&self.pixels[y * self.width..(y + 1) * self.width]);
        }
        GrayImage {
            width: w,
            height: h,
            depth: self.depth,
            pixels,
        }
    }

    /// Box-average down-sampling by an integer factor; trailing rows and
    /// columns that do not fill a whole box are dropped.
    pub fn downsample(&self, factor: usize) -> Result<GrayImage> {
        if factor == 0 || factor > self.width || factor > self.height {
            return Err(Error::invalid(format!(
                "cannot down-sample {}×{} by {factor}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let area = (factor * factor) as u64;
        let mut pixels = Vec::with_capacity(w * h);
        for by in 0..h {
            for bx in 0..w {
                let mut sum = 0u64;
                for y in by * factor..(by + 1) * factor {
                    for x in bx * factor..(bx + 1) * factor {
                        sum += self.get(x, y) as u64;
                    }
                }
                pixels.push(((sum + area / 2) / area) as u16);
            }
        }
        GrayImage::new(w, h, self.depth, pixels)
    }

    /// Resamples to `width × height` with pixel-centre alignment.
    pub fn resize(&self, width: usize, height: usize, mode: Interpolation) -> Result<GrayImage> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("resize target must be positive, got {width}×{height}")));
        }
        if (width, height) == (self.width, self.height) {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let v = match mode {
                    Interpolation::Nearest => {
                        let nx = (((x as f64 + 0.5) * sx) as usize).min(self.width - 1);
                        let ny = (((y as f64 + 0.5) * sy) as usize).min(self.height - 1);
                        self.get(nx, ny)
                    }
                    Interpolation::Bilinear => {
                        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
                        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
                        let top = self.get(x0, y0) as f64 * (1.0 - tx) + self.get(x1, y0) as f64 * tx;
                        let bottom = self.get(x0, y1) as f64 * (1.0 - tx) + self.get(x1, y1) as f64 * tx;
                        (top * (1.0 - ty) + bottom * ty).round() as u16
                    }
                };
                pixels.push(v);
            }
        }
        GrayImage::new(width, height, self.depth, pixels)
    }

    /// Per-image linear min–max rescale of a 16-bit image to 8 bits,
    /// truncating. 8-bit images pass through unchanged.
    pub fn to_8bit(&self) -> Result<GrayImage> {
        if self.depth == BitDepth::Eight {
            return Ok(self.clone());
        }
        let min = *self.pixels.iter().min().expect("non-empty") as u64;
        let max = *self.pixels.iter().max().expect("non-empty") as u64;
        if min == max {
            return Err(Error::invalid(format!("cannot rescale a constant image (all {min})")));
        }
        let pixels = self.pixels.iter().map(|&v| ((v as u64 - min) * 255 / (max - min)) as u16).collect();
        GrayImage::new(self.width, self.height, BitDepth::Eight, pixels)
    }
}
