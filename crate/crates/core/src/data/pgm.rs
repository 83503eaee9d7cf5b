//! Binary PGM (P5), 8-bit or big-endian 16-bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BitDepth, GrayImage};

fn fail(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(fail(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| fail(start, format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(fail(0, "not a binary PGM (missing P5 magic)"));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space();
    let max_pos = h.pos;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(fail(max_pos, format!("maxval {maxval} outside 1..=65535")));
    }
    if width == 0 || height == 0 {
        return Err(fail(2, format!("empty image {width}×{height}")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(fail(h.pos, "expected a single whitespace byte after maxval")),
    }
    let (depth, sample) = if maxval < 256 { (BitDepth::Eight, 1) } else { (BitDepth::Sixteen, 2) };
    let count = width
        .checked_mul(height)
        .ok_or_else(|| fail(2, "image dimensions overflow"))?;
    let need = count * sample;
    let payload = &bytes[h.pos..];
    if payload.len() < need {
        return Err(fail(
            h.pos + payload.len(),
            format!("truncated payload: need {need} bytes, found {}", payload.len()),
        ));
    }
    let pixels: Vec<u16> = if sample == 1 {
        payload[..need].iter().map(|&b| b as u16).collect()
    } else {
        payload[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    if let Some(i) = pixels.iter().position(|&v| v as usize > maxval) {
        return Err(fail(h.pos + i * sample, format!("sample {} exceeds maxval {maxval}", pixels[i])));
    }
    GrayImage::new(width, height, depth, pixels)
}

/// Writes maxval 255 or 65535 according to the image depth.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), img.depth().max_value()).into_bytes();
    match img.depth() {
        BitDepth::Eight => out.extend(img.pixels().iter().map(|&v| v as u8)),
        BitDepth::Sixteen => out.extend(img.pixels().iter().flat_map(|v| v.to_be_bytes())),
    }
    out
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| match e {
        Error::Format { offset, message } => Error::Data {
            path: path.to_path_buf(),
            message: format!("byte {offset}: {message}"),
        },
        other => Error::Data {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

pub fn save_gray(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
