//! Binary checkpoint format.
//!
//! ```text
//! magic "DCUN" | version u8 | record count u32
//! per record: name length u16 | name UTF-8 | ndim u8 | dims u32 × ndim | f32 × Π dims
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"DCUN";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Record {
    pub fn from_tensor<T: Scalar>(name: &str, t: &Tensor<T>) -> Self {
        Record {
            name: name.to_string(),
            dims: t.shape().dims().iter().map(|&d| d as u32).collect(),
            data: t.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect(),
        }
    }

    pub fn from_slice<T: Scalar>(name: &str, values: &[T]) -> Self {
        Record {
            name: name.to_string(),
            dims: vec![values.len() as u32],
            data: values.iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect(),
        }
    }

    /// Converts to a tensor of `shape`; the element count must agree.
    pub fn to_tensor<T: Scalar>(&self, shape: Shape) -> Result<Tensor<T>> {
        if self.data.len() != shape.numel() {
            return Err(Error::shape(
                "checkpoint",
                format!("{} of {:?}", self.name, self.dims),
                shape,
            ));
        }
        Tensor::from_vec(shape, self.data.iter().map(|&v| T::from_f64(v as f64)).collect())
    }
}

pub fn encode(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(r.dims.len() as u8);
        for d in &r.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                message: format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "not a checkpoint (bad magic)".into(),
        });
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    let count = r.u32("record count")?;
    let mut records = Vec::new();
    for _ in 0..count {
        let start = r.pos;
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::Format {
                offset: start + 2,
                message: "record name is not UTF-8".into(),
            })?
            .to_string();
        let ndim = r.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32("dimension")?);
        }
        let numel = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        let bytes_needed = numel.and_then(|n| n.checked_mul(4)).ok_or_else(|| Error::Format {
            offset: start,
            message: format!("record {name} dimensions {dims:?} overflow"),
        })?;
        let payload = r.take(bytes_needed, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        records.push(Record { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            offset: r.pos,
            message: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(records)
}

pub fn save(path: &Path, records: &[Record]) -> Result<()> {
    fs::write(path, encode(records)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<Record>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { offset, message } => Error::Data {
            path: path.to_path_buf(),
            message: format!("byte {offset}: {message}"),
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Record> {
        vec![
            Record {
                name: "block1/conv1.weight".into(),
                dims: vec![2, 1, 1, 1],
                data: vec![0.5, -1.25],
            },
            Record {
                name: "empty".into(),
                dims: vec![0],
                data: vec![],
            },
        ]
    }

    #[test]
    fn round_trip() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], b"DCUN");
        assert_eq!(decode(&bytes).unwrap(), sample());
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = encode(&sample()[..1]);
        assert_eq!(&bytes[5..9], &1u32.to_le_bytes());
        assert_eq!(&bytes[9..11], &19u16.to_le_bytes());
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(&payload[..4], &0.5f32.to_le_bytes());
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode(&sample());
        let cut = &bytes[..bytes.len() - 20];
        match decode(cut).unwrap_err() {
            Error::Format { offset, .. } => assert!(offset > 9 && offset <= cut.len()),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_magic_and_trailing_bytes() {
        assert!(matches!(decode(b"NOPE\x01\0\0\0\0"), Err(Error::Format { offset: 0, .. })));
        let mut bytes = encode(&sample());
        bytes.push(0);
        assert!(decode(&bytes).is_err());
    }
}
