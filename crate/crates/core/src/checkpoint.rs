//! Versioned binary encoding of network parameters.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic     8 bytes   "SEGPNSNN"
//! version   u8        currently 1
//! layers    u32       layer count
//! per layer:
//!   rows        u32
//!   cols        u32
//!   activation  u8    0=relu 1=identity 2=softmax-output 3=sigmoid
//!   weights     rows*cols f32, row-major
//!   bias        rows f32
//! ```
//!
//! The companion crate wraps these bytes in checkpoint files; keeping the
//! codec here lets the format be tested without any IO.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::linalg::Matrix;
use crate::nn::{Activation, DenseParams, Layer};

pub const MAGIC: &[u8; 8] = b"SEGPNSNN";
pub const VERSION: u8 = 1;

pub fn encode_params(params: &DenseParams<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for layer in params.layers() {
        out.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
        out.push(layer.activation.tag_byte());
        for &w in layer.weights.as_slice() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for &b in &layer.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<DenseParams<f32>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(8)?;
    if magic != MAGIC {
        return Err(CoreError::Format("bad checkpoint magic".into()));
    }
    let version = cur.u8()?;
    if version != VERSION {
        return Err(CoreError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n_layers = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let activation = Activation::from_tag_byte(cur.u8()?)?;
        let mut weights = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            weights.push(cur.f32()?);
        }
        let mut bias = Vec::with_capacity(rows);
        for _ in 0..rows {
            bias.push(cur.f32()?);
        }
        layers.push(Layer {
            weights: Matrix::from_vec(rows, cols, weights)?,
            bias,
            activation,
        });
    }
    if cur.pos != bytes.len() {
        return Err(CoreError::Format(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - cur.pos
        )));
    }
    DenseParams::new(layers)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CoreError::Format("truncated checkpoint payload".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let p =
            DenseParams::<f32>::seeded(&[5, 4, 3], &[Activation::Relu, Activation::SoftmaxOutput], 42)
                .unwrap();
        let bytes = encode_params(&p);
        let q = decode_params(&bytes).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn bad_magic_rejected() {
        let p = DenseParams::<f32>::seeded(&[2, 2], &[Activation::Identity], 1).unwrap();
        let mut bytes = encode_params(&p);
        bytes[0] = b'X';
        assert!(matches!(decode_params(&bytes), Err(CoreError::Format(_))));
    }

    #[test]
    fn truncation_rejected() {
        let p = DenseParams::<f32>::seeded(&[2, 2], &[Activation::Identity], 1).unwrap();
        let bytes = encode_params(&p);
        assert!(matches!(
            decode_params(&bytes[..bytes.len() - 3]),
            Err(CoreError::Format(_))
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let p = DenseParams::<f32>::seeded(&[2, 2], &[Activation::Identity], 1).unwrap();
        let mut bytes = encode_params(&p);
        bytes.push(0);
        assert!(matches!(decode_params(&bytes), Err(CoreError::Format(_))));
    }
}
